"""
Potentiels d'équilibre et capacités non réversibles sur E_N.

Trois routes indépendantes pour la capacité:
  - identité de Dirichlet Cap(A,B) = D_N(V_{A,B});
  - formule inf-sup évaluée en F = (V + V*)/2;
  - principe de Dirichlet de la chaîne symétrisée 𝓢 (Cap^s).
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy import optimize

from .configspace import enumerate_space
from .exceptions import ZRPDomainError, ZRPOverlapError, ZRPSizeError
from .generator import KINDS, build, build_all, dirichlet_form
from .utils.solvers import build_reduction, maximize_quadratic, solve_linear

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "tazrp.capacity/1"
DENSE_ORACLE_MAX = 5_000
INFSUP_RTOL = 1e-8
MONOTONICITY_RTOL = 1e-10


# -----------------------------------------------------
#   VALIDATION DES ENSEMBLES
# -----------------------------------------------------

def as_ordinals(space, states, name="A"):
    """
    Convertit un ensemble d'ordinaux en tableau trié sans doublons.

    Raises:
        ZRPDomainError: Si l'ensemble est vide ou contient un ordinal invalide
    """
    if isinstance(states, (set, frozenset)):
        states = sorted(states)
    idx = np.unique(np.asarray(states, dtype=np.int64).ravel())
    if idx.size == 0:
        raise ZRPDomainError(f"L'ensemble {name} est vide", {"set": name})
    if idx[0] < 0 or idx[-1] >= len(space):
        raise ZRPDomainError(
            f"Ordinal hors de E_N dans {name}",
            {"set": name, "min": int(idx[0]), "max": int(idx[-1]), "size": len(space)}
        )
    return idx


def _disjoint_pair(space, A, B):
    A = as_ordinals(space, A, "A")
    B = as_ordinals(space, B, "B")
    common = np.intersect1d(A, B)
    if common.size:
        raise ZRPOverlapError(
            "Les ensembles A et B doivent être disjoints",
            {"common": int(common.size)}
        )
    return A, B


def _operators(space, operators):
    if operators is None:
        return build_all(space)
    missing = [k for k in KINDS if k not in operators]
    out = dict(operators)
    for kind in missing:
        out[kind] = build(space, kind)
    return out


# -----------------------------------------------------
#   POTENTIELS D'ÉQUILIBRE
# -----------------------------------------------------

def _harmonic(op, A, B):
    """Résout (QV)(η)=0 hors de A∪B avec V=1 sur A, V=0 sur B."""
    size = op.shape[0]
    V = np.zeros(size)
    V[A] = 1.0
    boundary = np.zeros(size, dtype=bool)
    boundary[A] = True
    boundary[B] = True
    free = np.flatnonzero(~boundary)
    if free.size:
        Q = op.matrix
        Q_free = Q[free]
        Q_ii = Q_free[:, free]
        rhs = -np.asarray(Q_free[:, A].sum(axis=1)).ravel()
        V[free] = solve_linear(Q_ii, rhs)
        residual = float(np.max(np.abs((Q_free @ V))))
    else:
        residual = 0.0
    return V, residual


def equilibrium_potential(space, A, B, kind="forward", operator=None):
    """
    Potentiel d'équilibre V_{A,B}(η) = P_η[H_A < H_B] pour 𝓛, 𝓛* ou 𝓢.

    Args:
        space: StateSpace
        A, B: Ordinaux (ensembles non vides disjoints)
        kind: "forward", "adjoint" ou "symmetric"
        operator: RateOperator déjà construit (optionnel)

    Returns:
        tuple: (V, résidu d'harmonicité max)

    Raises:
        ZRPOverlapError: Si A et B se recouvrent
        ZRPSolverError: Si le système est singulier
    """
    A, B = _disjoint_pair(space, A, B)
    op = operator if operator is not None else build(space, kind)
    return _harmonic(op, A, B)


@dataclass(frozen=True)
class PotentialSolution:
    """Potentiels direct et adjoint d'un couple (A, B)."""
    A: np.ndarray
    B: np.ndarray
    V: np.ndarray
    Vstar: np.ndarray
    residual: float


def solve_potentials(space, A, B, operators=None):
    """Calcule V_{A,B} et V*_{A,B}."""
    A, B = _disjoint_pair(space, A, B)
    ops = _operators(space, operators)
    V, res_f = _harmonic(ops["forward"], A, B)
    Vstar, res_a = _harmonic(ops["adjoint"], A, B)
    return PotentialSolution(A=A, B=B, V=V, Vstar=Vstar, residual=max(res_f, res_a))


# -----------------------------------------------------
#   FONCTIONNELLE SUP
# -----------------------------------------------------

def sup_functional(space, F, constraint_sets, operators=None):
    """
    Maximise 2⟨𝓛*F, H⟩_{μ_N} − ⟨H, (−𝓢)H⟩_{μ_N} sous contraintes.

    Args:
        space: StateSpace
        F: Fonction sur E_N
        constraint_sets: Liste de couples (ordinaux, valeur); valeur ``None``
            signifie « H constante libre sur l'ensemble »
        operators: Dictionnaire {type: RateOperator} (optionnel)

    Returns:
        tuple: (valeur, H optimal)

    Raises:
        ZRPDimensionError: Si F n'a pas la dimension |E_N|
        ZRPOverlapError: Si deux ensembles contraints se recouvrent
    """
    F = space.check_vector(F)
    ops = _operators(space, operators)
    b = space.mu * ops["adjoint"].apply(F)
    K = sp.diags(space.mu) @ (-ops["symmetric"].matrix)
    K = sp.csr_matrix(0.5 * (K + K.T))
    constraints = [(np.asarray(idx, dtype=np.int64), value) for idx, value in constraint_sets]
    reduction = build_reduction(len(space), constraints)
    value, H, gauge = maximize_quadratic(K, b, reduction)
    if gauge is not None:
        logger.debug("sup_functional: jauge additive fixée à 0 sur la colonne %d", gauge)
    return value, H


# -----------------------------------------------------
#   CAPACITÉS
# -----------------------------------------------------

@dataclass
class CapacityReport:
    """
    Capacité non réversible et ses certificats.

    Attributes:
        cap: D_N(V_{A,B})
        cap_sym: Capacité de la chaîne 𝓢
        value_infsup: Fonctionnelle sup évaluée en F = (V+V*)/2
        sandwich_ok: Cap^s ≤ Cap ≤ 4L²·Cap^s
        residuals: Résidus d'harmonicité et écart inf-sup relatif
    """
    L: int
    N: int
    alpha: float
    A: list
    B: list
    cap: float
    cap_sym: float
    value_infsup: float
    sandwich_ok: bool
    residuals: dict
    ellN: Optional[int] = None
    oracle: Optional[float] = None
    solution: Optional[PotentialSolution] = field(default=None, repr=False)

    @property
    def infsup_relative_error(self):
        return abs(self.cap - self.value_infsup) / self.cap if self.cap > 0 else float("inf")

    @property
    def infsup_ok(self):
        return self.infsup_relative_error <= INFSUP_RTOL

    @property
    def oracle_relative_error(self):
        if self.oracle is None:
            return None
        return abs(self.cap - self.oracle) / self.cap

    def scaled(self, value):
        """N^{1+α}·value."""
        return float(self.N ** (1.0 + self.alpha) * value)

    def to_dict(self):
        out = {
            "schema": REPORT_SCHEMA,
            "L": self.L,
            "N": self.N,
            "alpha": self.alpha,
            "ellN": self.ellN,
            "A": self.A,
            "B": self.B,
            "cap": self.cap,
            "cap_sym": self.cap_sym,
            "infsup": self.value_infsup,
            "infsup_ok": self.infsup_ok,
            "sandwich_ok": self.sandwich_ok,
            "residuals": dict(self.residuals, infsup_relative=self.infsup_relative_error),
        }
        if self.oracle is not None:
            out["oracle"] = self.oracle
            out["oracle_relative_error"] = self.oracle_relative_error
        return out


def capacity(space, A, B, ellN=None, labels=None, operators=None, dense_oracle=False):
    """
    Capacité Cap_N(A, B) par trois routes indépendantes.

    Args:
        space: StateSpace
        A, B: Ordinaux (ensembles non vides disjoints)
        ellN: Seuil des puits (reporté tel quel)
        labels: Couple (étiquette A, étiquette B) pour le rapport (ex. sites);
            par défaut les listes d'ordinaux
        operators: Dictionnaire {type: RateOperator} (optionnel)
        dense_oracle: Ajoute la valeur de l'oracle dense indépendant

    Returns:
        CapacityReport

    Raises:
        ZRPOverlapError: Si A et B se recouvrent
        ZRPSolverError: En cas d'échec d'une résolution
    """
    ops = _operators(space, operators)
    solution = solve_potentials(space, A, B, ops)
    A, B = solution.A, solution.B
    symmetric = ops["symmetric"]

    cap = dirichlet_form(space, solution.V, symmetric)
    Vs, res_s = _harmonic(symmetric, A, B)
    cap_sym = dirichlet_form(space, Vs, symmetric)

    F = 0.5 * (solution.V + solution.Vstar)
    value_infsup, _ = sup_functional(space, F, [(A, None), (B, None)], ops)

    tol = 1e-10 * max(cap, cap_sym)
    bound = 4.0 * space.L ** 2
    sandwich_ok = bool(cap_sym <= cap + tol and cap <= bound * cap_sym + bound * tol)

    if labels is None:
        labels = (A.tolist(), B.tolist())
    free = _free(space, A, B)
    report = CapacityReport(
        L=space.L, N=space.N, alpha=space.alpha,
        A=list(labels[0]), B=list(labels[1]),
        cap=cap, cap_sym=cap_sym, value_infsup=value_infsup,
        sandwich_ok=sandwich_ok,
        residuals={
            "forward": float(np.max(np.abs(ops["forward"].apply(solution.V)[free]), initial=0.0)),
            "adjoint": float(np.max(np.abs(ops["adjoint"].apply(solution.Vstar)[free]), initial=0.0)),
            "symmetric": res_s,
        },
        ellN=ellN,
        solution=solution,
    )
    if dense_oracle:
        report.oracle = dense_capacity_oracle(space, A, B)
    if not report.infsup_ok:
        logger.warning("écart inf-sup relatif %.3e au-delà de %.0e",
                       report.infsup_relative_error, INFSUP_RTOL)
    logger.debug("Cap=%.6e Cap^s=%.6e infsup=%.6e", cap, cap_sym, value_infsup)
    return report


def _free(space, A, B):
    mask = np.ones(len(space), dtype=bool)
    mask[A] = False
    mask[B] = False
    return mask


def symmetric_capacity(space, A, B, symmetric=None):
    """Cap^s_N(A,B) = D_N(V^s_{A,B}) pour la chaîne réversible 𝓢."""
    A, B = _disjoint_pair(space, A, B)
    symmetric = symmetric or build(space, "symmetric")
    Vs, _ = _harmonic(symmetric, A, B)
    return dirichlet_form(space, Vs, symmetric)


def forward_capacity(space, A, B, operators=None):
    """Cap_N(A,B) = D_N(V_{A,B}) sans les certificats du rapport complet."""
    A, B = _disjoint_pair(space, A, B)
    ops = _operators(space, operators)
    V, _ = _harmonic(ops["forward"], A, B)
    return dirichlet_form(space, V, ops["symmetric"])


def walk_capacity(L, x, y, kind="forward"):
    """
    Capacité entre deux sites pour la marche d'une particule sur T_L.

    ``kind="forward"`` donne la marche totalement asymétrique de taux 1
    (Cap(x,y) = 1/L); ``kind="symmetric"`` la marche de taux 1/2 à droite et
    à gauche.

    Raises:
        ZRPDomainError: Si x = y ou si le type est invalide
    """
    if x % L == y % L:
        raise ZRPDomainError("Les sites doivent être distincts", {"x": x, "y": y})
    if kind not in ("forward", "symmetric"):
        raise ZRPDomainError("Type de marche invalide", {"kind": kind})
    space = enumerate_space(L, 1, 1.0)
    at = [0] * L
    at[x % L] = 1
    A = [space.index_of(at)]
    at = [0] * L
    at[y % L] = 1
    B = [space.index_of(at)]
    if kind == "symmetric":
        return symmetric_capacity(space, A, B)
    return forward_capacity(space, A, B)


def symmetric_walk_capacity(L, x, y):
    """Forme close (1/(2L))·(1/d + 1/(L−d)), d = (y−x) mod L."""
    d = (y - x) % L
    if d == 0:
        raise ZRPDomainError("Les sites doivent être distincts", {"x": x, "y": y})
    return (1.0 / (2 * L)) * (1.0 / d + 1.0 / (L - d))


def dense_capacity_oracle(space, A, B):
    """
    Capacité par la chaîne de sauts dense, codée indépendamment du chemin creux.

    Les taux sont recalculés configuration par configuration; la probabilité
    d'atteindre A avant B est obtenue par résolution dense sur la chaîne
    incluse, puis Cap = Σ_{η∈A} μ(η) Σ_ξ r(η,ξ)(1 − V(ξ)).

    Raises:
        ZRPSizeError: Si |E_N| dépasse la limite dense
    """
    size = len(space)
    if size > DENSE_ORACLE_MAX:
        raise ZRPSizeError(
            "Espace trop grand pour l'oracle dense",
            {"cardinality": size, "cap": DENSE_ORACLE_MAX}
        )
    A, B = _disjoint_pair(space, A, B)
    states = space.states
    index = {c: i for i, c in enumerate(states)}
    alpha = space.alpha
    rates = np.zeros((size, size))
    for i, eta in enumerate(states):
        for x in range(space.L):
            k = eta[x]
            if k == 0:
                continue
            rate = 1.0 if k == 1 else (k / (k - 1)) ** alpha
            rates[i, index[eta.move(x, x + 1)]] += rate
    exit_rates = rates.sum(axis=1)
    P = rates / exit_rates[:, None]

    in_A = np.zeros(size, dtype=bool)
    in_A[A] = True
    in_B = np.zeros(size, dtype=bool)
    in_B[B] = True
    free = ~(in_A | in_B)
    h = np.zeros(size)
    h[in_A] = 1.0
    if free.any():
        M = np.eye(int(free.sum())) - P[np.ix_(free, free)]
        rhs = P[np.ix_(free, in_A)].sum(axis=1)
        h[free] = np.linalg.solve(M, rhs)
    escape = rates[in_A] @ (1.0 - h)
    return float(np.sum(space.mu[in_A] * escape))


def capacity_symmetry(space, A, B, operators=None):
    """Compare Cap(A,B) et Cap(B,A) (vérifié et reporté, jamais imposé)."""
    ops = _operators(space, operators)
    forward = forward_capacity(space, A, B, ops)
    backward = forward_capacity(space, B, A, ops)
    return {
        "cap_AB": forward,
        "cap_BA": backward,
        "relative_gap": abs(forward - backward) / max(forward, backward),
    }


def monotonicity_check(space, A, B, A2, B2, operators=None):
    """
    Vérifie Cap(A,B) ≤ Cap(A',B') pour A ⊂ A', B ⊂ B'.

    Tolérance relative ``MONOTONICITY_RTOL`` sur Cap(A',B').

    Raises:
        ZRPDomainError: Si une inclusion n'est pas satisfaite
        ZRPOverlapError: Si A' et B' se recouvrent
    """
    A, B = _disjoint_pair(space, A, B)
    A2, B2 = _disjoint_pair(space, A2, B2)
    if not np.all(np.isin(A, A2)) or not np.all(np.isin(B, B2)):
        raise ZRPDomainError(
            "Inclusions A ⊂ A' et B ⊂ B' non satisfaites",
            {"A_in_A2": bool(np.all(np.isin(A, A2))), "B_in_B2": bool(np.all(np.isin(B, B2)))}
        )
    ops = _operators(space, operators)
    small = forward_capacity(space, A, B, ops)
    large = forward_capacity(space, A2, B2, ops)
    return bool(small <= large * (1.0 + MONOTONICITY_RTOL))


# -----------------------------------------------------
#   FONCTIONNELLE DU TAUX MOYEN
# -----------------------------------------------------

def _other_wells(partition, x, y):
    return partition.union(z for z in range(partition.L) if z not in (x, y))


def mean_rate_functional(space, wells, x, y, f, operators=None, atol=1e-12):
    """
    𝔾^{x,y}(f): sup sur h constante libre sur 𝓔^x et 𝓔^y, nulle sur les autres puits.

    Args:
        space: StateSpace
        wells: WellPartition
        x, y: Sites distincts
        f: Fonction égale à 1 sur 𝓔^x, 0 sur ∪_{z≠x,y}𝓔^z, constante sur 𝓔^y

    Raises:
        ZRPDomainError: Si f ne satisfait pas ces conditions au bord
    """
    L = wells.L
    x, y = x % L, y % L
    if x == y:
        raise ZRPDomainError("Les sites x et y doivent être distincts", {"x": x, "y": y})
    f = space.check_vector(f, "f")
    Ex, Ey = wells.wells[x], wells.wells[y]
    rest = _other_wells(wells, x, y)
    violations = {}
    if Ex.size and np.max(np.abs(f[Ex] - 1.0)) > atol:
        violations["well_x"] = float(np.max(np.abs(f[Ex] - 1.0)))
    if rest.size and np.max(np.abs(f[rest])) > atol:
        violations["other_wells"] = float(np.max(np.abs(f[rest])))
    if Ey.size and np.ptp(f[Ey]) > atol:
        violations["well_y_spread"] = float(np.ptp(f[Ey]))
    if violations:
        raise ZRPDomainError("f ne satisfait pas les conditions au bord de 𝔾^{x,y}", violations)
    constraints = [(Ex, None), (Ey, None)]
    if rest.size:
        constraints.append((rest, 0.0))
    value, _ = sup_functional(space, f, constraints, operators)
    return value


def project_family(wells, x, y, Fx, Fy, beta):
    """f = F_x + βF_y ramenée à 1 sur 𝓔^x, β sur 𝓔^y, 0 sur les autres puits."""
    f = np.asarray(Fx, dtype=float) + beta * np.asarray(Fy, dtype=float)
    f[wells.wells[x]] = 1.0
    f[wells.wells[y]] = beta
    f[_other_wells(wells, x, y)] = 0.0
    return f


def mean_rate_scan(space, wells, x, y, Fx, Fy, operators=None, xatol=1e-4):
    """
    Minimise β ↦ 𝔾^{x,y}(F_x + βF_y) sur [0, 1] (recherche bornée de scipy).

    Returns:
        dict: ``beta`` (argmin), ``value``, ``scaled`` (N^{1+α}·value),
        ``evaluations``
    """
    ops = _operators(space, operators)

    def objective(beta):
        return mean_rate_functional(space, wells, x, y, project_family(wells, x, y, Fx, Fy, beta), ops)

    result = optimize.minimize_scalar(objective, bounds=(0.0, 1.0), method="bounded",
                                      options={"xatol": xatol})
    value = float(result.fun)
    logger.debug("mean_rate_scan: β*=%.4f valeur=%.6e", result.x, value)
    return {
        "beta": float(result.x),
        "value": value,
        "scaled": float(space.N ** (1.0 + space.alpha) * value),
        "evaluations": int(result.nfev),
    }
