"""
Constantes limites, taux moyens du processus trace et diagnostics de métastabilité.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .configspace import (
    EllRule,
    enlarged_wells,
    enumerate_space,
    gamma_alpha,
    growth_exponent,
    partition_wells,
    well_mass_report,
)
from .exceptions import ZRPDomainError, ZRPError
from .generator import build_all, jump_edges
from .potential import (
    capacity,
    forward_capacity,
    mean_rate_scan,
    symmetric_capacity,
    symmetric_walk_capacity,
    sup_functional,
)
from .config import get_settings
from .utils.solvers import solve_linear

logger = logging.getLogger(__name__)

TRACE_SCHEMA = "tazrp.trace/1"
SWEEP_SCHEMA = "tazrp.sweep/1"
IDENTITY_RTOL = 1e-8
ROTATION_RTOL = 1e-10


# -----------------------------------------------------
#   CONSTANTES LIMITES
# -----------------------------------------------------

def i_alpha(alpha):
    """
    I_α = ∫₀¹ u^α(1−u)^α du = B(α+1, α+1).

    Raises:
        ZRPDomainError: Si α ≤ 0
    """
    if not alpha > 0:
        raise ZRPDomainError("α doit être strictement positif", {"alpha": alpha})
    return float(special.beta(alpha + 1.0, alpha + 1.0))


@dataclass(frozen=True)
class LimitConstants:
    alpha: float
    gamma_alpha: float
    i_alpha: float
    hop_rate: float

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "gamma_alpha": self.gamma_alpha,
            "i_alpha": self.i_alpha,
            "hop_rate": self.hop_rate,
        }


def limit_constants(alpha):
    """
    Γ(α), I_α et le taux de saut limite 1/(Γ(α)·I_α).

    Raises:
        ZRPDivergenceError: Si α ≤ 1
    """
    gamma = gamma_alpha(alpha)
    ia = i_alpha(alpha)
    return LimitConstants(alpha=float(alpha), gamma_alpha=gamma, i_alpha=ia,
                          hop_rate=1.0 / (gamma * ia))


def _site_set(L, A):
    sites = sorted({int(x) % L for x in A})
    if not sites or len(sites) == L:
        raise ZRPDomainError(
            "A doit être une partie non vide et propre de T_L",
            {"A": list(A), "L": L}
        )
    return sites


def theorem1_prediction(L, alpha, A):
    """
    lim N^{1+α}·Cap_N(𝓔_N(A), 𝓔_N(A^c)) = |A|(L−|A|)/(L·Γ(α)·I_α).

    Raises:
        ZRPDomainError: Si A est vide ou égal à T_L
    """
    sites = _site_set(L, A)
    k = len(sites)
    return k * (L - k) / L * limit_constants(alpha).hop_rate


def reversible_limit(L, alpha, A):
    """
    𝓒_α(A,A^c) = (1/(Γ(α)I_α))·Σ_{x∈A, y∉A} Cap^s(x,y).

    Cap^s est la capacité de la marche symétrique de taux 1/2 sur T_L.
    """
    sites = _site_set(L, A)
    others = [y for y in range(L) if y not in sites]
    total = math.fsum(symmetric_walk_capacity(L, x, y) for x in sites for y in others)
    return limit_constants(alpha).hop_rate * total


def mean_rate_limit(L, alpha, gamma=None):
    """
    lim N^{1+α} inf 𝔾^{x,y} pour f valant γ sur 𝓔^y:
    (1/(Γ(α)I_α L))·{(L−1)(1+γ²) − 2γ}, minimal en γ = 1/(L−1).
    """
    if L < 2:
        raise ZRPDomainError("L doit être ≥ 2", {"L": L})
    if gamma is None:
        gamma = 1.0 / (L - 1)
    return limit_constants(alpha).hop_rate / L * ((L - 1) * (1 + gamma ** 2) - 2 * gamma)


@dataclass(frozen=True)
class LimitWalk:
    """Marche limite 𝔏: taux 1/(Γ(α)I_α) vers chacun des L−1 autres sites."""
    L: int
    rate: float

    @property
    def generator(self):
        G = np.full((self.L, self.L), self.rate)
        np.fill_diagonal(G, -(self.L - 1) * self.rate)
        return G

    @property
    def exit_rate(self):
        return (self.L - 1) * self.rate

    @property
    def jump_distribution(self):
        return np.full(self.L - 1, 1.0 / (self.L - 1))


def limit_walk(L, alpha):
    if L < 2:
        raise ZRPDomainError("L doit être ≥ 2", {"L": L})
    return LimitWalk(L=L, rate=limit_constants(alpha).hop_rate)


def discrete_ialpha(N, alpha):
    """
    N^{−(2α+1)}·Σ_{i=1}^{N−1} i^α (N−i)^α, somme de Riemann de I_α.

    Raises:
        ZRPDomainError: Si N < 2
    """
    if N < 2:
        raise ZRPDomainError("N doit être ≥ 2", {"N": N})
    i = np.arange(1, N, dtype=float)
    log_terms = alpha * (np.log(i) + np.log(N - i)) - (2 * alpha + 1) * math.log(N)
    return math.fsum(np.exp(log_terms))


# -----------------------------------------------------
#   TAUX MOYENS DU PROCESSUS TRACE
# -----------------------------------------------------

@dataclass
class TraceRateTable:
    """
    Taux moyens r_N(𝓔^x, 𝓔^y) du processus trace sur les puits.

    Attributes:
        rates: Matrice L×L, diagonale nulle
        exit_rates: Σ_{y≠x} r_N(𝓔^x, 𝓔^y)
        well_masses: μ_N(𝓔^x)
        exit_capacities: Cap_N(𝓔^x, 𝓔̆^x) (route Dirichlet indépendante), ou None
    """
    L: int
    N: int
    alpha: float
    ellN: int
    rates: np.ndarray
    exit_rates: np.ndarray
    well_masses: np.ndarray
    exit_capacities: Optional[np.ndarray] = None

    @property
    def scaled(self):
        """N^{1+α}·r_N."""
        return self.N ** (1.0 + self.alpha) * self.rates

    @property
    def split_ratios(self):
        """r_N(𝓔^x,𝓔^y)/r_N(𝓔^x,𝓔̆^x), limite 1/(L−1)."""
        return self.rates / self.exit_rates[:, None]

    def row(self, x):
        """Loi du prochain puits visité depuis 𝓔^x."""
        return self.split_ratios[x]

    @property
    def rotation_residual(self):
        """Écart relatif max entre r_N(𝓔^x,𝓔^{x+d}) pour x ∈ T_L, d fixé."""
        worst = 0.0
        for d in range(1, self.L):
            band = np.array([self.rates[x, (x + d) % self.L] for x in range(self.L)])
            worst = max(worst, float(np.ptp(band) / np.mean(band)))
        return worst

    @property
    def rotation_invariant(self):
        return self.rotation_residual <= ROTATION_RTOL

    @property
    def identity_residuals(self):
        """|r_N(𝓔^x,𝓔̆^x)·μ_N(𝓔^x) − Cap_N(𝓔^x,𝓔̆^x)| / Cap_N, par site."""
        if self.exit_capacities is None:
            return None
        return np.abs(self.exit_rates * self.well_masses - self.exit_capacities) / self.exit_capacities

    @property
    def identity_ok(self):
        residuals = self.identity_residuals
        return None if residuals is None else bool(np.max(residuals) <= IDENTITY_RTOL)

    def to_dict(self):
        hop = limit_constants(self.alpha).hop_rate
        out = {
            "schema": TRACE_SCHEMA,
            "L": self.L,
            "N": self.N,
            "alpha": self.alpha,
            "ellN": self.ellN,
            "rates": self.rates,
            "exit_rates": self.exit_rates,
            "well_masses": self.well_masses,
            "scaled_rates": self.scaled,
            "hop_rate": hop,
            "scaled_over_hop": self.scaled / hop,
            "split_ratios": self.split_ratios,
            "rotation_residual": self.rotation_residual,
            "rotation_invariant": self.rotation_invariant,
        }
        if self.exit_capacities is not None:
            out["exit_capacities"] = self.exit_capacities
            out["identity_residuals"] = self.identity_residuals
            out["identity_ok"] = self.identity_ok
        return out


def hitting_distribution(space, wells, forward):
    """
    u_y(ζ) = P_ζ[première visite de 𝓔 dans 𝓔^y], pour chaque y.

    Returns:
        np.ndarray: Tableau (L, |E_N|): indicatrice de 𝓔^y sur les puits,
        u_y sur Δ_N
    """
    L = wells.L
    out = np.zeros((L, len(space)))
    delta = wells.delta
    Q = forward.matrix
    if delta.size:
        Q_delta = Q[delta]
        Q_dd = Q_delta[:, delta]
    for y in range(L):
        out[y, wells.wells[y]] = 1.0
        if delta.size:
            rhs = -np.asarray(Q_delta[:, wells.wells[y]].sum(axis=1)).ravel()
            out[y, delta] = solve_linear(Q_dd, rhs)
    return out


def trace_mean_rates(space, wells, operators=None, check_identity=True):
    """
    Taux moyens du processus trace sur 𝓔_N = ∪_x 𝓔^x_N.

    R^𝓔(η,𝓔^y) = Σ_ξ r(η,ξ)·[1{ξ∈𝓔^y} + 1{ξ∈Δ}·u_y(ξ)], puis moyenne
    pondérée par μ_N sur 𝓔^x.

    Args:
        space: StateSpace
        wells: WellPartition
        operators: Dictionnaire {type: RateOperator} (optionnel)
        check_identity: Calcule Cap_N(𝓔^x, 𝓔̆^x) par la route Dirichlet

    Returns:
        TraceRateTable

    Raises:
        ZRPSolverError: Si un problème absorbant échoue
    """
    ops = operators or build_all(space)
    forward = ops["forward"]
    off = forward.off_diagonal
    targets = hitting_distribution(space, wells, forward)
    L = wells.L
    masses = np.array([float(math.fsum(space.mu[w])) for w in wells.wells])
    rates = np.zeros((L, L))
    for y in range(L):
        flux = space.mu * (off @ targets[y])
        for x in range(L):
            if x != y:
                rates[x, y] = math.fsum(flux[wells.wells[x]]) / masses[x]
    exit_rates = rates.sum(axis=1)

    capacities = None
    if check_identity:
        capacities = np.array([
            forward_capacity(space, wells.wells[x], wells.complement_union(x), ops)
            for x in range(L)
        ])
    table = TraceRateTable(L=L, N=space.N, alpha=space.alpha, ellN=wells.ellN,
                           rates=rates, exit_rates=exit_rates, well_masses=masses,
                           exit_capacities=capacities)
    logger.debug("trace: rotation=%.2e identité=%s", table.rotation_residual, table.identity_ok)
    return table


# -----------------------------------------------------
#   CONDITIONS (H0), (H1), (H2)
# -----------------------------------------------------

def condensate_state(space, x):
    """Ordinal de ξ^x_N (toutes les particules en x)."""
    occ = [0] * space.L
    occ[x % space.L] = space.N
    return space.index_of(occ)


def spread_boundary_state(space, x, ellN):
    """Configuration de 𝓔^x avec ℓ_N particules réparties au mieux hors de x."""
    L = space.L
    occ = [0] * L
    occ[x % L] = space.N - ellN
    others = [(x + k) % L for k in range(1, L)]
    for j in range(ellN):
        occ[others[j % (L - 1)]] += 1
    return space.index_of(occ)


def h_conditions_report(space, wells, operators=None, table=None, site=0):
    """
    Diagnostics (H0), (H1), (H2) pour le site ``site``.

    (H1) est majoré par sup_η 4L²·Cap^s(𝓔^x,𝓔̆^x)/Cap^s(η,ξ^x); le calcul est
    exact pour |𝓔^x| ≤ ``h1_exact_max``, sinon le pire η est estimé par la
    configuration de bord la plus étalée.
    """
    ops = operators or build_all(space)
    symmetric = ops["symmetric"]
    x = site % space.L
    table = table or trace_mean_rates(space, wells, ops, check_identity=False)
    hop = limit_constants(space.alpha).hop_rate

    masses = well_mass_report(space, wells)
    h2 = masses["delta_mass"] / masses["well_masses"][x]

    well = wells.wells[x]
    xi = condensate_state(space, x)
    exit_cap_sym = symmetric_capacity(space, well, wells.complement_union(x), symmetric)
    if len(well) <= get_settings().h1_exact_max:
        candidates = [int(i) for i in well if i != xi]
        method = "exact"
    else:
        candidates = [spread_boundary_state(space, x, wells.ellN)]
        method = "estimate"

    worst, worst_cap = None, math.inf
    for eta in candidates:
        value = symmetric_capacity(space, [eta], [xi], symmetric)
        if value < worst_cap:
            worst, worst_cap = eta, value
    bound = 4.0 * space.L ** 2
    h1 = {
        "site": x,
        "method": method,
        "checked_states": len(candidates),
        "cap_sym_exit": exit_cap_sym,
        "growth_ratio": wells.ellN ** ((space.L - 1) * space.alpha + 1) / space.N ** (1 + space.alpha),
        "gamma": growth_exponent(space.L, space.alpha),
    }
    if worst is not None:
        h1.update({
            "worst_state": list(space.state(worst).occupations),
            "worst_cap_sym": worst_cap,
            "worst_mu": float(space.mu[worst]),
            "worst_exit_rate": float(symmetric.exit_rates[worst]),
            "sup_ratio_bound": bound * exit_cap_sym / worst_cap,
        })

    h0 = {
        "scaled_rates": table.scaled,
        "hop_rate": hop,
        "scaled_over_hop": table.scaled / hop,
    }
    return {
        "L": space.L,
        "N": space.N,
        "alpha": space.alpha,
        "ellN": wells.ellN,
        "H0": h0,
        "H1": h1,
        "H2": {"ratio": h2, "delta_mass": masses["delta_mass"], "well_masses": masses["well_masses"]},
    }


# -----------------------------------------------------
#   FONCTIONS TEST ET MAJORANTS VARIATIONNELS
# -----------------------------------------------------

def _check_epsilon(epsilon):
    if not 0 < epsilon < 1.0 / 6.0:
        raise ZRPDomainError(
            "ε doit être dans ]0, 1/6[ (φ nulle sur [0,3ε] et φ(t)+φ(1−t)=1)",
            {"epsilon": epsilon}
        )


def cutoff(t, epsilon):
    """
    φ(t): rampe polynomiale C² 6s⁵−15s⁴+10s³, s = (t−3ε)/(1−6ε) tronqué à [0,1].

    Vérifie φ ≡ 0 sur [0,3ε], φ ≡ 1 sur [1−3ε,1] et φ(t)+φ(1−t) = 1.
    """
    _check_epsilon(epsilon)
    s = np.clip((np.asarray(t, dtype=float) - 3 * epsilon) / (1 - 6 * epsilon), 0.0, 1.0)
    return s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)


def profile(t, alpha, epsilon):
    """𝕎(t) = (1/I_α)∫₀^{φ(t)} u^α(1−u)^α du (bêta incomplète régularisée)."""
    return special.betainc(alpha + 1.0, alpha + 1.0, cutoff(t, epsilon))


def lipschitz_constant(alpha, epsilon):
    """
    C_ε tel que |F_x(σ^{z,z+1}η) − F_x(η)| ≤ C_ε/N.

    max(φ'_max·4^{−α}/I_α, 1/ε), avec φ'_max = 1.875/(1−6ε).
    """
    _check_epsilon(epsilon)
    slope = 1.875 / (1 - 6 * epsilon)
    return max(slope * 4.0 ** (-alpha) / i_alpha(alpha), 1.0 / epsilon)


def test_function(space, x, epsilon):
    """
    F_x(η) = W_x(η/N).

    W_x(u) = min{ (1/2)[𝕎(u_x) + 1 − 𝕎(max_{y≠x} u_y)], clip((u_x−ε)/ε, 0, 1) }:
    prolongement lipschitzien explicite qui coïncide avec (1/2)[𝕎(u_x)+1−𝕎(u_y)]
    sur {u_x+u_y ≥ 1−ε} et avec 0 sur {u_x ≤ ε}.
    """
    _check_epsilon(epsilon)
    u = space.occupations / float(space.N)
    x = x % space.L
    ux = u[:, x]
    others = np.delete(u, x, axis=1).max(axis=1)
    glued = 0.5 * (profile(ux, space.alpha, epsilon) + 1.0 - profile(others, space.alpha, epsilon))
    ramp = np.clip((ux - epsilon) / epsilon, 0.0, 1.0)
    return np.minimum(glued, ramp)


def test_function_set(space, A, epsilon):
    """F_A = Σ_{x∈A} F_x."""
    sites = _site_set(space.L, A)
    return np.sum([test_function(space, x, epsilon) for x in sites], axis=0)


def max_jump_increment(space, F):
    """max_{η,z} |F(σ^{z,z+1}η) − F(η)| sur toutes les transitions de E_N."""
    F = space.check_vector(F)
    rows, cols, _ = jump_edges(space, +1)
    return float(np.max(np.abs(F[cols] - F[rows])))


def test_function_bound(space, wells, A, epsilon, enlarged=False, operators=None):
    """
    Majorant de Cap_N(𝓔_N(A), 𝓔_N(A^c)) par évaluation de la formule inf-sup en F_A.

    F_A est ramenée à 1 sur les puits de A et à 0 sur ceux de A^c, puis le sup
    est pris sur H constante sur chacun des deux ensembles. Avec
    ``enlarged=True`` les puits élargis 𝓓^x_N (seuil 3ℓ_N) sont utilisés: le
    résultat majore Cap_N(𝓓_N(A), 𝓓_N(A^c)) ≥ Cap_N(𝓔_N(A), 𝓔_N(A^c)).

    Raises:
        ZRPDomainError: Si ε n'est pas dans ]0, 1/6[ ou si A est invalide
    """
    sites = _site_set(space.L, A)
    complement = [y for y in range(space.L) if y not in sites]
    partition = enlarged_wells(space, wells) if enlarged else wells
    inside = partition.union(sites)
    outside = partition.union(complement)
    F = test_function_set(space, sites, epsilon)
    F[inside] = 1.0
    F[outside] = 0.0
    value, _ = sup_functional(space, F, [(inside, None), (outside, None)], operators)
    return value


def mean_rate_infimum(space, wells, x, y, epsilon=0.1, operators=None):
    """inf_β 𝔾^{x,y}(F_x + βF_y), avec la limite théorique en regard."""
    Fx = test_function(space, x, epsilon)
    Fy = test_function(space, y, epsilon)
    result = mean_rate_scan(space, wells, x, y, Fx, Fy, operators)
    result["limit"] = mean_rate_limit(space.L, space.alpha)
    result["limit_beta"] = 1.0 / (space.L - 1)
    return result


# -----------------------------------------------------
#   TABLE DE CONVERGENCE
# -----------------------------------------------------

def convergence_row(L, alpha, A, N, rule_text, epsilon=None):
    """
    Une ligne de la table de convergence; l'échec est enregistré dans ``error``.
    """
    row = {"N": N}
    try:
        rule = EllRule.parse(rule_text)
        ellN = rule(N, L, alpha)
        space = enumerate_space(L, N, alpha)
        wells = partition_wells(space, ellN)
        sites = _site_set(L, A)
        complement = [y for y in range(L) if y not in sites]
        ops = build_all(space)
        report = capacity(space, wells.union(sites), wells.union(complement),
                          ellN=ellN, labels=(sites, complement), operators=ops)
        prediction = theorem1_prediction(L, alpha, sites)
        scaled = report.scaled(report.cap)
        scaled_sym = report.scaled(report.cap_sym)
        row.update({
            "ellN": ellN,
            "cardinality": len(space),
            "scaled_cap": scaled,
            "scaled_cap_sym": scaled_sym,
            "prediction": prediction,
            "ratio": scaled / prediction,
            "ratio_sym": scaled_sym / prediction,
            "reversible_limit": reversible_limit(L, alpha, sites),
            "discrete_ialpha": discrete_ialpha(N, alpha),
            "i_alpha": i_alpha(alpha),
            "sandwich_ok": report.sandwich_ok,
            "infsup_ok": report.infsup_ok,
        })
        if epsilon is not None:
            bound = test_function_bound(space, wells, sites, epsilon, operators=ops)
            row["scaled_test_bound"] = report.scaled(bound)
        row["error"] = None
    except ZRPError as e:
        logger.warning("ligne N=%d en échec: %s", N, e)
        row["error"] = str(e)
    return row


def convergence_table(L, alpha, A, N_list, rule="default", epsilon=None, workers=1):
    """
    Table (N, capacités normalisées, prédiction, rapports) pour une suite de N.

    L'ordre des lignes suit ``N_list`` quel que soit l'ordre de terminaison.
    """
    EllRule.parse(rule)
    _site_set(L, A)
    args = [(L, alpha, tuple(A), N, rule, epsilon) for N in N_list]
    if workers and workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(convergence_row, *zip(*args)))
    else:
        rows = [convergence_row(*a) for a in args]
    return rows


def trend(values):
    """'decreasing', 'increasing', 'constant' ou 'mixed' (valeurs None ignorées)."""
    values = [v for v in values if v is not None]
    if len(values) < 2:
        return "constant"
    steps = np.diff(values)
    if np.all(steps == 0):
        return "constant"
    if np.all(steps <= 0):
        return "decreasing"
    if np.all(steps >= 0):
        return "increasing"
    return "mixed"
