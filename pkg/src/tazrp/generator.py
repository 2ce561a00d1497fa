"""
Générateurs creux 𝓛, 𝓛*, 𝓢 sur E_N, formes de Dirichlet et décomposition en cycles.

Convention: (𝓛F)(η) = Σ_x g(η_x) {F(σ^{x,x+1}η) − F(η)}; l'adjoint fait sauter
les particules vers x−1 et 𝓢 = (𝓛 + 𝓛*)/2. Tous les produits scalaires sont
pondérés par μ_N.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .configspace import Configuration, as_configuration, compositions, log_a
from .exceptions import ZRPDomainError
from .utils.serialization import csv_bytes, write_artifact

logger = logging.getLogger(__name__)

KINDS = ("forward", "adjoint", "symmetric")
OPERATOR_SCHEMA = "tazrp.operator/1"


# -----------------------------------------------------
#   TAUX DE SAUT
# -----------------------------------------------------

def jump_rate(k, alpha):
    """
    g(k) = a(k)/a(k−1): g(0)=0, g(1)=1, g(k)=(k/(k−1))^α.

    Raises:
        ZRPDomainError: Si k < 0
    """
    if k < 0:
        raise ZRPDomainError("Le nombre de particules doit être ≥ 0", {"k": k})
    if k == 0:
        return 0.0
    return float(np.exp(log_a(k, alpha) - log_a(k - 1, alpha)))


def jump_rates(occupations, alpha):
    """Version vectorisée de ``jump_rate`` (tableau d'occupations quelconque)."""
    occ = np.asarray(occupations)
    rates = np.exp(log_a(occ, alpha) - log_a(np.maximum(occ - 1, 0), alpha))
    return np.where(occ > 0, rates, 0.0)


# -----------------------------------------------------
#   OPÉRATEUR
# -----------------------------------------------------

class RateOperator:
    """
    Générateur creux d'un type donné, immuable après construction.

    Attributes:
        kind: "forward", "adjoint" ou "symmetric"
        matrix: Matrice CSR (|E_N|, |E_N|), diagonale −Σ_ξ r(η,ξ)
        space: StateSpace de référence
    """

    def __init__(self, kind, matrix, space):
        self.kind = kind
        self.matrix = matrix
        self.space = space

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def reversible(self):
        return self.space.reversible

    @property
    def off_diagonal(self):
        """Taux r(η,ξ) hors diagonale (CSR)."""
        off = self.matrix - sp.diags(self.matrix.diagonal())
        off.eliminate_zeros()
        return sp.csr_matrix(off)

    @property
    def exit_rates(self):
        """Taux de sortie |r(η,η)|."""
        return -self.matrix.diagonal()

    def apply(self, F):
        """
        Calcule 𝓛F (ou 𝓛*F, 𝓢F).

        Raises:
            ZRPDimensionError: Si F n'a pas la dimension |E_N|
        """
        F = self.space.check_vector(F)
        return self.matrix @ F

    def __matmul__(self, F):
        return self.apply(F)

    def row_sum_residual(self):
        """max_η |Σ_ξ Q(η,ξ)|, nul pour un générateur."""
        return float(np.max(np.abs(np.asarray(self.matrix.sum(axis=1)).ravel())))

    def stationarity_residual(self):
        """max_ξ |Σ_η μ(η) Q(η,ξ)|: écart à l'équilibre global de μ_N."""
        return float(np.max(np.abs(self.matrix.T @ self.space.mu)))

    def coo_rows(self):
        """Triplets (ligne, colonne, taux) hors diagonale, ordre ligne puis colonne."""
        off = self.off_diagonal.tocoo()
        order = np.lexsort((off.col, off.row))
        return zip(off.row[order].tolist(), off.col[order].tolist(), off.data[order].tolist())


def jump_edges(space, direction=+1):
    """Sauts σ^{x,x+direction}η de E_N: (ordinaux départ, ordinaux arrivée, taux g(η_x))."""
    occ = space.occupations
    L = space.L
    rows, cols, rates = [], [], []
    for x in range(L):
        movers = np.flatnonzero(occ[:, x] > 0)
        if len(movers) == 0:
            continue
        target = occ[movers].copy()
        target[:, x] -= 1
        target[:, (x + direction) % L] += 1
        rows.append(movers)
        cols.append(space.rank(target))
        rates.append(jump_rates(occ[movers, x], space.alpha))
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(rates)


def _assemble(space, entries):
    size = len(space)
    rows = np.concatenate([e[0] for e in entries])
    cols = np.concatenate([e[1] for e in entries])
    rates = np.concatenate([e[2] for e in entries])
    off = sp.coo_matrix((rates, (rows, cols)), shape=(size, size)).tocsr()
    off.sum_duplicates()
    exit_rates = np.asarray(off.sum(axis=1)).ravel()
    return sp.csr_matrix(off - sp.diags(exit_rates))


def build(space, kind="forward"):
    """
    Construit le générateur d'un type donné sur E_N.

    Args:
        space: StateSpace
        kind: "forward" (𝓛), "adjoint" (𝓛*) ou "symmetric" (𝓢)

    Returns:
        RateOperator

    Raises:
        ZRPDomainError: Si le type est inconnu
    """
    if kind not in KINDS:
        raise ZRPDomainError(
            f"Type de générateur inconnu: {kind}",
            {"kind": kind, "known": list(KINDS)}
        )
    if kind == "forward":
        entries = [jump_edges(space, +1)]
    elif kind == "adjoint":
        entries = [jump_edges(space, -1)]
    else:
        entries = []
        for direction in (+1, -1):
            rows, cols, rates = jump_edges(space, direction)
            entries.append((rows, cols, 0.5 * rates))
    matrix = _assemble(space, entries)
    if space.reversible:
        logger.info("L=2: le générateur %s est réversible (𝓛 = 𝓛*)", kind)
    logger.debug("générateur %s: |E_N|=%d nnz=%d", kind, len(space), matrix.nnz)
    return RateOperator(kind, matrix, space)


def build_all(space):
    """Dictionnaire {type: RateOperator} pour les trois types."""
    return {kind: build(space, kind) for kind in KINDS}


def apply(op, F):
    """Calcule op·F (voir ``RateOperator.apply``)."""
    return op.apply(F)


# -----------------------------------------------------
#   PRODUITS SCALAIRES ET FORMES DE DIRICHLET
# -----------------------------------------------------

def inner_product(space, F, G):
    """⟨F, G⟩_{μ_N}."""
    F = space.check_vector(F, "F")
    G = space.check_vector(G, "G")
    return float(np.sum(space.mu * F * G))


def dirichlet_form(space, F, symmetric=None):
    """
    D_N(F) = (1/2) Σ_η μ_N(η) Σ_x g(η_x) {F(σ^{x,x+1}η) − F(η)}².

    Si ``symmetric`` (opérateur 𝓢 déjà construit) est fourni, la valeur est
    calculée comme ⟨F, (−𝓢)F⟩_{μ_N}.

    Raises:
        ZRPDimensionError: Si F n'a pas la dimension |E_N|
    """
    F = space.check_vector(F)
    if symmetric is not None:
        return float(-np.sum(space.mu * F * symmetric.apply(F)))
    rows, cols, rates = jump_edges(space, +1)
    return 0.5 * float(np.sum(space.mu[rows] * rates * (F[cols] - F[rows]) ** 2))


def sector_ratio(space, F, H, forward=None, symmetric=None):
    """⟨𝓛F, H⟩²_{μ_N} / (D_N(F)·D_N(H)); nan si une forme est nulle."""
    forward = forward or build(space, "forward")
    symmetric = symmetric or build(space, "symmetric")
    numerator = inner_product(space, forward.apply(F), H) ** 2
    denominator = dirichlet_form(space, F, symmetric) * dirichlet_form(space, H, symmetric)
    if denominator <= 0:
        return float("nan")
    return numerator / denominator


def sector_condition_scan(space, samples=100, seed=0):
    """
    Vérifie ⟨𝓛F,H⟩² ≤ 4L²·D_N(F)·D_N(H) sur des couples aléatoires gaussiens.

    Returns:
        dict: ``worst_ratio`` (max du quotient), ``bound`` (4L²), ``ok``, ``samples``
    """
    rng = np.random.default_rng(seed)
    forward = build(space, "forward")
    symmetric = build(space, "symmetric")
    worst = 0.0
    for _ in range(samples):
        F = rng.standard_normal(len(space))
        H = rng.standard_normal(len(space))
        ratio = sector_ratio(space, F, H, forward, symmetric)
        if np.isfinite(ratio):
            worst = max(worst, ratio)
    bound = 4.0 * space.L ** 2
    logger.debug("condition de secteur: pire quotient %.4g (borne %.4g)", worst, bound)
    return {"worst_ratio": worst, "bound": bound, "ok": worst <= bound, "samples": samples}


# -----------------------------------------------------
#   DÉCOMPOSITION EN CYCLES
# -----------------------------------------------------

@dataclass(frozen=True)
class CycleGenerator:
    """
    Générateur 𝓛_ξ du cycle ξ+𝔡_0 → ξ+𝔡_1 → … → ξ+𝔡_{L−1} → ξ+𝔡_0.

    Attributes:
        xi: Configuration de E_{N−1}
        ordinals: Ordinaux des L états ξ+𝔡_z, z ∈ T_L
        rates: Taux g(ξ_z+1) du saut ξ+𝔡_z → ξ+𝔡_{z+1}
    """
    xi: Configuration
    ordinals: np.ndarray
    rates: np.ndarray

    def matrix(self, size):
        """Matrice creuse (size, size) de 𝓛_ξ."""
        rows = np.concatenate([self.ordinals, self.ordinals])
        cols = np.concatenate([np.roll(self.ordinals, -1), self.ordinals])
        data = np.concatenate([self.rates, -self.rates])
        return sp.csr_matrix((data, (rows, cols)), shape=(size, size))


def _cycle_members(space, xi_occupations):
    L = space.L
    members = []
    for z in range(L):
        occ = xi_occupations.copy()
        occ[:, z] += 1
        members.append(space.rank(occ))
    return np.stack(members, axis=1)


def cycle_operator(space, xi):
    """
    Cycle 𝓛_ξ d'une configuration ξ ∈ E_{N−1}.

    Raises:
        ZRPDomainError: Si ξ n'a pas L sites et N−1 particules
    """
    xi = as_configuration(xi, L=space.L, N=space.N - 1)
    occ = np.array([xi.occupations], dtype=np.int64)
    ordinals = _cycle_members(space, occ)[0]
    rates = jump_rates(occ[0] + 1, space.alpha)
    return CycleGenerator(xi=xi, ordinals=ordinals, rates=rates)


def cycle_generators(space):
    """Itère sur les cycles 𝓛_ξ, ξ ∈ E_{N−1} dans l'ordre lexicographique."""
    xis = compositions(space.L, space.N - 1)
    members = _cycle_members(space, xis)
    rates = jump_rates(xis + 1, space.alpha)
    for i in range(xis.shape[0]):
        yield CycleGenerator(
            xi=Configuration(tuple(int(v) for v in xis[i])),
            ordinals=members[i],
            rates=rates[i],
        )


def cycle_form(space, xi, F):
    """
    D_ξ(F) = (N^α / 2Z_N)·(1/a(ξ))·Σ_x {F(ξ+𝔡_{x+1}) − F(ξ+𝔡_x)}².

    La somme sur ξ ∈ E_{N−1} vaut D_N(F).

    Raises:
        ZRPDomainError: Si ξ n'a pas N−1 particules
        ZRPDimensionError: Si F n'a pas la dimension |E_N|
    """
    F = space.check_vector(F)
    cycle = cycle_operator(space, xi)
    values = F[cycle.ordinals]
    squares = float(np.sum((np.roll(values, -1) - values) ** 2))
    log_weight = space.alpha * np.log(space.N) - float(np.sum(log_a(np.array(cycle.xi.occupations), space.alpha)))
    return 0.5 * float(np.exp(log_weight)) / space.Z * squares


def cycle_sum(space):
    """Σ_ξ 𝓛_ξ sous forme CSR (égal à 𝓛 à l'arrondi près)."""
    size = len(space)
    xis = compositions(space.L, space.N - 1)
    members = _cycle_members(space, xis)
    rates = jump_rates(xis + 1, space.alpha)
    rows = np.concatenate([members.ravel(), members.ravel()])
    cols = np.concatenate([np.roll(members, -1, axis=1).ravel(), members.ravel()])
    data = np.concatenate([rates.ravel(), -rates.ravel()])
    return sp.csr_matrix((data, (rows, cols)), shape=(size, size))


# -----------------------------------------------------
#   EXPORT
# -----------------------------------------------------

def dump_coo_csv(op, path=None):
    """
    Exporte les taux hors diagonale en triplets CSV (row, col, rate).

    Args:
        op: RateOperator
        path: Fichier de sortie (optionnel, ``.zst`` pour compresser)

    Returns:
        bytes: Le document CSV (non compressé)
    """
    data = csv_bytes(["row", "col", "rate"], op.coo_rows(), schema=OPERATOR_SCHEMA)
    if path is not None:
        write_artifact(path, data)
    return data
