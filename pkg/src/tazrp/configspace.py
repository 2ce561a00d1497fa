"""
Espace des configurations E_N, mesure stationnaire μ_N et puits métastables.

Les configurations sont rangées dans l'ordre lexicographique croissant des
vecteurs d'occupation; l'indice d'une configuration est calculé par le rang
lexicographique de sa représentation « étoiles et barres ».
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import special

from .config import get_settings
from .exceptions import (
    ZRPDimensionError,
    ZRPDivergenceError,
    ZRPDomainError,
    ZRPOverlapError,
    ZRPSizeError,
)

logger = logging.getLogger(__name__)

SUMMARY_SCHEMA = "tazrp.statespace/1"


# -----------------------------------------------------
#   CONFIGURATION
# -----------------------------------------------------

@dataclass(frozen=True)
class Configuration:
    """Vecteur d'occupation η sur le tore T_L (η_x particules au site x)."""
    occupations: tuple

    def __post_init__(self):
        occ = tuple(int(v) for v in self.occupations)
        if len(occ) < 2:
            raise ZRPDomainError(
                "Une configuration doit avoir au moins 2 sites",
                {"L": len(occ)}
            )
        if any(v < 0 for v in occ):
            raise ZRPDomainError(
                "Les occupations doivent être positives ou nulles",
                {"occupations": occ}
            )
        object.__setattr__(self, "occupations", occ)

    @property
    def L(self):
        return len(self.occupations)

    @property
    def N(self):
        return sum(self.occupations)

    def __len__(self):
        return len(self.occupations)

    def __iter__(self):
        return iter(self.occupations)

    def __getitem__(self, x):
        return self.occupations[x % self.L]

    def move(self, x, y):
        """Retourne σ^{x,y}η: une particule passe du site x au site y."""
        L = self.L
        x, y = x % L, y % L
        if self.occupations[x] == 0:
            raise ZRPDomainError(
                "Le site de départ est vide",
                {"x": x, "occupations": self.occupations}
            )
        occ = list(self.occupations)
        occ[x] -= 1
        occ[y] += 1
        return Configuration(tuple(occ))

    def plus_particle(self, z):
        """Retourne η + 𝔡_z."""
        occ = list(self.occupations)
        occ[z % self.L] += 1
        return Configuration(tuple(occ))


def as_configuration(config, L=None, N=None):
    """
    Convertit une séquence en Configuration en vérifiant L et N.

    Raises:
        ZRPDomainError: Si la longueur ou le nombre de particules ne correspond pas
    """
    if not isinstance(config, Configuration):
        config = Configuration(tuple(config))
    if L is not None and config.L != L:
        raise ZRPDomainError(
            "Nombre de sites incorrect",
            {"expected": L, "actual": config.L}
        )
    if N is not None and config.N != N:
        raise ZRPDomainError(
            "Nombre de particules incorrect",
            {"expected": N, "actual": config.N}
        )
    return config


# -----------------------------------------------------
#   POIDS a(n) ET CONSTANTES
# -----------------------------------------------------

def log_a(n, alpha):
    """log a(n) avec a(0)=1 et a(n)=n^α (vectorisé)."""
    n = np.asarray(n, dtype=float)
    return alpha * np.log(np.maximum(n, 1.0))


def gamma_alpha(alpha):
    """
    Γ(α) = Σ_{j≥0} 1/a(j) = 1 + ζ(α).

    Raises:
        ZRPDivergenceError: Si α ≤ 1
    """
    if alpha <= 1:
        raise ZRPDivergenceError(
            "La série Γ(α) diverge pour α ≤ 1",
            {"alpha": alpha}
        )
    return 1.0 + float(special.zeta(alpha, 1))


def gamma_series(alpha, terms=None):
    """
    Γ(α) par somme partielle jusqu'à ``terms`` plus la queue d'Euler-Maclaurin.

    La queue Σ_{j>J} j^{-α} est approchée par ∫_{J+1/2}^∞ x^{-α} dx, d'erreur
    O(J^{-α-2}).

    Raises:
        ZRPDivergenceError: Si α ≤ 1
    """
    if alpha <= 1:
        raise ZRPDivergenceError(
            "La série Γ(α) diverge pour α ≤ 1",
            {"alpha": alpha}
        )
    J = int(terms or get_settings().gamma_series_terms)
    j = np.arange(J, 0, -1, dtype=float)
    partial = float(np.sum(j ** (-alpha)))
    tail = (J + 0.5) ** (1.0 - alpha) / (alpha - 1.0)
    return 1.0 + partial + tail


def z_limit(L, alpha):
    """
    Limite de Z_N: L·Γ(α)^{L−1}.

    Raises:
        ZRPDomainError: Si L < 1
        ZRPDivergenceError: Si α ≤ 1
    """
    if L < 1:
        raise ZRPDomainError("L doit être ≥ 1", {"L": L})
    return L * gamma_alpha(alpha) ** (L - 1)


def grand_canonical_partition(phi, alpha, terms=None):
    """
    Z(φ) = Σ_{n≥0} φⁿ/a(n), rayon de convergence 1.

    Raises:
        ZRPDivergenceError: Si φ > 1, ou φ = 1 avec α ≤ 1
    """
    if phi < 0:
        raise ZRPDomainError("φ doit être positif", {"phi": phi})
    if phi > 1 or (phi == 1 and alpha <= 1):
        raise ZRPDivergenceError(
            "Z(φ) diverge",
            {"phi": phi, "alpha": alpha}
        )
    if phi == 1:
        return gamma_alpha(alpha)
    J = int(terms or get_settings().gamma_series_terms)
    n = np.arange(J + 1, dtype=float)
    log_terms = np.where(n > 0, n * np.log(phi) if phi > 0 else -np.inf, 0.0) - log_a(n, alpha)
    return float(np.sum(np.exp(log_terms[::-1])))


def critical_density(alpha):
    """
    Densité critique R(1) = Σ n/a(n) / Σ 1/a(n) = ζ(α−1)/(1+ζ(α)).

    Au-delà de cette densité les particules en excès forment un condensat.

    Raises:
        ZRPDivergenceError: Si α ≤ 2 (R(φ) non bornée)
    """
    if alpha <= 2:
        raise ZRPDivergenceError(
            "La densité critique est infinie pour α ≤ 2",
            {"alpha": alpha}
        )
    return float(special.zeta(alpha - 1, 1)) / gamma_alpha(alpha)


# -----------------------------------------------------
#   ESPACE D'ÉTATS
# -----------------------------------------------------

def cardinality(L, N):
    """|E_N| = binomial(N+L−1, L−1)."""
    return math.comb(N + L - 1, L - 1)


def _validate_parameters(L, N, alpha):
    if L < 2:
        raise ZRPDomainError("Le tore doit avoir au moins 2 sites", {"L": L})
    if N < 1:
        raise ZRPDomainError("Il faut au moins une particule", {"N": N})
    if not alpha > 0:
        raise ZRPDomainError("α doit être strictement positif", {"alpha": alpha})


def compositions(L, n):
    """
    Toutes les répartitions de n particules sur L sites, ordre lexicographique.

    Accepte n = 0 (utile pour E_{N−1} quand N = 1).

    Returns:
        np.ndarray: Tableau (binomial(n+L−1, L−1), L) d'entiers
    """
    n_slots = n + L - 1
    k = L - 1
    size = math.comb(n_slots, k)
    flat = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(n_slots), k)),
        dtype=np.int64,
        count=size * k,
    )
    bars = flat.reshape(size, k)
    left = np.full((size, 1), -1, dtype=np.int64)
    right = np.full((size, 1), n_slots, dtype=np.int64)
    return np.diff(np.hstack([left, bars, right]), axis=1) - 1


class StateSpace:
    """
    Énumération indexée de E_N avec poids stationnaires.

    Immuable après construction: les tableaux exposés sont en lecture seule.

    Attributes:
        L, N, alpha: Paramètres du modèle
        occupations: Tableau (|E_N|, L) des configurations, ordre lexicographique
        log_weights: log(1/a(η))
        weights: 1/a(η) (non normalisés)
        Z: Constante de normalisation Z_N = N^α Σ 1/a(ζ)
        mu: Probabilités μ_N(η)
    """

    def __init__(self, L, N, alpha, occupations):
        self.L = int(L)
        self.N = int(N)
        self.alpha = float(alpha)
        self.occupations = occupations
        self.log_weights = -np.sum(log_a(occupations, self.alpha), axis=1)
        log_total = float(special.logsumexp(self.log_weights))
        self.weights = np.exp(self.log_weights)
        self.Z = float(np.exp(self.alpha * math.log(self.N) + log_total))
        self.mu = np.exp(self.log_weights - log_total)
        self.mu /= math.fsum(self.mu)

        n_slots = self.N + self.L - 1
        k = self.L - 1
        table = np.zeros((n_slots + 1, k + 2), dtype=np.int64)
        for n in range(n_slots + 1):
            for j in range(k + 2):
                table[n, j] = math.comb(n, j)
        self._comb = table
        self._n_slots = n_slots

        for arr in (self.occupations, self.log_weights, self.weights, self.mu):
            arr.setflags(write=False)
        if self.L == 2:
            logger.info("L=2: sauts à droite et à gauche coïncident, dynamique réversible")

    # --- accès ---------------------------------------------------------

    def __len__(self):
        return self.occupations.shape[0]

    @property
    def size(self):
        return len(self)

    @property
    def reversible(self):
        """Vrai si L=2: les dynamiques directe et adjointe coïncident."""
        return self.L == 2

    @property
    def states(self):
        """Liste ordonnée des configurations (construite à la demande)."""
        return [Configuration(tuple(int(v) for v in row)) for row in self.occupations]

    def state(self, i):
        return Configuration(tuple(int(v) for v in self.occupations[i]))

    def rank(self, occupations):
        """
        Rangs lexicographiques d'un tableau (m, L) de configurations de E_N.

        Utilise la bijection avec les (L−1)-parties de {0, …, N+L−2}:
        rang_lex(S) = C(n,k) − 1 − rang_colex(n−1−S renversé).
        """
        occ = np.atleast_2d(np.asarray(occupations, dtype=np.int64))
        k = self.L - 1
        n = self._n_slots
        bars = np.cumsum(occ[:, :-1] + 1, axis=1) - 1
        colex = np.zeros(occ.shape[0], dtype=np.int64)
        for j in range(k):
            t = n - 1 - bars[:, k - 1 - j]
            colex += self._comb[t, j + 1]
        return self._comb[n, k] - 1 - colex

    def index_of(self, config):
        """
        Ordinal d'une configuration.

        Raises:
            ZRPDomainError: Si la configuration n'appartient pas à E_N
        """
        config = as_configuration(config, L=self.L, N=self.N)
        return int(self.rank(np.array([config.occupations]))[0])

    @property
    def index(self):
        """Dictionnaire Configuration → ordinal (inverse de ``states``)."""
        return {c: i for i, c in enumerate(self.states)}

    def __contains__(self, config):
        try:
            as_configuration(config, L=self.L, N=self.N)
        except ZRPDomainError:
            return False
        return True

    def check_vector(self, F, name="F"):
        """
        Convertit F en vecteur float de dimension |E_N|.

        Raises:
            ZRPDimensionError: Si la dimension ne correspond pas
        """
        F = np.asarray(F, dtype=float)
        if F.shape != (len(self),):
            raise ZRPDimensionError(
                f"Le vecteur {name} n'a pas la dimension |E_N|",
                {"expected": len(self), "actual": F.shape}
            )
        return F

    def rotation(self, k=1):
        """Permutation des ordinaux induite par la rotation x → x+k du tore."""
        rotated = np.roll(self.occupations, k % self.L, axis=1)
        return self.rank(rotated)

    def rotate(self, ordinals, k=1):
        """Images des ordinaux par la rotation x → x+k du tore."""
        return self.rotation(k)[np.asarray(ordinals, dtype=np.int64)]

    def summary(self, partition=None):
        """Résumé JSON-compatible de l'espace (et des masses des puits)."""
        out = {
            "schema": SUMMARY_SCHEMA,
            "L": self.L,
            "N": self.N,
            "alpha": self.alpha,
            "cardinality": len(self),
            "Z": self.Z,
        }
        if partition is not None:
            report = well_mass_report(self, partition)
            out["ellN"] = partition.ellN
            out["well_masses"] = report["well_masses"]
            out["delta_mass"] = report["delta_mass"]
        return out


def enumerate_space(L, N, alpha, max_states=None):
    """
    Énumère E_N dans l'ordre lexicographique et calcule μ_N.

    Args:
        L: Nombre de sites (≥ 2)
        N: Nombre de particules (≥ 1)
        alpha: Exposant α > 0
        max_states: Limite d'énumération (``LabSettings.max_states`` par défaut)

    Returns:
        StateSpace

    Raises:
        ZRPDomainError: Si L < 2, N < 1 ou α ≤ 0
        ZRPSizeError: Si |E_N| dépasse la limite
    """
    _validate_parameters(L, N, alpha)
    cap = int(max_states or get_settings().max_states)
    size = cardinality(L, N)
    if size > cap:
        raise ZRPSizeError(
            "L'espace d'états dépasse la limite d'énumération",
            {"L": L, "N": N, "cardinality": size, "cap": cap}
        )
    occupations = compositions(L, N)
    logger.debug("E_N énuméré: L=%d N=%d |E_N|=%d", L, N, size)
    return StateSpace(L, N, alpha, occupations)


# -----------------------------------------------------
#   PUITS MÉTASTABLES
# -----------------------------------------------------

@dataclass(frozen=True)
class WellPartition:
    """
    Partition E_N = (∪_x 𝓔^x_N) ∪ Δ_N.

    Attributes:
        ellN: Seuil ℓ_N
        threshold: Nombre minimal de particules au site du puits (N − ℓ_N
            ou N − 3ℓ_N pour les puits élargis 𝓓^x_N)
        labels: Pour chaque ordinal, le site du puits ou −1 (Δ_N)
        wells: Tuple, pour chaque site x, des ordinaux de 𝓔^x_N
        delta: Ordinaux de Δ_N
    """
    ellN: int
    threshold: int
    labels: np.ndarray
    wells: tuple
    delta: np.ndarray

    @property
    def L(self):
        return len(self.wells)

    def union(self, sites):
        """Ordinaux de 𝓔_N(A) = ∪_{x∈A} 𝓔^x_N."""
        sites = sorted({int(x) for x in sites})
        if not sites:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate([self.wells[x] for x in sites]))

    def complement_union(self, x):
        """Ordinaux de 𝓔̆^x_N = ∪_{y≠x} 𝓔^y_N."""
        return self.union(y for y in range(self.L) if y != x)


def _partition_by_threshold(space, ellN, threshold):
    occ = space.occupations
    top = occ.max(axis=1)
    site = occ.argmax(axis=1)
    labels = np.where(top >= threshold, site, -1).astype(np.int64)
    labels.setflags(write=False)
    wells = tuple(np.flatnonzero(labels == x) for x in range(space.L))
    delta = np.flatnonzero(labels < 0)
    return WellPartition(ellN=int(ellN), threshold=int(threshold), labels=labels,
                         wells=wells, delta=delta)


def partition_wells(space, ellN):
    """
    Construit les puits 𝓔^x_N = {η : η_x ≥ N − ℓ_N} et Δ_N.

    Raises:
        ZRPDomainError: Si ℓ_N < 1
        ZRPOverlapError: Si 2ℓ_N ≥ N (puits non disjoints)
    """
    ellN = int(ellN)
    if ellN < 1:
        raise ZRPDomainError("ℓ_N doit être ≥ 1", {"ellN": ellN})
    if 2 * ellN >= space.N:
        raise ZRPOverlapError(
            "Les puits se recouvrent: il faut 2ℓ_N < N",
            {"ellN": ellN, "N": space.N}
        )
    return _partition_by_threshold(space, ellN, space.N - ellN)


def enlarged_wells(space, partition):
    """
    Puits élargis 𝓓^x_N = {η : η_x ≥ N − 3ℓ_N}.

    Raises:
        ZRPOverlapError: Si 6ℓ_N ≥ N
    """
    if 6 * partition.ellN >= space.N:
        raise ZRPOverlapError(
            "Les puits élargis se recouvrent: il faut 6ℓ_N < N",
            {"ellN": partition.ellN, "N": space.N}
        )
    return _partition_by_threshold(space, partition.ellN, space.N - 3 * partition.ellN)


def well_mass_report(space, partition):
    """
    Masses μ_N(𝓔^x_N) de chaque puits et μ_N(Δ_N).

    Returns:
        dict: ``well_masses`` (liste indexée par x), ``delta_mass``, ``total``
    """
    masses = [float(math.fsum(space.mu[w])) for w in partition.wells]
    delta_mass = float(math.fsum(space.mu[partition.delta]))
    return {
        "well_masses": masses,
        "delta_mass": delta_mass,
        "total": math.fsum(masses) + delta_mass,
    }


def well_states(L, N, x, ellN):
    """
    Configurations du puits 𝓔^x_N sans énumérer E_N.

    Les k ≤ ℓ_N particules hors du site x sont réparties sur les L−1 autres
    sites; ordre: k croissant puis lexicographique.
    """
    if 2 * ellN >= N:
        raise ZRPOverlapError(
            "Les puits se recouvrent: il faut 2ℓ_N < N",
            {"ellN": ellN, "N": N}
        )
    others = [y for y in range(L) if y != x % L]
    out = []
    for k in range(ellN + 1):
        for bars in itertools.combinations(range(k + L - 2), L - 2):
            parts = np.diff([-1, *bars, k + L - 2]) - 1
            occ = [0] * L
            occ[x % L] = N - k
            for y, v in zip(others, parts):
                occ[y] = int(v)
            out.append(Configuration(tuple(occ)))
    return out


# -----------------------------------------------------
#   RÈGLES DE CROISSANCE DE ℓ_N
# -----------------------------------------------------

def growth_exponent(L, alpha):
    """γ = (1+α)/(1+α(L−1)), borne de croissance de ℓ_N pour la métastabilité."""
    return (1.0 + alpha) / (1.0 + alpha * (L - 1))


def default_ell(N, L, alpha):
    """ℓ_N = ⌊N^{min(1/2, γ/2)}⌋, au moins 1."""
    exponent = min(0.5, growth_exponent(L, alpha) / 2.0)
    return max(1, int(math.floor(N ** exponent + 1e-12)))


@dataclass(frozen=True)
class EllRule:
    """Règle ℓ_N: "sqrt", "pow:<γ>", "const:<k>" ou "default"."""
    text: str
    evaluate: Callable

    def __call__(self, N, L, alpha):
        return self.evaluate(N, L, alpha)

    @classmethod
    def parse(cls, text: Optional[str]):
        """
        Analyse une règle ℓ_N.

        Raises:
            ZRPDomainError: Si la règle est inconnue ou mal formée
        """
        text = (text or "default").strip()
        try:
            if text == "default":
                return cls(text, default_ell)
            if text == "sqrt":
                return cls(text, lambda N, L, alpha: max(1, math.isqrt(N)))
            if text.startswith("pow:"):
                power = float(text[4:])
                if not 0 < power < 1:
                    raise ValueError("l'exposant doit être dans ]0, 1[")
                return cls(text, lambda N, L, alpha: max(1, int(math.floor(N ** power + 1e-12))))
            if text.startswith("const:"):
                value = int(text[6:])
                if value < 1:
                    raise ValueError("la constante doit être ≥ 1")
                return cls(text, lambda N, L, alpha: value)
        except ValueError as e:
            raise ZRPDomainError(
                f"Règle ℓ_N invalide: {text}",
                {"rule": text, "error": str(e)}
            ) from e
        raise ZRPDomainError(
            f"Règle ℓ_N inconnue: {text}",
            {"rule": text, "known": ["sqrt", "pow:<γ>", "const:<k>", "default"]}
        )
