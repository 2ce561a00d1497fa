"""
Simulation événementielle du processus de zéro-portée totalement asymétrique.

Aucune énumération de E_N: la dynamique est simulée directement et les visites
des puits sont annotées au vol. Générateur aléatoire: numpy PCG64 initialisé
avec la graine 64 bits de la configuration; les tirages se font par blocs de
``RNG_BLOCK`` exponentielles puis ``RNG_BLOCK`` uniformes.
"""

import heapq
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import stats

from .configspace import well_states
from .exceptions import ZRPDomainError, ZRPOverlapError, ZRPSimulationError
from .generator import jump_rates
from .metastability import limit_constants
from .utils.serialization import csv_bytes, write_artifact

logger = logging.getLogger(__name__)

RNG_BLOCK = 4096
DELTA = -1
SEGMENTS_SCHEMA = "tazrp.segments/1"
STATS_SCHEMA = "tazrp.trace-stats/1"


# -----------------------------------------------------
#   CONFIGURATION
# -----------------------------------------------------

class SimConfig(BaseModel):
    """
    Paramètres d'une trajectoire.

    ``initial`` est soit un site (condensat complet sur ce site), soit un
    vecteur d'occupation. ``ellN = 0`` réduit chaque puits au seul condensat.
    """
    L: int = Field(ge=2)
    N: int = Field(ge=1)
    alpha: float = Field(gt=0)
    ellN: int = Field(default=0, ge=0)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    t_max: float = Field(gt=0)
    initial: Union[int, List[int]] = 0
    record_events: bool = False
    snapshot_interval: Optional[float] = Field(default=None, gt=0)
    max_events: Optional[int] = Field(default=None, gt=0)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check(self):
        if 2 * self.ellN >= self.N:
            raise ValueError(f"2·ellN doit être < N (ellN={self.ellN}, N={self.N})")
        if isinstance(self.initial, list):
            if len(self.initial) != self.L or sum(self.initial) != self.N or min(self.initial) < 0:
                raise ValueError(f"configuration initiale invalide: {self.initial}")
        elif not 0 <= self.initial < self.L:
            raise ValueError(f"site initial hors de T_L: {self.initial}")
        return self

    def initial_occupations(self):
        if isinstance(self.initial, list):
            return list(self.initial)
        occ = [0] * self.L
        occ[self.initial] = self.N
        return occ


def make_config(**kwargs):
    """
    Construit un SimConfig en convertissant les erreurs de validation.

    Raises:
        ZRPDomainError: Si la configuration est invalide
    """
    try:
        return SimConfig(**kwargs)
    except ValueError as e:
        raise ZRPDomainError(
            "Configuration de simulation invalide",
            {"error": str(e)}
        ) from e


def classify(occupations, ellN):
    """Site x si η_x ≥ N − ℓ_N, sinon −1 (Δ_N)."""
    N = sum(occupations)
    top = max(occupations)
    return occupations.index(top) if top >= N - ellN else DELTA


def total_rate(occupations, alpha):
    """Σ_x g(η_x), taux total de saut d'une configuration."""
    return float(np.sum(jump_rates(np.asarray(occupations), alpha)))


# -----------------------------------------------------
#   TRAJECTOIRE
# -----------------------------------------------------

@dataclass
class Trajectory:
    """
    Trajectoire simulée.

    Attributes:
        segments: Liste de (t_entrée, t_sortie, étiquette), étiquette −1 pour Δ_N
        delta_occupation: Temps total passé dans Δ_N
        total_time: Durée simulée
        events: Nombre de sauts
        event_times, event_sites: Journal des sauts (si ``record_events``)
        snapshot_times, snapshots: États aux instants k·``snapshot_interval``
    """
    config: SimConfig
    segments: list
    delta_occupation: float
    total_time: float
    events: int
    final: tuple
    truncated: bool = False
    event_times: Optional[np.ndarray] = None
    event_sites: Optional[np.ndarray] = None
    snapshot_times: Optional[np.ndarray] = None
    snapshots: Optional[np.ndarray] = None

    @property
    def well_time(self):
        return math.fsum(t1 - t0 for t0, t1, label in self.segments if label != DELTA)

    def states(self):
        """Rejoue le journal: état avant chaque saut (tableau (events, L))."""
        if self.event_sites is None:
            raise ZRPSimulationError("Journal des sauts non enregistré (record_events=False)")
        L = self.config.L
        occ = self.config.initial_occupations()
        out = np.empty((len(self.event_sites), L), dtype=np.int64)
        for k, x in enumerate(self.event_sites.tolist()):
            out[k] = occ
            occ[x] -= 1
            occ[(x + 1) % L] += 1
        return out


def run(cfg):
    """
    Simule la dynamique jusqu'à ``t_max`` (ou ``max_events`` sauts).

    Temps d'attente exponentiel de taux Σ_x g(η_x), site choisi
    proportionnellement à g(η_x), particule déplacée de x vers x+1.

    Returns:
        Trajectory
    """
    L, N = cfg.L, cfg.N
    g = jump_rates(np.arange(N + 1), cfg.alpha).tolist()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    occ = cfg.initial_occupations()
    t_max = cfg.t_max
    max_events = cfg.max_events or math.inf

    label = classify(occ, cfg.ellN)
    entry = 0.0
    segments = []
    t = 0.0
    events = 0
    times, sites = ([], []) if cfg.record_events else (None, None)
    snap_dt = cfg.snapshot_interval
    snap_next = 0.0 if snap_dt else math.inf
    snap_times, snaps = [], []

    exp_block = rng.standard_exponential(RNG_BLOCK).tolist()
    uni_block = rng.random(RNG_BLOCK).tolist()
    cursor = 0
    truncated = False
    while True:
        if cursor == RNG_BLOCK:
            exp_block = rng.standard_exponential(RNG_BLOCK).tolist()
            uni_block = rng.random(RNG_BLOCK).tolist()
            cursor = 0
        rates = [g[k] for k in occ]
        total = sum(rates)
        t_next = t + exp_block[cursor] / total
        if t_next < t_max and events >= max_events:
            truncated = True
            break
        while snap_next <= min(t_next, t_max):
            snap_times.append(snap_next)
            snaps.append(tuple(occ))
            snap_next += snap_dt
        if t_next >= t_max:
            t = t_max
            break
        t = t_next
        threshold = uni_block[cursor] * total
        cursor += 1
        x = 0
        acc = rates[0]
        while acc <= threshold and x < L - 1:
            x += 1
            acc += rates[x]
        while rates[x] == 0.0:
            x -= 1
        occ[x] -= 1
        occ[(x + 1) % L] += 1
        events += 1
        if times is not None:
            times.append(t)
            sites.append(x)
        new_label = classify(occ, cfg.ellN)
        if new_label != label:
            segments.append((entry, t, label))
            entry, label = t, new_label

    segments.append((entry, t, label))
    delta = math.fsum(t1 - t0 for t0, t1, lab in segments if lab == DELTA)
    logger.debug("run: %d sauts, t=%.3f, %d segments", events, t, len(segments))
    return Trajectory(
        config=cfg,
        segments=segments,
        delta_occupation=delta,
        total_time=t,
        events=events,
        final=tuple(occ),
        truncated=truncated,
        event_times=np.asarray(times) if times is not None else None,
        event_sites=np.asarray(sites, dtype=np.int64) if sites is not None else None,
        snapshot_times=np.asarray(snap_times) if snap_dt else None,
        snapshots=np.asarray(snaps, dtype=np.int64).reshape(-1, L) if snap_dt else None,
    )


def replica_configs(cfg, replicas):
    """Copies de ``cfg`` avec des graines indépendantes (SeedSequence)."""
    seeds = np.random.SeedSequence(cfg.seed).generate_state(replicas, dtype=np.uint64)
    return [cfg.model_copy(update={"seed": int(s)}) for s in seeds]


def run_replicas(cfg, replicas, workers=1):
    """Simule ``replicas`` trajectoires indépendantes; résultats dans l'ordre des répliques."""
    configs = replica_configs(cfg, replicas)
    if workers and workers > 1 and replicas > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, configs))
    return [run(c) for c in configs]


# -----------------------------------------------------
#   STATISTIQUES DU PROCESSUS TRACE
# -----------------------------------------------------

@dataclass
class TraceStatistics:
    """
    Marginales de X^N: temps de séjour (unités N^{1+α}) et cibles des sauts.

    La dernière visite, incomplète, est censurée.
    """
    L: int
    scale: float
    holding_times: list
    jump_counts: np.ndarray
    delta_fraction: float
    censored_time: float
    hop_rate: Optional[float] = None

    @property
    def transitions(self):
        return int(self.jump_counts.sum())

    @property
    def insufficient(self):
        return self.transitions == 0

    @property
    def displacement_counts(self):
        """Nombre de sauts x → x+d, d = 1, …, L−1."""
        counts = np.zeros(self.L - 1, dtype=np.int64)
        for x in range(self.L):
            for d in range(1, self.L):
                counts[d - 1] += self.jump_counts[x, (x + d) % self.L]
        return counts

    @property
    def mean_holding(self):
        return float(np.mean(self.holding_times)) if self.holding_times else None

    def to_dict(self):
        out = {
            "schema": STATS_SCHEMA,
            "L": self.L,
            "scale": self.scale,
            "holding_times": self.holding_times,
            "mean_holding": self.mean_holding,
            "jump_targets": {
                f"{x}->{y}": int(self.jump_counts[x, y])
                for x in range(self.L) for y in range(self.L) if x != y
            },
            "transitions": self.transitions,
            "delta_fraction": self.delta_fraction,
            "censored_time": self.censored_time,
            "insufficient": self.insufficient,
        }
        if self.hop_rate is not None:
            out["predicted_mean_holding"] = 1.0 / ((self.L - 1) * self.hop_rate)
        return out


def trace_statistics(traj, scale=None):
    """
    Construit X^N en excisant le temps passé dans Δ_N.

    Une excursion dans Δ_N qui revient au même puits prolonge la visite.

    Args:
        traj: Trajectory
        scale: Échelle de temps (N^{1+α} par défaut)

    Returns:
        TraceStatistics
    """
    cfg = traj.config
    L = cfg.L
    if scale is None:
        scale = float(cfg.N) ** (1.0 + cfg.alpha)
    hop = limit_constants(cfg.alpha).hop_rate if cfg.alpha > 1 else None

    counts = np.zeros((L, L), dtype=np.int64)
    holding = []
    current, accumulated = None, 0.0
    for t0, t1, label in traj.segments:
        if label == DELTA:
            continue
        if current is None or label == current:
            current = label
            accumulated += t1 - t0
            continue
        holding.append(accumulated / scale)
        counts[current, label] += 1
        current, accumulated = label, t1 - t0

    total = traj.total_time
    stats_out = TraceStatistics(
        L=L,
        scale=scale,
        holding_times=holding,
        jump_counts=counts,
        delta_fraction=traj.delta_occupation / total if total > 0 else 0.0,
        censored_time=accumulated / scale,
        hop_rate=hop,
    )
    if stats_out.insufficient:
        logger.info("aucune transition entre puits observée (t=%.3g)", total)
    return stats_out


# -----------------------------------------------------
#   TESTS STATISTIQUES
# -----------------------------------------------------

def _pooled_chisquare(observed, expected, min_expected=5.0):
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    # fusion répétée des deux plus petites classes tant qu'une classe reste sous le seuil
    heap = [(e, i, o) for i, (e, o) in enumerate(zip(expected.tolist(), observed.tolist()))]
    heapq.heapify(heap)
    serial = len(heap)
    while len(heap) > 1 and heap[0][0] < min_expected:
        e1, _, o1 = heapq.heappop(heap)
        e2, _, o2 = heapq.heappop(heap)
        heapq.heappush(heap, (e1 + e2, serial, o1 + o2))
        serial += 1
    pooled_exp = np.array([e for e, _, _ in heap])
    pooled_obs = np.array([o for _, _, o in heap])
    pooled_exp *= pooled_obs.sum() / pooled_exp.sum()
    if len(pooled_obs) < 2:
        return {"statistic": 0.0, "dof": 0, "p_value": 1.0, "bins": len(pooled_obs)}
    result = stats.chisquare(pooled_obs, pooled_exp)
    return {
        "statistic": float(result.statistic),
        "dof": len(pooled_obs) - 1,
        "p_value": float(result.pvalue),
        "bins": len(pooled_obs),
    }


def stationarity_test(traj, space):
    """
    χ² des états aux instants d'échantillonnage contre μ_N.

    Raises:
        ZRPSimulationError: Sans échantillons ou si l'espace ne correspond pas
    """
    if traj.snapshots is None or len(traj.snapshots) == 0:
        raise ZRPSimulationError("Aucun échantillon (snapshot_interval non défini)")
    if space.L != traj.config.L or space.N != traj.config.N:
        raise ZRPSimulationError(
            "L'espace d'états ne correspond pas à la simulation",
            {"space": (space.L, space.N), "sim": (traj.config.L, traj.config.N)}
        )
    ordinals = space.rank(traj.snapshots)
    observed = np.bincount(ordinals, minlength=len(space))
    expected = space.mu * len(ordinals)
    out = _pooled_chisquare(observed, expected)
    out["samples"] = int(len(ordinals))
    return out


def jump_law_test(traj, min_expected=5.0):
    """
    χ² des sites de départ des sauts contre les probabilités g(η_x)/Σ g.

    Les états dont une classe attendue est < ``min_expected`` sont ignorés.
    """
    states = traj.states()
    sites = traj.event_sites
    alpha = traj.config.alpha
    keys, inverse = np.unique(states, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    statistic, dof, used = 0.0, 0, 0
    for k, occ in enumerate(keys):
        mask = inverse == k
        n = int(mask.sum())
        rates = jump_rates(occ, alpha)
        active = np.flatnonzero(rates > 0)
        if len(active) < 2:
            continue
        probs = rates[active] / rates[active].sum()
        expected = n * probs
        if expected.min() < min_expected:
            continue
        observed = np.array([np.sum(sites[mask] == x) for x in active])
        statistic += float(np.sum((observed - expected) ** 2 / expected))
        dof += len(active) - 1
        used += 1
    p_value = float(stats.chi2.sf(statistic, dof)) if dof else 1.0
    return {"statistic": statistic, "dof": dof, "p_value": p_value, "states": used}


def jump_target_test(statistics, table):
    """
    χ² des déplacements x → x+d observés contre la ligne exacte des taux trace.

    ``table`` est une TraceRateTable (invariante par rotation).
    """
    observed = statistics.displacement_counts
    probs = np.array([table.split_ratios[0, d] for d in range(1, statistics.L)])
    if observed.sum() == 0:
        return {"statistic": 0.0, "dof": 0, "p_value": 1.0, "transitions": 0}
    result = stats.chisquare(observed, probs * observed.sum())
    return {
        "statistic": float(result.statistic),
        "dof": statistics.L - 2,
        "p_value": float(result.pvalue),
        "transitions": int(observed.sum()),
    }


# -----------------------------------------------------
#   (M1)
# -----------------------------------------------------

@dataclass
class M1Result:
    successes: int
    trials: int
    fraction: float
    ci_low: float
    ci_high: float

    def to_dict(self):
        return {
            "successes": self.successes,
            "trials": self.trials,
            "fraction": self.fraction,
            "ci": [self.ci_low, self.ci_high],
        }


def _hits_before_leaving(occ, target, x, ellN, g, rng, max_events):
    L = len(occ)
    for _ in range(max_events):
        if occ == target:
            return True
        label = classify(occ, ellN)
        if label not in (x, DELTA):
            return False
        rates = [g[k] for k in occ]
        threshold = rng.random() * sum(rates)
        site = 0
        acc = rates[0]
        while acc <= threshold and site < L - 1:
            site += 1
            acc += rates[site]
        while rates[site] == 0.0:
            site -= 1
        occ[site] -= 1
        occ[(site + 1) % L] += 1
    raise ZRPSimulationError(
        "Limite d'événements atteinte dans m1_check",
        {"max_events": max_events}
    )


def m1_check(L, N, alpha, ellN, trials=1000, seed=0, site=0, max_events=10_000_000, confidence=0.95):
    """
    Fraction des essais où, partant de η ∈ 𝓔^x, la chaîne atteint ξ ∈ 𝓔^x
    avant tout autre puits; (η, ξ) tirés uniformément dans le puits.

    Seule la chaîne des sauts est simulée (les temps n'interviennent pas).
    """
    if 2 * ellN >= N:
        raise ZRPOverlapError("2·ellN doit être < N", {"ellN": ellN, "N": N})
    members = [list(c.occupations) for c in well_states(L, N, site, ellN)]
    g = jump_rates(np.arange(N + 1), alpha).tolist()
    rng = np.random.Generator(np.random.PCG64(seed))
    successes = 0
    for _ in range(trials):
        i, j = rng.integers(len(members), size=2)
        if _hits_before_leaving(list(members[i]), members[j], site, ellN, g, rng, max_events):
            successes += 1
    ci = stats.binomtest(successes, trials).proportion_ci(confidence_level=confidence)
    return M1Result(successes=successes, trials=trials, fraction=successes / trials,
                    ci_low=float(ci.low), ci_high=float(ci.high))


# -----------------------------------------------------
#   EXPORT
# -----------------------------------------------------

def segment_rows(traj):
    for t0, t1, label in traj.segments:
        yield t0, t1, "delta" if label == DELTA else label


def export_segments_csv(traj, path=None):
    """
    CSV des segments (t_entry, t_exit, well) avec ``delta`` pour Δ_N.

    Le fichier est compressé en zstd si ``path`` finit par ``.zst``.

    Returns:
        bytes: Le document CSV (non compressé)
    """
    data = csv_bytes(["t_entry", "t_exit", "well"], segment_rows(traj), schema=SEGMENTS_SCHEMA)
    if path is not None:
        write_artifact(path, data)
    return data
