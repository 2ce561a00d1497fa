import math

import numpy as np
import pytest

from tazrp import metastability as meta
from tazrp.configspace import enumerate_space, partition_wells, well_mass_report
from tazrp.exceptions import ZRPDivergenceError, ZRPDomainError
from tazrp.generator import build_all, jump_rate
from tazrp.potential import capacity, symmetric_capacity
from tazrp.utils.serialization import dumps_json, loads_json


GAMMA_4 = 1 + math.pi ** 4 / 90


# -----------------------------------------------------
#   CONSTANTES LIMITES
# -----------------------------------------------------

@pytest.mark.parametrize("alpha", [1.0, 2.0, 3.0, 4.0, 5.5])
def test_i_alpha_beta_closed_form(alpha):
    expected = math.gamma(alpha + 1) ** 2 / math.gamma(2 * alpha + 2)
    assert meta.i_alpha(alpha) == pytest.approx(expected, rel=1e-12)


def test_i_alpha_values():
    assert meta.i_alpha(1.0) == pytest.approx(1 / 6, rel=1e-12)
    assert meta.i_alpha(2.0) == pytest.approx(1 / 30, rel=1e-12)
    assert meta.i_alpha(4.0) == pytest.approx(1 / 630, rel=1e-12)
    with pytest.raises(ZRPDomainError):
        meta.i_alpha(0.0)


def test_limit_constants():
    constants = meta.limit_constants(4.0)
    assert constants.gamma_alpha == pytest.approx(GAMMA_4, rel=1e-10)
    assert constants.hop_rate == pytest.approx(630 / GAMMA_4, rel=1e-10)
    assert set(constants.to_dict()) == {"alpha", "gamma_alpha", "i_alpha", "hop_rate"}
    with pytest.raises(ZRPDivergenceError):
        meta.limit_constants(1.0)


def test_theorem1_prediction():
    assert meta.theorem1_prediction(3, 4.0, [0]) == pytest.approx(2 * 630 / (3 * GAMMA_4), rel=1e-10)
    assert meta.theorem1_prediction(3, 4.0, [0]) == pytest.approx(201.70, abs=0.01)
    assert meta.theorem1_prediction(5, 3.0, [0, 2]) == pytest.approx(
        meta.theorem1_prediction(5, 3.0, [1, 3, 4]), rel=1e-14)
    hop = meta.limit_constants(2.0).hop_rate
    assert meta.theorem1_prediction(2, 2.0, [0]) == pytest.approx(hop / 2, rel=1e-14)
    for bad in ([], [0, 1, 2]):
        with pytest.raises(ZRPDomainError):
            meta.theorem1_prediction(3, 4.0, bad)


def test_reversible_limit_three_sites():
    hop = meta.limit_constants(4.0).hop_rate
    # Cap^s(0,1) = Cap^s(0,2) = (1/6)(1 + 1/2)
    assert meta.reversible_limit(3, 4.0, [0]) == pytest.approx(hop / 2, rel=1e-12)
    assert meta.reversible_limit(3, 4.0, [0]) < meta.theorem1_prediction(3, 4.0, [0])


def test_mean_rate_limit_minimum():
    hop = meta.limit_constants(4.0).hop_rate
    best = meta.mean_rate_limit(3, 4.0)
    assert best == pytest.approx(hop / 2, rel=1e-12)
    assert meta.mean_rate_limit(5, 4.0) == pytest.approx(hop * 3 / 4, rel=1e-12)
    for gamma in (0.3, 0.7):
        assert meta.mean_rate_limit(3, 4.0, gamma) > best


def test_limit_walk():
    walk = meta.limit_walk(4, 3.0)
    assert np.allclose(walk.generator.sum(axis=1), 0.0)
    assert walk.exit_rate == pytest.approx(3 * meta.limit_constants(3.0).hop_rate)
    assert np.allclose(walk.jump_distribution, 1 / 3)


def test_discrete_ialpha():
    assert meta.discrete_ialpha(2, 1.0) == pytest.approx(0.125, rel=1e-14)
    for alpha in (2.0, 4.0):
        exact = meta.i_alpha(alpha)
        assert abs(meta.discrete_ialpha(1000, alpha) - exact) / exact <= 0.01
    errors = [abs(meta.discrete_ialpha(N, 2.0) - meta.i_alpha(2.0)) for N in (10, 100, 1000)]
    assert errors[0] > errors[1] > errors[2]
    with pytest.raises(ZRPDomainError):
        meta.discrete_ialpha(1, 2.0)


# -----------------------------------------------------
#   TAUX DU PROCESSUS TRACE
# -----------------------------------------------------

@pytest.mark.parametrize("N", [12, 16, 20])
def test_trace_rate_identity(N):
    space = enumerate_space(3, N, 4.0)
    wells = partition_wells(space, math.isqrt(N))
    table = meta.trace_mean_rates(space, wells)
    assert np.max(table.identity_residuals) <= 1e-8
    assert table.identity_ok
    assert table.rotation_invariant
    assert np.allclose(np.diag(table.rates), 0.0)
    assert np.allclose(table.split_ratios.sum(axis=1), 1.0)


def test_trace_rates_scaled_and_positive():
    N = 20
    space = enumerate_space(3, N, 4.0)
    table = meta.trace_mean_rates(space, partition_wells(space, math.isqrt(N)), check_identity=False)
    assert table.identity_ok is None
    off = table.scaled[~np.eye(3, dtype=bool)]
    assert np.all(off > 0) and np.all(np.isfinite(off))
    assert np.allclose(table.scaled, N ** 5 * table.rates)
    assert np.ptp(table.exit_rates) / np.mean(table.exit_rates) < 1e-10
    hop = meta.limit_constants(4.0).hop_rate
    assert np.allclose(table.to_dict()["scaled_over_hop"], table.scaled / hop)


def test_trace_rates_without_transition_region():
    space = enumerate_space(2, 5, 2.0)
    wells = partition_wells(space, 2)
    assert wells.delta.size == 0
    table = meta.trace_mean_rates(space, wells)
    mass = well_mass_report(space, wells)["well_masses"][0]
    # seul (3,2) quitte 𝓔^0, vers (2,3)
    raw = space.mu[space.index_of((3, 2))] * jump_rate(3, 2.0) / mass
    assert table.rates[0, 1] == pytest.approx(raw, rel=1e-12)


def test_trace_table_serializes():
    space = enumerate_space(3, 12, 4.0)
    table = meta.trace_mean_rates(space, partition_wells(space, 3))
    data = loads_json(dumps_json(table.to_dict()))
    assert data["schema"] == "tazrp.trace/1"
    assert data["identity_ok"] is True
    assert len(data["rates"]) == 3


# -----------------------------------------------------
#   CONDITIONS (H0)–(H2)
# -----------------------------------------------------

def test_h_conditions_report(space_3124):
    wells = partition_wells(space_3124, 3)
    ops = build_all(space_3124)
    table = meta.trace_mean_rates(space_3124, wells, ops, check_identity=False)
    report = meta.h_conditions_report(space_3124, wells, ops, table)
    assert np.array_equal(report["H0"]["scaled_rates"], table.scaled)
    h1 = report["H1"]
    assert h1["method"] == "exact"
    # Cap^s(η, ξ) ≤ μ(η)·λ^s(η): la majoration inclut le taux de sortie symétrique
    assert h1["worst_cap_sym"] <= h1["worst_mu"] * h1["worst_exit_rate"] * (1 + 1e-10)
    assert h1["gamma"] == pytest.approx(5 / 9)
    assert report["H2"]["ratio"] == pytest.approx(
        report["H2"]["delta_mass"] / report["H2"]["well_masses"][0])


def test_h2_ratio_decreasing():
    ratios = []
    for N in (20, 30, 40):
        space = enumerate_space(3, N, 4.0)
        report = meta.h_conditions_report(space, partition_wells(space, math.isqrt(N)))
        ratios.append(report["H2"]["ratio"])
    assert ratios[0] > ratios[1] > ratios[2]


# -----------------------------------------------------
#   FONCTIONS TEST
# -----------------------------------------------------

def test_cutoff_properties():
    eps = 0.1
    t = np.linspace(0.0, 1.0, 101)
    phi = meta.cutoff(t, eps)
    assert np.allclose(phi + meta.cutoff(1 - t, eps), 1.0, atol=1e-14)
    assert np.all(phi[t <= 3 * eps] == 0.0)
    assert np.allclose(phi[t >= 1 - 3 * eps], 1.0)
    assert np.all(np.diff(phi) >= 0)


@pytest.mark.parametrize("epsilon", [0.0, 1 / 6, 0.2, -0.1])
def test_epsilon_domain(space_332, epsilon):
    with pytest.raises(ZRPDomainError):
        meta.test_function(space_332, 0, epsilon)


def test_profile_endpoints():
    assert meta.profile(0.0, 4.0, 0.1) == pytest.approx(0.0)
    assert meta.profile(1.0, 4.0, 0.1) == pytest.approx(1.0)
    assert meta.profile(0.5, 4.0, 0.1) == pytest.approx(0.5)


@pytest.mark.parametrize("epsilon", [0.05, 0.1, 0.15])
def test_test_function_lipschitz(epsilon):
    N = 20
    space = enumerate_space(3, N, 4.0)
    F = meta.test_function(space, 0, epsilon)
    assert meta.max_jump_increment(space, F) <= meta.lipschitz_constant(4.0, epsilon) / N + 1e-12
    assert F[space.index_of((N, 0, 0))] == pytest.approx(1.0)
    assert F[space.index_of((0, N, 0))] == pytest.approx(0.0)


@pytest.mark.parametrize("epsilon", [0.05, 0.1, 0.15])
def test_test_function_bound_above_capacity(epsilon):
    N = 20
    space = enumerate_space(3, N, 4.0)
    wells = partition_wells(space, math.isqrt(N))
    ops = build_all(space)
    cap = capacity(space, wells.union([0]), wells.union([1, 2]), operators=ops).cap
    bound = meta.test_function_bound(space, wells, [0], epsilon, operators=ops)
    assert bound >= cap * (1 - 1e-9)


def test_enlarged_bound_above_capacity():
    space = enumerate_space(3, 20, 4.0)
    wells = partition_wells(space, 3)
    ops = build_all(space)
    cap = capacity(space, wells.union([0]), wells.union([1, 2]), operators=ops).cap
    bound = meta.test_function_bound(space, wells, [0], 0.1, enlarged=True, operators=ops)
    assert bound >= cap * (1 - 1e-9)


@pytest.mark.slow
def test_scaled_test_bound_decreases_toward_prediction():
    prediction = meta.theorem1_prediction(3, 4.0, [0])
    scaled = []
    for N in (20, 30, 40):
        space = enumerate_space(3, N, 4.0)
        bound = meta.test_function_bound(space, partition_wells(space, math.isqrt(N)), [0], 0.1)
        scaled.append(N ** 5 * bound)
    assert scaled[0] > scaled[1] > scaled[2] > prediction


def test_mean_rate_infimum_reports_limit(space_3124):
    wells = partition_wells(space_3124, 3)
    result = meta.mean_rate_infimum(space_3124, wells, 0, 1, epsilon=0.1)
    assert result["limit"] == pytest.approx(meta.mean_rate_limit(3, 4.0))
    assert result["limit_beta"] == 0.5
    assert 0.0 <= result["beta"] <= 1.0
    assert result["value"] >= 0.0


def test_mean_rate_infimum_near_limiting_beta():
    N = 20
    space = enumerate_space(3, N, 4.0)
    result = meta.mean_rate_infimum(space, partition_wells(space, math.isqrt(N)), 0, 1, epsilon=0.1)
    assert abs(result["beta"] - result["limit_beta"]) < 0.1
    assert result["scaled"] == pytest.approx(N ** 5 * result["value"])
    assert result["scaled"] > result["limit"]


# -----------------------------------------------------
#   TABLE DE CONVERGENCE
# -----------------------------------------------------

def test_convergence_table_rows():
    rows = meta.convergence_table(3, 2.0, [0], [8, 4, 10], rule="const:2")
    assert [row["N"] for row in rows] == [8, 4, 10]
    assert rows[1]["error"] is not None
    for row in (rows[0], rows[2]):
        assert row["error"] is None
        assert row["sandwich_ok"] and row["infsup_ok"]
        assert 1 - 1e-10 <= row["ratio"] / row["ratio_sym"] <= 36 * (1 + 1e-10)
        assert row["prediction"] == pytest.approx(meta.theorem1_prediction(3, 2.0, [0]))
    assert rows[0]["prediction"] == rows[2]["prediction"]


def test_convergence_table_with_test_bound():
    rows = meta.convergence_table(3, 4.0, [0], [14], rule="const:2", epsilon=0.1)
    assert rows[0]["scaled_test_bound"] >= rows[0]["scaled_cap"] * (1 - 1e-9)


def test_convergence_table_rejects_bad_rule():
    with pytest.raises(ZRPDomainError):
        meta.convergence_table(3, 2.0, [0], [8], rule="cubic")


def test_trend():
    assert meta.trend([3, 2, 1]) == "decreasing"
    assert meta.trend([1, 2, 2]) == "increasing"
    assert meta.trend([1, 1]) == "constant"
    assert meta.trend([1, 3, 2]) == "mixed"
    assert meta.trend([None, 5]) == "constant"


@pytest.mark.slow
def test_reversible_benchmark_at_large_N():
    N, alpha = 100, 4.0
    space = enumerate_space(3, N, alpha)
    wells = partition_wells(space, math.isqrt(N))
    cap_sym = symmetric_capacity(space, wells.union([0]), wells.union([1, 2]))
    scaled = N ** (1 + alpha) * cap_sym
    limit = meta.reversible_limit(3, alpha, [0])
    assert abs(scaled - limit) / limit <= 0.25
