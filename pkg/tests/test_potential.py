import numpy as np
import pytest

from tazrp.configspace import enumerate_space, partition_wells
from tazrp.exceptions import ZRPDomainError, ZRPOverlapError, ZRPSizeError
from tazrp.generator import build_all, jump_rate
from tazrp.potential import (
    capacity,
    capacity_symmetry,
    dense_capacity_oracle,
    equilibrium_potential,
    mean_rate_functional,
    mean_rate_scan,
    monotonicity_check,
    project_family,
    sup_functional,
    symmetric_walk_capacity,
    walk_capacity,
)
from tazrp.utils.serialization import dumps_json, loads_json


def _site_state(space, z):
    occ = [0] * space.L
    occ[z] = 1
    return space.index_of(occ)


# -----------------------------------------------------
#   MARCHE D'UNE PARTICULE
# -----------------------------------------------------

@pytest.mark.parametrize("L", [3, 4, 5])
def test_walk_capacity_is_one_over_L(L):
    for x in range(L):
        for y in range(L):
            if x != y:
                assert walk_capacity(L, x, y) == pytest.approx(1.0 / L, abs=1e-12)


@pytest.mark.parametrize("L", [3, 5])
def test_symmetric_walk_capacity_closed_form(L):
    for y in range(1, L):
        assert walk_capacity(L, 0, y, "symmetric") == pytest.approx(
            symmetric_walk_capacity(L, 0, y), rel=1e-12)


def test_walk_potentials_are_indicators():
    L, x, y = 5, 1, 3
    space = enumerate_space(L, 1, 1.0)
    A, B = [_site_state(space, x)], [_site_state(space, y)]
    V, _ = equilibrium_potential(space, A, B, "forward")
    Vstar, _ = equilibrium_potential(space, A, B, "adjoint")
    assert [V[_site_state(space, z)] for z in range(L)] == pytest.approx([1, 1, 0, 0, 1])
    assert [Vstar[_site_state(space, z)] for z in range(L)] == pytest.approx([0, 1, 1, 0, 0])


def test_walk_sites_must_differ():
    with pytest.raises(ZRPDomainError):
        walk_capacity(3, 1, 4)


# -----------------------------------------------------
#   POTENTIELS
# -----------------------------------------------------

def test_potential_without_free_states(space_332):
    A = np.arange(4)
    B = np.arange(4, len(space_332))
    V, residual = equilibrium_potential(space_332, A, B)
    assert np.array_equal(V, np.r_[np.ones(4), np.zeros(len(space_332) - 4)])
    assert residual == 0.0


def test_potential_bounds_and_harmonicity(space_362, wells_362, ops_362):
    A, B = wells_362.wells[0], wells_362.complement_union(0)
    V, residual = equilibrium_potential(space_362, A, B, operator=ops_362["forward"])
    assert residual < 1e-12
    assert np.all(V >= -1e-12) and np.all(V <= 1 + 1e-12)


def test_overlapping_or_empty_sets(space_332):
    with pytest.raises(ZRPOverlapError):
        equilibrium_potential(space_332, [0, 1], [1, 2])
    with pytest.raises(ZRPDomainError):
        equilibrium_potential(space_332, [], [1])


def _hits_first(start, target, avoid, g, rng):
    occ = list(start)
    L = len(occ)
    while True:
        state = tuple(occ)
        if state == target:
            return True
        if state == avoid:
            return False
        rates = [g[k] for k in occ]
        threshold = rng.random() * sum(rates)
        x, acc = 0, rates[0]
        while acc <= threshold and x < L - 1:
            x += 1
            acc += rates[x]
        occ[x] -= 1
        occ[(x + 1) % L] += 1


@pytest.mark.slow
def test_potential_against_jump_chain_sampling(space_332):
    target, avoid = (3, 0, 0), (0, 3, 0)
    V, _ = equilibrium_potential(space_332, [space_332.index_of(target)], [space_332.index_of(avoid)])
    g = [jump_rate(k, 2.0) for k in range(4)]
    rng = np.random.default_rng(31)
    trials = 100_000
    start = (1, 1, 1)
    p_hat = sum(_hits_first(start, target, avoid, g, rng) for _ in range(trials)) / trials
    p = V[space_332.index_of(start)]
    assert 0.0 < p < 1.0
    assert abs(p_hat - p) <= 3 * np.sqrt(p * (1 - p) / trials)


# -----------------------------------------------------
#   CAPACITÉ
# -----------------------------------------------------

@pytest.mark.parametrize("alpha", [2.0, 4.0])
@pytest.mark.parametrize("N", [6, 10, 14])
@pytest.mark.parametrize("ellN", [1, 2])
def test_capacity_triple_consistency(alpha, N, ellN):
    space = enumerate_space(3, N, alpha)
    wells = partition_wells(space, ellN)
    report = capacity(space, wells.wells[0], wells.complement_union(0), ellN=ellN,
                      labels=([0], [1, 2]), dense_oracle=len(space) <= 200)
    assert report.infsup_relative_error <= 1e-8
    assert report.sandwich_ok
    assert report.cap_sym <= report.cap * (1 + 1e-10)
    assert report.cap <= 36.0 * report.cap_sym * (1 + 1e-10)
    assert report.oracle_relative_error <= 1e-9


def test_capacity_dense_oracle_between_wells():
    space = enumerate_space(3, 6, 4.0)
    wells = partition_wells(space, 1)
    report = capacity(space, wells.wells[0], wells.wells[1], dense_oracle=True)
    assert report.oracle == pytest.approx(report.cap, rel=1e-9)


def test_capacity_reversible_on_two_sites():
    space = enumerate_space(2, 7, 2.0)
    wells = partition_wells(space, 2)
    report = capacity(space, wells.wells[0], wells.wells[1])
    assert report.cap == pytest.approx(report.cap_sym, rel=1e-12)


def test_capacity_rotation(space_362, wells_362, ops_362):
    first = capacity(space_362, wells_362.union([0, 1]), wells_362.union([2]), operators=ops_362)
    second = capacity(space_362, wells_362.union([1, 2]), wells_362.union([0]), operators=ops_362)
    assert first.cap == pytest.approx(second.cap, rel=1e-10)


def test_capacity_is_symmetric(space_362, wells_362, ops_362):
    result = capacity_symmetry(space_362, wells_362.wells[0], wells_362.wells[2], ops_362)
    assert result["relative_gap"] < 1e-10


def test_capacity_report_serializes(space_362, wells_362):
    report = capacity(space_362, wells_362.wells[0], wells_362.complement_union(0),
                      ellN=1, labels=([0], [1, 2]))
    data = loads_json(dumps_json(report.to_dict()))
    assert data["schema"] == "tazrp.capacity/1"
    assert data["A"] == [0] and data["B"] == [1, 2]
    assert data["sandwich_ok"] is True
    assert report.scaled(report.cap) == pytest.approx(6 ** 3 * report.cap)


def test_dense_oracle_size_limit():
    space = enumerate_space(3, 100, 2.0)
    with pytest.raises(ZRPSizeError):
        dense_capacity_oracle(space, [0], [1])


# -----------------------------------------------------
#   FONCTIONNELLE SUP
# -----------------------------------------------------

def test_sup_functional_constant(space_362):
    value, H = sup_functional(space_362, np.full(len(space_362), 0.3), [([0], None), ([5], None)])
    assert value == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(H, H[0])


def test_sup_functional_unconstrained_matches_pseudo_inverse(rng):
    space = enumerate_space(3, 4, 2.0)
    ops = build_all(space)
    F = rng.standard_normal(len(space))
    value, _ = sup_functional(space, F, [], ops)
    b = space.mu * (ops["adjoint"] @ F)
    K = np.diag(space.mu) @ (-ops["symmetric"].matrix.toarray())
    K = 0.5 * (K + K.T)
    assert value == pytest.approx(b @ np.linalg.pinv(K) @ b, rel=1e-8)


def test_sup_functional_overlapping_constraints(space_332):
    with pytest.raises(ZRPOverlapError):
        sup_functional(space_332, np.zeros(len(space_332)), [([0, 1], None), ([1], 0.0)])


# -----------------------------------------------------
#   MONOTONIE
# -----------------------------------------------------

def test_monotonicity_equal_sets(space_362, wells_362):
    A, B = wells_362.wells[0], wells_362.wells[1]
    assert monotonicity_check(space_362, A, B, A, B)


def test_monotonicity_growing_B(rng):
    space = enumerate_space(3, 5, 2.0)
    ops = build_all(space)
    for _ in range(20):
        picks = rng.choice(len(space), size=4, replace=False)
        A, B, extra = [picks[0]], [picks[1], picks[2]], picks[3]
        assert monotonicity_check(space, A, B, A, B + [extra], ops)


def test_monotonicity_singleton_in_well():
    space = enumerate_space(3, 10, 2.0)
    wells = partition_wells(space, 2)
    condensate = [space.index_of((10, 0, 0))]
    B = wells.complement_union(0)
    assert monotonicity_check(space, condensate, B, wells.wells[0], B)


def test_monotonicity_requires_inclusion(space_362, wells_362):
    with pytest.raises(ZRPDomainError):
        monotonicity_check(space_362, wells_362.wells[0], wells_362.wells[1],
                           wells_362.wells[2], wells_362.wells[1])


# -----------------------------------------------------
#   TAUX MOYEN
# -----------------------------------------------------

def _admissible(space, wells, beta):
    f = np.full(len(space), 0.25)
    return project_family(wells, 0, 1, f, np.zeros(len(space)), beta)


def test_mean_rate_functional_boundary_conditions(space_362, wells_362):
    f = _admissible(space_362, wells_362, 0.4)
    assert mean_rate_functional(space_362, wells_362, 0, 1, f) >= 0.0
    f[wells_362.wells[2][0]] = 0.5
    with pytest.raises(ZRPDomainError):
        mean_rate_functional(space_362, wells_362, 0, 1, f)
    with pytest.raises(ZRPDomainError):
        mean_rate_functional(space_362, wells_362, 1, 1, f)


def test_mean_rate_scan_consistent(space_362, wells_362, ops_362):
    Fx = np.linspace(0.0, 1.0, len(space_362))
    Fy = np.linspace(1.0, 0.0, len(space_362))
    result = mean_rate_scan(space_362, wells_362, 0, 1, Fx, Fy, ops_362)
    assert 0.0 <= result["beta"] <= 1.0
    f = project_family(wells_362, 0, 1, Fx, Fy, result["beta"])
    assert result["value"] == pytest.approx(
        mean_rate_functional(space_362, wells_362, 0, 1, f, ops_362), rel=1e-12)
    assert result["scaled"] == pytest.approx(6 ** 3 * result["value"])
    f = project_family(wells_362, 0, 1, Fx, Fy, 0.3)
    assert result["value"] <= mean_rate_functional(space_362, wells_362, 0, 1, f, ops_362) * (1 + 1e-6)
