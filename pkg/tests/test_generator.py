import math

import numpy as np
import pytest

from tazrp.configspace import Configuration, enumerate_space
from tazrp.exceptions import ZRPDimensionError, ZRPDomainError
from tazrp.generator import (
    apply,
    build,
    build_all,
    cycle_form,
    cycle_generators,
    cycle_operator,
    cycle_sum,
    dirichlet_form,
    dump_coo_csv,
    inner_product,
    jump_rate,
    sector_condition_scan,
)
from tazrp.utils.serialization import read_artifact


# -----------------------------------------------------
#   TAUX
# -----------------------------------------------------

def test_jump_rate_values():
    assert jump_rate(0, 2.0) == 0.0
    assert jump_rate(1, 3.0) == 1.0
    assert jump_rate(2, 4.0) == pytest.approx(16.0)
    assert jump_rate(10, 2.0) < jump_rate(5, 2.0)
    with pytest.raises(ZRPDomainError):
        jump_rate(-1, 2.0)


# -----------------------------------------------------
#   OPÉRATEURS
# -----------------------------------------------------

def test_two_sites_single_particle_swap():
    space = enumerate_space(2, 1, 1.0)
    forward = build(space, "forward").matrix.toarray()
    assert np.allclose(forward, [[-1.0, 1.0], [1.0, -1.0]])


def test_unknown_kind(space_332):
    with pytest.raises(ZRPDomainError):
        build(space_332, "backward")


def test_row_sums_and_stationarity(space_362, ops_362):
    for op in ops_362.values():
        assert op.row_sum_residual() < 1e-12
        assert op.stationarity_residual() < 1e-12
    assert np.allclose(apply(ops_362["forward"], np.ones(len(space_362))), 0.0, atol=1e-12)


def test_generator_has_zero_mean(space_332, rng):
    forward = build(space_332, "forward")
    ones = np.ones(len(space_332))
    for _ in range(20):
        F = rng.standard_normal(len(space_332))
        assert inner_product(space_332, forward.apply(F), ones) == pytest.approx(0.0, abs=1e-12)


def test_symmetric_is_average(space_362, ops_362, rng):
    F = rng.standard_normal(len(space_362))
    average = 0.5 * (ops_362["forward"] @ F + ops_362["adjoint"] @ F)
    assert np.allclose(ops_362["symmetric"] @ F, average, rtol=0, atol=1e-12)


def test_adjoint_relation(rng):
    space = enumerate_space(3, 5, 2.0)
    ops = build_all(space)
    for _ in range(60):
        F = rng.standard_normal(len(space))
        G = rng.standard_normal(len(space))
        LF = ops["forward"] @ F
        lhs = inner_product(space, LF, G)
        rhs = inner_product(space, F, ops["adjoint"] @ G)
        scale = math.sqrt(inner_product(space, LF, LF) * inner_product(space, G, G))
        assert abs(lhs - rhs) <= 1e-11 * scale


def test_diagonal_is_minus_total_rate(space_362, ops_362):
    eta = space_362.index_of((3, 2, 1))
    indicator = np.zeros(len(space_362))
    indicator[eta] = 1.0
    expected = -(jump_rate(3, 2.0) + jump_rate(2, 2.0) + jump_rate(1, 2.0))
    assert (ops_362["forward"] @ indicator)[eta] == pytest.approx(expected)


def test_two_sites_reversible():
    space = enumerate_space(2, 4, 2.0)
    ops = build_all(space)
    assert space.reversible
    assert np.allclose(ops["forward"].matrix.toarray(), ops["adjoint"].matrix.toarray())


def test_apply_dimension(ops_362):
    with pytest.raises(ZRPDimensionError):
        ops_362["forward"].apply(np.ones(3))


# -----------------------------------------------------
#   FORMES DE DIRICHLET
# -----------------------------------------------------

def test_dirichlet_form_constant_and_scaling(rng):
    space = enumerate_space(3, 6, 3.0)
    symmetric = build(space, "symmetric")
    assert dirichlet_form(space, np.full(len(space), 2.5)) == pytest.approx(0.0, abs=1e-15)
    F = rng.standard_normal(len(space))
    edges = dirichlet_form(space, F)
    assert edges == pytest.approx(dirichlet_form(space, F, symmetric), rel=1e-12)
    assert dirichlet_form(space, 3.0 * F) == pytest.approx(9.0 * edges, rel=1e-12)


def test_sector_condition():
    space = enumerate_space(3, 8, 2.0)
    result = sector_condition_scan(space, samples=1000, seed=1)
    assert result["ok"]
    assert result["bound"] == 36.0
    assert 0 < result["worst_ratio"] <= 36.0


# -----------------------------------------------------
#   CYCLES
# -----------------------------------------------------

def test_cycle_forms_sum_to_dirichlet(rng):
    space = enumerate_space(3, 4, 2.0)
    F = rng.standard_normal(len(space))
    total = math.fsum(cycle_form(space, c.xi, F) for c in cycle_generators(space))
    assert total == pytest.approx(dirichlet_form(space, F), rel=1e-12)
    assert cycle_form(space, (1, 1, 1), np.ones(len(space))) == 0.0


def test_cycle_sum_equals_forward(space_362, ops_362):
    difference = cycle_sum(space_362) - ops_362["forward"].matrix
    assert np.max(np.abs(difference.toarray())) < 1e-12


def test_single_cycle_two_sites(rng):
    space = enumerate_space(2, 2, 2.0)
    F = rng.standard_normal(len(space))
    cycle = cycle_operator(space, (1, 0))
    members = [space.state(i).occupations for i in cycle.ordinals]
    assert members == [(2, 0), (1, 1)]
    f20 = F[space.index_of((2, 0))]
    f11 = F[space.index_of((1, 1))]
    weight = 2.0 ** 2 / (2.0 * space.Z)
    expected = weight * ((f11 - f20) ** 2 + (f20 - f11) ** 2)
    assert cycle_form(space, Configuration((1, 0)), F) == pytest.approx(expected, rel=1e-12)


def test_cycle_requires_n_minus_one(space_332):
    with pytest.raises(ZRPDomainError):
        cycle_operator(space_332, (1, 1, 1))


# -----------------------------------------------------
#   EXPORT
# -----------------------------------------------------

def test_dump_coo_csv(tmp_path, space_332):
    op = build(space_332, "forward")
    path = tmp_path / "forward.csv.zst"
    data = dump_coo_csv(op, path)
    lines = data.decode("utf-8").splitlines()
    assert lines[0] == "# schema: tazrp.operator/1"
    assert lines[1] == "row,col,rate"
    assert len(lines) == 2 + op.off_diagonal.nnz
    assert read_artifact(path) == data
