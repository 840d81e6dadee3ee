import json
from math import sqrt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import random_spd
from kcurvature.adapted_basis import (
    AdaptedDecomposition,
    curvature_operator_residual,
    decompose,
    diagonalize_commuting,
    is_constant_curvature,
    mu_from_lambda,
)
from kcurvature.errors import NotConstantCurvatureError
from kcurvature.families import (
    make_diagonal,
    make_h_umbilical,
    make_lambda_quarter,
    make_random,
    make_tracefree_canonical,
    random_rotation,
    rotate,
    tracefree_canonical_params,
    tracefree_part,
)
from kcurvature.phi_optimizer import find_local_max, grid_oracle_max
from kcurvature.tensor_core import Metric, StatStructure, SymCubic, project_k, sectional_k_curvature


def zero(n):
    return StatStructure.euclidean(SymCubic.zeros(n))


def check_invariants(d, s):
    n = s.dim
    g = s.metric.gram
    assert np.allclose(d.basis.T @ g @ d.basis, np.eye(n), atol=1e-10)
    assert d.residual <= 1e-8
    assert np.max(np.abs(d.rebuild(s.metric).C - s.C)) <= 1e-8 * max(1.0, s.cubic.max_abs)
    for i in range(n - 1):
        assert d.As[i + 1] == pytest.approx(d.As[i] - d.mus[i] ** 2, abs=1e-10)
        assert -d.As[i] + d.lambdas[i] * d.mus[i] - d.mus[i] ** 2 == pytest.approx(0.0, abs=1e-7)


# ---------------------------------------------------------------- detection


def test_constant_lambda_family():
    assert is_constant_curvature(make_lambda_quarter(4, 2.0)) == pytest.approx(1.0, abs=1e-12)


def test_constant_zero():
    assert is_constant_curvature(zero(3)) == 0.0


def test_not_constant_h_umbilical():
    assert is_constant_curvature(make_h_umbilical(3, 3.0, 1.0)) is None


def test_constant_needs_positive_tol():
    with pytest.raises(ValueError):
        is_constant_curvature(zero(2), tol=-1.0)


def test_constant_one_dimensional():
    assert curvature_operator_residual(zero(1)) == (0.0, 0.0)


def test_constant_with_metric(rng):
    # push a constant-curvature structure through a non-orthonormal change of basis
    base = make_tracefree_canonical(3, -2.0)
    m = Metric(random_spd(3, rng))
    inv = np.linalg.inv(m.frame)
    c = np.einsum("abc,ai,bj,ck->ijk", base.C, inv, inv, inv)
    s = StatStructure(m, SymCubic.symmetrize(c))
    assert is_constant_curvature(s) == pytest.approx(-2.0, abs=1e-9)


# ---------------------------------------------------------------- mu_from_lambda


def test_mu_examples():
    assert mu_from_lambda(2.0, 1.0) == 1.0
    assert mu_from_lambda(5.0, 0.0) == 0.0
    assert mu_from_lambda(2 / sqrt(3), -1.0) == pytest.approx(-1 / sqrt(3), abs=1e-12)


def test_mu_inconsistent():
    with pytest.raises(ValueError, match="inconsistent"):
        mu_from_lambda(1.0, 1.0)


def test_mu_clamps_rounding():
    assert mu_from_lambda(2.0, 1.0 + 1e-14) == pytest.approx(1.0)


@given(lam=st.floats(-10, 10), a=st.floats(-10, 10))
def test_mu_solves_quadratic(lam, a):
    if lam * lam - 4 * a < 0:
        with pytest.raises(ValueError):
            mu_from_lambda(lam, a, clamp=0.0)
        return
    mu = mu_from_lambda(lam, a)
    assert -a + lam * mu - mu * mu == pytest.approx(0.0, abs=1e-12 * (1 + lam * lam + abs(a)))


# ---------------------------------------------------------------- decompose


def test_decompose_lambda_family():
    s = make_lambda_quarter(3, 2.0)
    d = decompose(s)
    assert d.lambdas[0] == pytest.approx(2.0)
    assert d.mus[0] == pytest.approx(1.0)
    assert d.As == pytest.approx([1.0, 0.0, 0.0], abs=1e-12)
    assert d.residual <= 1e-14
    assert 0 in d.degenerate_levels
    check_invariants(d, s)


def test_decompose_tracefree_frozen():
    d = decompose(make_tracefree_canonical(3, -3.0))
    want = oracles.TRACEFREE_3_M3
    assert d.lambdas == pytest.approx(want["lambdas"], abs=1e-8)
    assert d.mus == pytest.approx(want["mus"], abs=1e-8)
    assert d.As == pytest.approx(want["As"], abs=1e-8)
    assert d.unique_parameters


def test_decompose_zero():
    d = decompose(zero(3))
    assert np.array_equal(d.basis, np.eye(3))
    assert not d.lambdas.any() and not d.mus.any() and not d.As.any()


def test_decompose_rejects_non_constant():
    with pytest.raises(NotConstantCurvatureError):
        decompose(make_h_umbilical(3, 3.0, 1.0))


GENERATORS = [
    lambda q: rotate(make_lambda_quarter(len(q), 1.3), q),
    lambda q: rotate(make_lambda_quarter(len(q), -0.8), q),
    lambda q: rotate(make_h_umbilical(len(q), 1.0, 0.5), q),
    lambda q: rotate(make_tracefree_canonical(len(q), -1.7), q),
]


@pytest.mark.parametrize("gen", range(len(GENERATORS)))
@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_decompose_round_trip_all_generators(gen, n):
    q = random_rotation(n, np.random.default_rng(10 * gen + n))
    s = GENERATORS[gen](q)
    A = is_constant_curvature(s)
    d = decompose(s)
    assert abs(d.A - A) <= 1e-8
    check_invariants(d, s)


def test_decompose_general_metric(rng):
    base = make_tracefree_canonical(3, -1.0)
    m = Metric(random_spd(3, rng))
    inv = np.linalg.inv(m.frame)
    s = StatStructure(m, SymCubic.symmetrize(np.einsum("abc,ai,bj,ck->ijk", base.C, inv, inv, inv)))
    d = decompose(s)
    lams, mus, _ = tracefree_canonical_params(3, -1.0)
    assert d.lambdas == pytest.approx(lams, abs=1e-7)
    assert d.mus == pytest.approx(mus, abs=1e-7)
    check_invariants(d, s)


def test_tracefree_uniqueness_across_seeds():
    s = rotate(make_tracefree_canonical(4, -2.0), random_rotation(4, np.random.default_rng(5)))
    runs = [decompose(s, seed=seed) for seed in range(5)]
    for d in runs[1:]:
        assert np.allclose(d.lambdas, runs[0].lambdas, atol=1e-7)
        assert np.allclose(d.mus, runs[0].mus, atol=1e-7)


@pytest.mark.parametrize("n", [2, 3])
def test_tracefree_local_max_is_global(n):
    s = rotate(make_tracefree_canonical(n, -1.5), random_rotation(n, np.random.default_rng(n)))
    _, top = grid_oracle_max(s, 2000)
    top = max(top, oracles.refined_max(s.C))
    for seed in range(5):
        cp = find_local_max(s, starts=4, seed=seed)
        if cp.is_max:
            assert cp.value == pytest.approx(top, abs=1e-7)


def test_quarter_bound_equality_gives_lambda_pattern():
    lam = 1.6
    s = rotate(make_lambda_quarter(4, lam), random_rotation(4, np.random.default_rng(0)))
    d = decompose(s)
    assert d.A == pytest.approx(lam * lam / 4)
    assert d.mus[0] == pytest.approx(d.lambdas[0] / 2, abs=1e-8)
    assert project_k(s, d.basis[:, 0]).cubic.max_abs <= 1e-8


def test_decomposition_json_round_trip():
    d = decompose(make_tracefree_canonical(3, -3.0))
    again = AdaptedDecomposition.from_dict(json.loads(json.dumps(d.to_dict())))
    assert np.array_equal(again.basis, d.basis)
    assert np.array_equal(again.lambdas, d.lambdas)
    assert set(d.to_dict()) >= {"A", "basis", "lambdas", "mus", "As", "residual"}
    k = sectional_k_curvature(again.rebuild(), ([1, 0, 0], [0, 1, 0]))
    assert k == pytest.approx(-3.0, abs=1e-8)


# ---------------------------------------------------------------- commuting case


def test_diagonalize_rotated():
    s = rotate(make_diagonal([1.0, 2.0, 3.0]), random_rotation(3, np.random.default_rng(1)))
    basis, values = diagonalize_commuting(s)
    assert values == pytest.approx([3.0, 2.0, 1.0], abs=1e-10)
    k = np.einsum("abc,ai,bj,ck->ijk", s.C, basis, basis, basis)
    assert np.allclose(k, np.einsum("i,ij,ik->ijk", values, np.eye(3), np.eye(3)), atol=1e-10)


def test_diagonalize_zero():
    _, values = diagonalize_commuting(zero(3))
    assert not values.any()


def test_diagonalize_rejects_tracefree_candidate():
    s = tracefree_part(make_diagonal([1.0, -1.0]))
    with pytest.raises(ValueError):
        diagonalize_commuting(s)


def test_diagonalize_rejects_noncommuting():
    with pytest.raises(ValueError):
        diagonalize_commuting(make_random(3, 0))


def test_diagonalize_with_metric(rng):
    m = Metric(random_spd(3, rng))
    f = m.frame
    inv = np.linalg.inv(f)
    c = np.einsum("abc,ai,bj,ck->ijk", make_diagonal([0.5, -2.0, 1.0]).C, inv, inv, inv)
    s = StatStructure(m, SymCubic.symmetrize(c))
    basis, values = diagonalize_commuting(s)
    assert np.allclose(basis.T @ m.gram @ basis, np.eye(3), atol=1e-10)
    assert values == pytest.approx([2.0, 1.0, 0.5], abs=1e-9)
