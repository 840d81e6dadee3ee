import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import random_spd
from kcurvature.errors import ConvergenceError
from kcurvature.families import (
    make_h_umbilical,
    make_lambda_quarter,
    make_random,
    make_tracefree_canonical,
    random_rotation,
    rotate,
)
from kcurvature.phi_optimizer import (
    DEGENERATE_MAX,
    MIN_LIKE,
    SADDLE,
    STRICT_MAX,
    critical_point,
    derivative_profile,
    eigenframe_at,
    find_local_max,
    grid_oracle_max,
    lagrange_system,
    phi,
    quarter_bound_check,
    track_critical_frame,
)
from kcurvature.tensor_core import (
    Metric,
    StatStructure,
    SymCubic,
    k_from_c,
    sectional_k_curvature,
)

E3 = np.eye(3)


def negative_minimum():
    return StatStructure.euclidean(SymCubic.from_dict(2, {(0, 0, 0): -3.0, (0, 1, 1): -2.0}))


def zero(n):
    return StatStructure.euclidean(SymCubic.zeros(n))


# ---------------------------------------------------------------- phi


def test_phi_examples():
    assert phi(make_lambda_quarter(3, 2.0), E3[0]) == 2.0
    assert phi(zero(3), E3[1]) == 0.0
    assert phi(negative_minimum(), [1.0, 0.0]) == -3.0


def test_phi_requires_unit():
    with pytest.raises(ValueError, match="unit"):
        phi(zero(2), [1.0, 1.0])


def test_phi_unit_in_metric():
    s = StatStructure(Metric(np.diag([4.0, 1.0])), SymCubic.from_dict(2, {(0, 0, 0): 8.0}))
    assert phi(s, [0.5, 0.0]) == pytest.approx(1.0)


# ---------------------------------------------------------------- derivative profile


def test_profile_lambda_family():
    # Phi(cos t e1 + sin t e2) = 2 cos^3 t + 3 cos t sin^2 t, with third derivative 0 at t = 0
    prof = derivative_profile(make_lambda_quarter(2, 2.0), [1, 0], [0, 1])
    assert prof == pytest.approx((2.0, 0.0, 0.0, 0.0), abs=1e-14)


def test_profile_zero():
    assert derivative_profile(zero(2), [1, 0], [0, 1]) == (0.0, 0.0, 0.0, 0.0)


def test_profile_requires_orthonormal():
    with pytest.raises(ValueError):
        derivative_profile(zero(2), [1, 0], [1, 0])


@pytest.mark.parametrize("seed", range(50))
def test_profile_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 4
    s = make_random(n, seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, 2)))
    u, w = q[:, 0], q[:, 1]
    got = derivative_profile(s, u, w)
    want = oracles.fd_derivatives(s.C, u, w)
    assert np.allclose(got, want, atol=1e-6)


# ---------------------------------------------------------------- find_local_max


def test_max_h_umbilical():
    cp = find_local_max(make_h_umbilical(3, 3.0, 1.0))
    assert cp.value == pytest.approx(3.0, abs=1e-12)
    assert abs(abs(cp.x[0]) - 1.0) <= 1e-10
    assert cp.kind == STRICT_MAX
    assert cp.gap == pytest.approx(1.0, abs=1e-10)
    assert cp.multiplier == pytest.approx(4.5)


def test_max_zero():
    cp = find_local_max(zero(3))
    assert cp.value == 0.0 and cp.kind == DEGENERATE_MAX


def test_max_lambda_family():
    cp = find_local_max(make_lambda_quarter(2, 2.0))
    assert cp.value == pytest.approx(2.0, abs=1e-10)
    assert cp.kind == DEGENERATE_MAX


def test_max_negative_minimum_local():
    cp = find_local_max(negative_minimum(), initial=[[0.99, 0.05]])
    assert cp.value == pytest.approx(-3.0, abs=1e-12)
    assert cp.is_max
    # e1 is only a local maximizer; the global one lies elsewhere
    best = oracles.refined_max(negative_minimum().C)
    assert best > -3.0
    assert find_local_max(negative_minimum()).value == pytest.approx(best, abs=1e-9)


def test_max_deterministic():
    s = make_random(4, 11)
    a, b = find_local_max(s, seed=3), find_local_max(s, seed=3)
    assert np.array_equal(a.x, b.x) and a.value == b.value


def test_max_needs_starts():
    with pytest.raises(ValueError):
        find_local_max(zero(2), starts=0)


def test_max_reports_nonconvergence():
    with pytest.raises(ConvergenceError) as err:
        find_local_max(make_random(3, 1), initial=[[1.0, 0.2, 0.3]], max_iters=1)
    assert err.value.best_residual > 0


def test_max_general_metric(rng):
    g = random_spd(3, rng)
    s = make_random(3, 8, metric=Metric(g))
    cp = find_local_max(s)
    assert s.metric.norm(cp.x) == pytest.approx(1.0, abs=1e-10)
    kxx = k_from_c(s, cp.x, cp.x)
    assert s.metric.norm(kxx - cp.value * cp.x) <= 1e-8 * (1 + abs(cp.value))


@pytest.mark.parametrize("seed", range(30))
def test_first_order_condition(seed):
    n = 2 + seed % 5
    s = make_random(n, seed)
    cp = find_local_max(s, seed=seed)
    kxx = k_from_c(s, cp.x, cp.x)
    q, _ = np.linalg.qr(np.column_stack([cp.x, np.eye(n)]))
    for u in q[:, 1:n].T:
        assert abs(kxx @ u) <= 1e-8
    assert cp.residual <= 1e-8 * (1 + abs(cp.value))
    if cp.kind == STRICT_MAX:
        _, lams = eigenframe_at(s, cp)
        assert np.all(2 * lams[1:] - lams[0] < 0)


def _degenerate_cubics(s, x):
    basis, lams = eigenframe_at(s, critical_point(s, x))
    out = []
    for j in range(1, s.dim):
        if abs(2 * lams[j] - lams[0]) <= 1e-7 * (1 + abs(lams[0])):
            w = basis[:, j]
            out.append(abs(s.cubic(w, w, w)))
    return out


def test_degenerate_direction_cubic_vanishes():
    from kcurvature.adapted_basis import decompose

    s = rotate(make_lambda_quarter(3, 1.7), random_rotation(3, np.random.default_rng(2)))
    e1 = decompose(s).basis[:, 0]
    vals = _degenerate_cubics(s, e1)
    assert len(vals) == 2 and max(vals) <= 1e-6


def test_degenerate_maximizer_accuracy():
    # Phi is flat to fourth order at a degenerate maximum, so the first-order
    # residual only pins the point down to about eps ** (1 / 3)
    s = rotate(make_lambda_quarter(3, 1.7), random_rotation(3, np.random.default_rng(2)))
    cp = find_local_max(s)
    assert cp.kind == DEGENERATE_MAX
    assert max(_degenerate_cubics(s, cp.x), default=0.0) <= 1e-4


def test_classification_kinds():
    s = make_h_umbilical(3, 3.0, 1.0)
    assert critical_point(s, E3[0]).kind == STRICT_MAX
    # -e1: value -3, secondary eigenvalues -1, so 2(-1) - (-3) = 1 > 0
    assert critical_point(s, -E3[0]).kind == MIN_LIKE
    d = make_h_umbilical(3, -1.0, 1.0)
    # K_{e1} secondary values are 1 with lambda_1 = -1: a min-like point
    assert critical_point(d, E3[0]).kind == MIN_LIKE
    mixed = StatStructure.euclidean(SymCubic.from_dict(3, {(0, 0, 0): 1.0, (0, 1, 1): 2.0, (0, 2, 2): -2.0}))
    assert critical_point(mixed, E3[0]).kind == SADDLE


# ---------------------------------------------------------------- grid oracle


def test_grid_lambda_family():
    _, val = grid_oracle_max(make_lambda_quarter(2, 2.0), 100_000)
    assert val == pytest.approx(2.0, abs=1e-8)


def test_grid_negative_minimum():
    assert grid_oracle_max(negative_minimum(), 2000)[1] >= -3.0


def test_grid_zero_and_dim_limit():
    assert grid_oracle_max(zero(3), 50)[1] == 0.0
    with pytest.raises(ValueError):
        grid_oracle_max(zero(4), 10)


def test_grid_returns_unit_vector(rng):
    s = make_random(3, 0, metric=Metric(random_spd(3, rng)))
    x, val = grid_oracle_max(s, 200)
    assert s.metric.norm(x) == pytest.approx(1.0)
    assert s.cubic(x, x, x) == pytest.approx(val)


@pytest.mark.parametrize("seed", range(50))
def test_global_value_matches_oracle(seed):
    n = 2 + seed % 2
    s = make_random(n, 1000 + seed)
    assert find_local_max(s).value == pytest.approx(oracles.refined_max(s.C), abs=1e-6)


# ---------------------------------------------------------------- eigenframe


def test_eigenframe_h_umbilical():
    s = make_h_umbilical(3, 3.0, 1.0)
    basis, lams = eigenframe_at(s, critical_point(s, E3[0]))
    assert lams == pytest.approx([3.0, 1.0, 1.0], abs=1e-12)
    assert sectional_k_curvature(s, (basis[:, 0], basis[:, 1])) == pytest.approx(2.0, abs=1e-12)


def test_eigenframe_lambda_family():
    s = make_lambda_quarter(3, 2.0)
    basis, lams = eigenframe_at(s, find_local_max(s))
    assert lams == pytest.approx([2.0, 1.0, 1.0], abs=1e-8)
    for j in (1, 2):
        assert sectional_k_curvature(s, (basis[:, 0], basis[:, j])) == pytest.approx(1.0, abs=1e-8)


def test_eigenframe_zero():
    _, lams = eigenframe_at(zero(3), find_local_max(zero(3)))
    assert np.array_equal(lams, np.zeros(3))


def test_eigenframe_rejects_non_critical():
    s = make_h_umbilical(3, 3.0, 1.0)
    bogus = critical_point(s, np.array([0.6, 0.8, 0.0]))
    with pytest.raises(ValueError):
        eigenframe_at(s, bogus)


@pytest.mark.parametrize("seed", range(10))
def test_eigenframe_curvature_formula(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 4
    s = make_random(n, seed, metric=Metric(random_spd(n, rng)))
    basis, lams = eigenframe_at(s, find_local_max(s))
    assert np.allclose(basis.T @ s.metric.gram @ basis, np.eye(n), atol=1e-10)
    assert np.all(np.diff(lams[1:]) <= 1e-12)
    for j in range(1, n):
        k = sectional_k_curvature(s, (basis[:, 0], basis[:, j]))
        assert k == pytest.approx(lams[j] * (lams[0] - lams[j]), abs=1e-8)


# ---------------------------------------------------------------- quarter bound


def test_quarter_bound_equality():
    s = make_lambda_quarter(3, 2.0)
    e1 = critical_point(s, E3[0])
    x = np.array([0.0, 0.6, 0.8])
    res = quarter_bound_check(s, e1, x)
    assert res.k == pytest.approx(1.0) and res.bound == 1.0
    assert not res.strict and res.eigenvector_residual <= 1e-6


def test_quarter_bound_strict():
    s = make_h_umbilical(3, 3.0, 1.0)
    res = quarter_bound_check(s, critical_point(s, E3[0]), E3[1])
    assert res.k == pytest.approx(2.0) and res.bound == 2.25 and res.strict


def test_quarter_bound_zero():
    s = zero(3)
    res = quarter_bound_check(s, critical_point(s, E3[0]), E3[1])
    assert (res.k, res.bound, res.strict) == (0.0, 0.0, False)


def test_quarter_bound_preconditions():
    s = make_h_umbilical(3, 3.0, 1.0)
    with pytest.raises(ValueError):
        quarter_bound_check(s, critical_point(s, -E3[0]), E3[1])
    with pytest.raises(ValueError):
        quarter_bound_check(s, critical_point(s, E3[0]), [0.6, 0.8, 0.0])


@given(seed=st.integers(0, 5000))
def test_quarter_bound_holds_at_maxima(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 4
    s = make_random(n, seed)
    e1 = find_local_max(s)
    x = rng.standard_normal(n)
    x -= (x @ e1.x) * e1.x
    x /= np.linalg.norm(x)
    res = quarter_bound_check(s, e1, x)
    assert res.k <= res.bound + 1e-9 * (1 + res.bound)


# ---------------------------------------------------------------- tracking


def test_lagrange_jacobian_matches_fd(rng):
    s = make_random(3, 4)
    y, lam = rng.standard_normal(3), 0.7
    res, jac = lagrange_system(s, y, lam)
    h = 1e-6
    z = np.append(y, lam)
    for j in range(4):
        dz = np.zeros(4)
        dz[j] = h
        rp, _ = lagrange_system(s, (z + dz)[:3], (z + dz)[3])
        rm, _ = lagrange_system(s, (z - dz)[:3], (z - dz)[3])
        assert np.allclose((rp - rm) / (2 * h), jac[:, j], atol=1e-7)


def test_track_constant_family():
    s = make_h_umbilical(3, 3.0, 1.0)
    path = track_critical_frame(lambda t: s, 10, critical_point(s, E3[0]))
    assert len(path.ts) == 11
    assert max(path.residuals) <= 1e-12
    for p in path.points:
        assert np.allclose(p.x, E3[0], atol=1e-12)


def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def test_track_rotation_family():
    base = make_h_umbilical(2, 3.0, 1.0)

    def family(t):
        return rotate(base, _rotation(t * np.pi / 4))

    path = track_critical_frame(family, 50, critical_point(base, [1.0, 0.0]))
    assert len(path.ts) == 51
    for t, p, r in zip(path.ts, path.points, path.residuals):
        assert np.allclose(p.x, _rotation(t * np.pi / 4) @ [1.0, 0.0], atol=1e-8)
        assert r <= 1e-10


def test_track_linear_blend():
    a, b = make_tracefree_canonical(3, -1.0), make_tracefree_canonical(3, -4.0)

    def family(t):
        return StatStructure.euclidean(SymCubic(3, (1 - t) * a.cubic.entries + t * b.cubic.entries))

    start = find_local_max(a)
    path = track_critical_frame(family, 20, start)
    assert max(path.residuals) <= 1e-10
    for p, q in zip(path.points, path.points[1:]):
        assert p.x @ q.x > 0
    # each node is reproduced by a fresh local search started there
    for t, p in zip(path.ts, path.points):
        again = find_local_max(family(t), initial=[p.x])
        assert np.allclose(again.x, p.x, atol=1e-8)


def test_track_rejects_degenerate_start():
    s = make_lambda_quarter(2, 2.0)
    with pytest.raises(ValueError):
        track_critical_frame(lambda t: s, 5, find_local_max(s))


def test_track_reports_underflow():
    base = make_h_umbilical(2, 3.0, 1.0)

    def family(t):
        # the maximizer jumps discontinuously at t = 0.5
        return base if t < 0.5 else rotate(base, _rotation(np.pi / 2))

    with pytest.raises(ConvergenceError) as err:
        track_critical_frame(family, 4, critical_point(base, [1.0, 0.0]))
    assert err.value.last_good == pytest.approx(0.25, abs=0.25)


def test_track_rejects_bad_steps():
    s = make_h_umbilical(2, 3.0, 1.0)
    with pytest.raises(ValueError):
        track_critical_frame(lambda t: s, 0, critical_point(s, [1.0, 0.0]))
