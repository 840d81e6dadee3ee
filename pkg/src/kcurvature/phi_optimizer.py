"""Critical points of ``Phi(X) = C(X, X, X)`` on the g-unit sphere.

Maximizers of ``Phi`` are unit Z-eigenvectors of the cubic form:
``K(e1, e1) = Phi(e1) e1``.  They are located with a shifted symmetric
higher-order power iteration (one batch for all starts), polished with a
Riemannian Newton step, and classified through the eigenvalues of ``K_{e1}``
on ``e1^perp``.  ``track_critical_frame`` follows a nondegenerate maximizer
along a one-parameter family by Newton continuation on the Lagrange system.

All iterations run in the g-orthonormal coordinates of ``Metric.frame``;
results are mapped back to the caller's coordinates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConvergenceError
from .tensor_core import StatStructure, k_operator, packed_indices, sectional_k_curvature

log = logging.getLogger(__name__)

STRICT_MAX = "strict_max"
DEGENERATE_MAX = "degenerate_max"
SADDLE = "saddle"
MIN_LIKE = "min_like"
MAX_KINDS = (STRICT_MAX, DEGENERATE_MAX)


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    """A critical point of ``Phi`` on the unit sphere.

    ``multiplier`` is the Lagrange multiplier of ``C(y,y,y) - m (|y|^2 - 1)``,
    i.e. ``1.5 * value``.  ``gap = lambda_1 - 2 max_j lambda_j`` over the
    secondary eigenvalues of ``K_x``; positive gaps mean a strict maximum.
    """

    x: np.ndarray
    value: float
    multiplier: float
    kind: str
    gap: float
    residual: float = 0.0

    @property
    def is_max(self) -> bool:
        return self.kind in MAX_KINDS


@dataclass
class FramePath:
    ts: list = field(default_factory=list)
    points: list = field(default_factory=list)
    residuals: list = field(default_factory=list)


class QuarterBound(NamedTuple):
    k: float
    bound: float
    strict: bool
    eigenvector_residual: float | None


# ---------------------------------------------------------------------------
# helpers in orthonormal coordinates


def _cubic_vec(c, y):
    """``C(., y, y)`` for a single vector or a batch of row vectors."""
    if y.ndim == 1:
        return np.einsum("abc,b,c->a", c, y, y)
    return np.einsum("abc,sb,sc->sa", c, y, y)


def _complement(y):
    """Orthonormal basis of ``y^perp`` (Euclidean), as columns."""
    n = y.size
    q, _ = np.linalg.qr(np.column_stack([y, np.eye(n)]))
    return q[:, 1:n]


def _shift(c) -> float:
    n = c.shape[0]
    # sum_b |K_{e_b}|_2^2 bounds rho(K_x)^2 over the unit sphere
    bound = np.sqrt(sum(np.linalg.norm(c[b], 2) ** 2 for b in range(n)))
    return 1.0 + max(3.0 * n * float(np.max(np.abs(c))), 2.0 * float(bound))


def _classify(c, y):
    n = y.size
    value = float(np.einsum("abc,a,b,c->", c, y, y, y))
    residual = float(np.linalg.norm(_cubic_vec(c, y) - value * y))
    if n == 1:
        return value, residual, STRICT_MAX, float("inf")
    q = _complement(y)
    secondary = np.linalg.eigvalsh(q.T @ np.einsum("abc,b->ac", c, y) @ q)
    d = 2.0 * secondary - value
    eps = 1e-7 * (1.0 + abs(value))
    if np.all(d < -eps):
        kind = STRICT_MAX
    elif np.all(d <= eps):
        kind = DEGENERATE_MAX
    elif np.all(d > eps):
        kind = MIN_LIKE
    else:
        kind = SADDLE
    return value, residual, kind, float(value - 2.0 * np.max(secondary))


def _newton_polish(c, y, max_iter=100):
    """Riemannian Newton on the sphere for ``grad Phi = 0``.

    Steps that lower ``Phi`` beyond rounding are rejected, so a point near a
    maximum is not pushed to a neighbouring saddle.
    """
    value = float(np.einsum("abc,a,b,c->", c, y, y, y))
    best_res = np.linalg.norm(_cubic_vec(c, y) - value * y)
    scale = 1.0 + float(np.max(np.abs(c)))
    for _ in range(max_iter):
        if best_res <= 1e-15 * scale:
            break
        q = _complement(y)
        grad = q.T @ _cubic_vec(c, y)
        hess = 2.0 * q.T @ np.einsum("abc,b->ac", c, y) @ q - value * np.eye(q.shape[1])
        eta = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        trial = y + q @ eta
        trial /= np.linalg.norm(trial)
        tv = float(np.einsum("abc,a,b,c->", c, trial, trial, trial))
        tres = np.linalg.norm(_cubic_vec(c, trial) - tv * trial)
        if tv < value - 1e-13 * scale or tres >= best_res:
            break
        y, value, best_res = trial, tv, tres
    return y


# ---------------------------------------------------------------------------
# public operations


def phi(s: StatStructure, x, tol: float = 1e-8) -> float:
    """``Phi(x) = C(x, x, x)`` for a g-unit vector ``x``."""
    x = np.asarray(x, dtype=float)
    s._check(x)
    if abs(s.metric.norm(x) - 1.0) > tol:
        raise ValueError("phi is defined on the unit sphere; |x|_g != 1")
    return s.cubic(x, x, x)


def derivative_profile(s: StatStructure, u, w, tol: float = 1e-8):
    """``Phi`` and its first three derivatives along ``cos t u + sin t w`` at 0.

    Uses ``Phi'(0) = 3C(u,u,w)``, ``Phi''(0) = 3(2C(w,w,u) - C(u,u,u))`` and
    ``Phi'''(0) = 3(-7C(w,u,u) + 2C(w,w,w))``.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    s._check(u, w)
    g = s.metric
    if abs(g.norm(u) - 1) > tol or abs(g.norm(w) - 1) > tol or abs(g.inner(u, w)) > tol:
        raise ValueError("u and w must be g-orthonormal")
    c = s.cubic
    uuu, uuw, wwu, www = c(u, u, u), c(u, u, w), c(w, w, u), c(w, w, w)
    return (uuu, 3.0 * uuw, 3.0 * (2.0 * wwu - uuu), 3.0 * (-7.0 * uuw + 2.0 * www))


def critical_point(s: StatStructure, x) -> CriticalPoint:
    """Evaluate and classify ``x`` (assumed g-unit) as a critical point."""
    so, f = s.orthonormal()
    y = s.metric.chol.T @ np.asarray(x, dtype=float)
    value, residual, kind, gap = _classify(so.C, y)
    return CriticalPoint(np.asarray(x, dtype=float), value, 1.5 * value, kind, gap, residual)


def _starts(n, starts, seed):
    rows = []
    for child in np.random.SeedSequence(seed).spawn(starts):
        v = np.random.default_rng(child).standard_normal(n)
        rows.append(v / np.linalg.norm(v))
    eye = np.eye(n)
    rows.extend(eye)
    rows.extend(-eye)
    return np.array(rows)


def find_local_max(
    s: StatStructure,
    starts: int = 16,
    seed: int = 0,
    initial=None,
    max_iters: int = 10_000,
    step_tol: float = 1e-12,
) -> CriticalPoint:
    """Best local maximizer of ``Phi`` over a batch of starts.

    Parameters
    ----------
    starts : int
        Number of seeded random unit starts; the ``2n`` vectors ``+-e_i`` of
        the orthonormal frame are always added.
    initial : array_like, optional
        Explicit starting vectors (rows, caller's coordinates).  When given,
        they replace the default starts.
    max_iters, step_tol : int, float
        Power-iteration budget and step-size stopping rule.

    Returns
    -------
    CriticalPoint
        The maximum-kind point with the largest value; ties are broken by the
        lexicographically largest vector.

    Raises
    ------
    ConvergenceError
        If no start reaches a first-order residual below
        ``1e-8 (1 + |value|)``.
    """
    if starts < 1 and initial is None:
        raise ValueError("need at least one start")
    so, f = s.orthonormal()
    c = so.C
    n = s.dim
    if initial is None:
        y = _starts(n, starts, seed)
    else:
        init = np.atleast_2d(np.asarray(initial, dtype=float))
        y = init @ s.metric.chol  # rows: (L^T x)^T
        y = y / np.linalg.norm(y, axis=1, keepdims=True)

    tau = _shift(c)
    active = np.ones(len(y), dtype=bool)
    for it in range(max_iters):
        if not active.any():
            break
        ya = y[active]
        nxt = _cubic_vec(c, ya) + tau * ya
        nxt /= np.linalg.norm(nxt, axis=1, keepdims=True)
        step = np.linalg.norm(nxt - ya, axis=1)
        y[active] = nxt
        idx = np.flatnonzero(active)
        active[idx[step <= step_tol]] = False
    log.debug("power iteration stopped after %d sweeps, %d unconverged", it, int(active.sum()))

    candidates = []
    best_residual = np.inf
    for row in y:
        row = _newton_polish(c, row)
        value, residual, kind, gap = _classify(c, row)
        best_residual = min(best_residual, residual)
        if residual <= 1e-8 * (1.0 + abs(value)):
            candidates.append((row, value, residual, kind, gap))
    if not candidates:
        raise ConvergenceError("no start converged to a critical point", best_residual=best_residual)

    maxima = [cand for cand in candidates if cand[3] in MAX_KINDS] or candidates
    top = max(cand[1] for cand in maxima)
    tied = [cand for cand in maxima if cand[1] >= top - 1e-12 * (1.0 + abs(top))]
    row, value, residual, kind, gap = max(tied, key=lambda cand: tuple(f @ cand[0]))
    return CriticalPoint(f @ row, value, 1.5 * value, kind, gap, residual)


def _sphere_grid(n, resolution):
    if n == 1:
        yield np.array([[1.0], [-1.0]])
    elif n == 2:
        t = 2.0 * np.pi * np.arange(resolution) / resolution
        yield np.column_stack([np.cos(t), np.sin(t)])
    else:
        theta = np.linspace(0.0, np.pi, resolution)
        ph = 2.0 * np.pi * np.arange(resolution) / resolution
        cp, sp = np.cos(ph), np.sin(ph)
        for lo in range(0, resolution, 256):
            th = theta[lo:lo + 256, None]
            st = np.sin(th)
            yield np.stack([np.broadcast_to(np.cos(th), (th.size, resolution)), st * cp, st * sp], axis=-1).reshape(-1, 3)


def grid_oracle_max(s: StatStructure, resolution: int):
    """Brute-force maximum of ``Phi`` over a uniform angular grid (dim <= 3).

    Independent of the iterative solver; accurate to the grid spacing.
    """
    if s.dim > 3:
        raise ValueError("grid oracle supports dimension <= 3 only")
    so, f = s.orthonormal()
    terms = [
        (len({(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}) * val, i, j, k)
        for val, (i, j, k) in zip(so.cubic.entries, packed_indices(s.dim))
        if val != 0.0
    ]
    best_val, best_y = -np.inf, None
    for pts in _sphere_grid(s.dim, resolution):
        vals = np.zeros(len(pts))
        for coef, i, j, k in terms:
            vals += coef * pts[:, i] * pts[:, j] * pts[:, k]
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_y = float(vals[i]), pts[i].copy()
    return f @ best_y, best_val


def eigenframe_at(s: StatStructure, e1: CriticalPoint, tol: float = 1e-8):
    """g-orthonormal eigenbasis of ``K_{e1}`` with ``e1`` first.

    Returns ``(basis, eigenvalues)``; ``basis[:, j]`` is ``e_{j+1}`` and the
    eigenvalues after ``lambda_1`` are sorted in decreasing order.
    """
    so, f = s.orthonormal()
    y = s.metric.chol.T @ np.asarray(e1.x, dtype=float)
    value = float(np.einsum("abc,a,b,c->", so.C, y, y, y))
    residual = float(np.linalg.norm(_cubic_vec(so.C, y) - value * y))
    if residual > tol * (1.0 + abs(value)):
        raise ValueError(f"e1 is not a critical point (residual {residual:.3e})")
    if s.dim == 1:
        return f @ y[:, None], np.array([value])
    q = _complement(y)
    w, v = np.linalg.eigh(q.T @ np.einsum("abc,b->ac", so.C, y) @ q)
    order = np.argsort(-w, kind="stable")
    basis = np.column_stack([y, q @ v[:, order]])
    return f @ basis, np.concatenate([[value], w[order]])


def quarter_bound_check(s: StatStructure, e1: CriticalPoint, x, eps: float = 1e-9) -> QuarterBound:
    """Compare ``k(e1 ^ x)`` with ``lambda_1^2 / 4`` at a local maximizer.

    At equality ``x`` must be an eigenvector of ``K_{e1}`` for ``lambda_1/2``;
    the returned ``eigenvector_residual`` measures that (``None`` when the
    inequality is strict).
    """
    if not e1.is_max:
        raise ValueError("e1 must be a local maximizer of Phi")
    x = np.asarray(x, dtype=float)
    g = s.metric
    if abs(g.norm(x) - 1.0) > 1e-8 or abs(g.inner(x, e1.x)) > 1e-8:
        raise ValueError("x must be a unit vector orthogonal to e1")
    lam1 = e1.value
    k = sectional_k_curvature(s, (e1.x, x))
    bound = lam1 * lam1 / 4.0
    tol = eps * (1.0 + bound)
    if k < bound - tol:
        return QuarterBound(k, bound, True, None)
    r = g.norm(k_operator(s, e1.x) @ x - 0.5 * lam1 * x)
    return QuarterBound(k, bound, False, r)


# ---------------------------------------------------------------------------
# continuation


def lagrange_system(s: StatStructure, y, lam):
    """Residual and Jacobian of ``F(y, lam) = (3 C(., y, y) - 2 lam g y, g(y, y) - 1)``."""
    g = s.metric.gram
    gy = g @ y
    res = np.concatenate([3.0 * np.einsum("abc,b,c->a", s.C, y, y) - 2.0 * lam * gy, [y @ gy - 1.0]])
    n = s.dim
    jac = np.zeros((n + 1, n + 1))
    jac[:n, :n] = 6.0 * np.einsum("abc,b->ac", s.C, y) - 2.0 * lam * g
    jac[:n, n] = -2.0 * gy
    jac[n, :n] = 2.0 * gy
    return res, jac


def _newton_lagrange(s, y, lam, accept=1e-10, max_iter=30):
    scale = 1.0 + s.cubic.max_abs
    best = None
    for _ in range(max_iter):
        res, jac = lagrange_system(s, y, lam)
        r = float(np.max(np.abs(res)))
        if best is None or r < best[2]:
            best = (y.copy(), lam, r)
        if r <= 1e-14 * scale:
            break
        try:
            delta = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            break
        y = y + delta[:-1]
        lam = lam + delta[-1]
    if best is None or best[2] > accept:
        return None
    return best


def track_critical_frame(
    family: Callable[[float], StatStructure],
    steps: int,
    start: CriticalPoint,
    min_step: float = 1e-4,
) -> FramePath:
    """Follow a strict maximizer of ``Phi`` along ``t -> family(t)``, ``t in [0, 1]``.

    Each node is a Newton solve of the Lagrange system warm-started from the
    previous node.  A step is retried with half the length when Newton fails
    or the frame flips sign; steps shorter than ``min_step`` abort.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    s0 = family(0.0)
    if start.kind != STRICT_MAX:
        raise ValueError("tracking needs a nondegenerate (strict) maximizer at t=0")
    y = np.asarray(start.x, dtype=float)
    lam = 1.5 * start.value
    _, jac = lagrange_system(s0, y, lam)
    sv = np.linalg.svd(jac, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise ConvergenceError("Jacobian of the Lagrange system is singular at the start")
    sol = _newton_lagrange(s0, y, lam)
    if sol is None:
        raise ConvergenceError("start is not a solution of the Lagrange system")
    y, lam, r = sol

    path = FramePath()
    path.ts.append(0.0)
    path.points.append(critical_point(s0, y))
    path.residuals.append(r)

    t = 0.0
    nominal = 1.0 / steps
    for target in np.linspace(0.0, 1.0, steps + 1)[1:]:
        h = nominal
        while t < target - 1e-15:
            t_try = min(t + h, float(target))
            s_try = family(t_try)
            sol = _newton_lagrange(s_try, y, lam)
            if sol is None or s_try.metric.inner(sol[0], y) <= 0.0:
                h /= 2.0
                if h < min_step:
                    raise ConvergenceError(
                        f"continuation step underflow after t={t:.6g}", last_good=t
                    )
                continue
            y, lam, r = sol
            t = t_try
            path.ts.append(t)
            path.points.append(critical_point(s_try, y))
            path.residuals.append(r)
    return path
