"""Constant sectional K-curvature: detection and the adapted orthonormal basis.

When ``[K, K](X, Y) Z = A (g(Y, Z) X - g(X, Z) Y)`` there is an orthonormal
basis in which

    K(e_1, e_1) = lambda_1 e_1,           K(e_1, e_i) = mu_1 e_i,
    K(e_i, e_i) = mu_1 e_1 + ... + mu_{i-1} e_{i-1} + lambda_i e_i,
    K(e_i, e_j) = mu_i e_j                (i < j),

with ``mu_i = (lambda_i - sqrt(lambda_i^2 - 4 A_{i-1})) / 2`` and
``A_i = A_{i-1} - mu_i^2``.  ``decompose`` recovers it level by level: a
maximizer of ``Phi`` gives ``e_i`` and ``lambda_i``, and the structure is
projected onto the orthogonal complement for the next level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .errors import NotConstantCurvatureError
from .families import adapted_cubic
from .phi_optimizer import DEGENERATE_MAX, find_local_max
from .tensor_core import (
    DEFAULT_TOL,
    Metric,
    StatStructure,
    SymCubic,
    is_trace_free,
    orthogonal_complement,
    restrict,
    trace_vector,
)


@dataclass(frozen=True, eq=False)
class AdaptedDecomposition:
    """Adapted basis (columns of ``basis``) and its parameter sequences.

    ``lambdas`` has ``n`` entries (the last is the diagonal value on ``e_n``),
    ``mus`` has ``n - 1`` and ``As`` holds ``A_0 .. A_{n-1}``.
    ``degenerate_levels`` lists the levels whose maximizer had
    ``lambda_i = 2 mu_i``; the basis there is not unique.
    """

    A: float
    basis: np.ndarray
    lambdas: np.ndarray
    mus: np.ndarray
    As: np.ndarray
    residual: float
    degenerate_levels: list = field(default_factory=list)
    unique_parameters: bool = False

    def to_dict(self) -> dict:
        return {
            "A": float(self.A),
            "basis": self.basis.T.tolist(),
            "lambdas": self.lambdas.tolist(),
            "mus": self.mus.tolist(),
            "As": self.As.tolist(),
            "residual": float(self.residual),
            "degenerate_levels": list(self.degenerate_levels),
            "unique_parameters": self.unique_parameters,
        }

    def rebuild(self, metric: Metric | None = None) -> StatStructure:
        """Structure whose adapted basis is ``basis`` (g-orthonormal for ``metric``)."""
        metric = metric or Metric.identity(self.basis.shape[0])
        # C(x, y, z) = Cad(E^{-1} x, ...), with E^{-1} = E^T g for a g-orthonormal E
        inv = self.basis.T @ metric.gram
        cad = adapted_cubic(self.lambdas, self.mus).full
        c = np.einsum("ijk,ia,jb,kc->abc", cad, inv, inv, inv)
        return StatStructure(metric, SymCubic.symmetrize(c))

    @classmethod
    def from_dict(cls, d: dict) -> "AdaptedDecomposition":
        return cls(
            float(d["A"]),
            np.array(d["basis"], dtype=float).T,
            np.array(d["lambdas"], dtype=float),
            np.array(d["mus"], dtype=float),
            np.array(d["As"], dtype=float),
            float(d.get("residual", 0.0)),
            list(d.get("degenerate_levels", [])),
            bool(d.get("unique_parameters", False)),
        )


def curvature_operator_residual(s: StatStructure):
    """Least-squares curvature ``A`` and the max residual of the constancy test.

    Evaluates ``g(K(X,W), K(Y,Z)) - g(K(Y,W), K(X,Z))`` against
    ``A (g(X,W) g(Y,Z) - g(Y,W) g(X,Z))`` on all basis quadruples.
    """
    if s.dim < 2:
        return 0.0, 0.0
    p = np.einsum("bxw,byz->xwyz", s.C, s.K)  # g(K(e_x,e_w), K(e_y,e_z))
    q = p - p.transpose(2, 1, 0, 3)
    g = s.metric.gram
    gg = np.einsum("xw,yz->xwyz", g, g)
    shape = gg - gg.transpose(2, 1, 0, 3)
    A = float(np.sum(q * shape) / np.sum(shape * shape))
    return A, float(np.max(np.abs(q - A * shape)))


def is_constant_curvature(s: StatStructure, tol: float = DEFAULT_TOL) -> float | None:
    """The constant sectional K-curvature ``A``, or ``None`` if it varies."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, res = curvature_operator_residual(s)
    if res <= tol * (1.0 + A * A + s.cubic.max_abs ** 2):
        return A
    return None


def mu_from_lambda(lambda_i: float, A_prev: float, clamp: float = 1e-12) -> float:
    """Smaller root of ``mu^2 - lambda_i mu + A_prev = 0``."""
    disc = lambda_i * lambda_i - 4.0 * A_prev
    if disc < -clamp:
        raise ValueError(
            f"inconsistent constant-curvature data: lambda^2 - 4A = {disc:.3e} < 0"
        )
    return 0.5 * (lambda_i - sqrt(max(disc, 0.0)))


def _refine_degenerate(cur: StatStructure, y, lam):
    """Sharpen a degenerate maximizer, which the optimizer only pins down to
    about ``eps**(1/3)``.

    With ``lambda = 2 mu`` a local maximum forces the cubic to vanish on the
    complement, so the level is the ``lambda/4`` pattern and its trace vector
    is ``(m + 1) lambda / 2 e_1``, which fixes ``e_1`` linearly.
    """
    e = trace_vector(cur)
    norm = np.linalg.norm(e)
    if norm <= 1e-12 * max(cur.cubic.max_abs, 1.0):
        return y, lam
    e = e / norm
    if e @ y < 0:
        e = -e
    value = float(cur.cubic(e, e, e))
    # only accept if it is at least as good a maximizer
    if value < lam - 1e-9 * (1.0 + abs(lam)):
        return y, lam
    return e, value


def decompose(s: StatStructure, tol: float = 1e-8, seed: int = 0) -> AdaptedDecomposition:
    """Adapted basis and parameters of a constant-curvature structure.

    Raises
    ------
    NotConstantCurvatureError
        If the sectional K-curvature is not constant at ``tol``.
    ArithmeticError
        If ``K_{e_i}`` is not ``mu_i`` times the identity on the complement,
        or the rebuilt form misses the input by more than ``tol`` (relative).
    """
    A = is_constant_curvature(s, tol)
    if A is None:
        raise NotConstantCurvatureError("sectional K-curvature is not constant")
    so, f = s.orthonormal()
    n = s.dim
    scale = max(so.cubic.max_abs, 1.0)

    cur = so
    frame = np.eye(n)
    vectors, lambdas, mus, As = [], [], [], [A]
    degenerate = []
    for level in range(n - 1):
        cp = find_local_max(cur, seed=seed)
        y, lam = cp.x, cp.value
        mu = mu_from_lambda(lam, As[-1], clamp=max(1e-12, tol * scale * scale))
        if cp.kind == DEGENERATE_MAX or abs(lam - 2.0 * mu) <= 1e-5 * scale:
            y, lam = _refine_degenerate(cur, y, lam)
            mu = mu_from_lambda(lam, As[-1], clamp=max(1e-12, tol * scale * scale))
        q = orthogonal_complement(Metric.identity(cur.dim), y)
        block = q.T @ np.einsum("abc,b->ac", cur.C, y) @ q
        # the block average is better conditioned than the root when lambda^2 ~ 4A
        mu_block = float(np.trace(block)) / (cur.dim - 1)
        if abs(mu_block - mu) > 1e-6 * scale:
            raise ArithmeticError(
                f"level {level}: mu from the quadratic ({mu:.6g}) disagrees with K_e ({mu_block:.6g})"
            )
        mu = mu_block
        off = float(np.max(np.abs(block - mu * np.eye(cur.dim - 1))))
        if off > max(tol, 1e-8) * scale:
            raise ArithmeticError(
                f"level {level}: K_e restricted to the complement is not mu*id (deviation {off:.3e})"
            )
        if abs(lam - 2.0 * mu) <= 1e-7 * (1.0 + abs(lam)):
            degenerate.append(level)
        vectors.append(frame @ y)
        lambdas.append(lam)
        mus.append(mu)
        As.append(As[-1] - mu * mu)
        cur = restrict(cur, q)
        frame = frame @ q
    vectors.append(frame[:, 0])
    lambdas.append(float(cur.C[0, 0, 0]))

    basis_o = np.column_stack(vectors)
    cad = adapted_cubic(lambdas, mus).full
    rebuilt = np.einsum("ijk,ai,bj,ck->abc", cad, basis_o, basis_o, basis_o)
    residual = float(np.max(np.abs(rebuilt - so.C))) / scale
    if residual > max(tol, 1e-8):
        raise ArithmeticError(f"reconstruction residual {residual:.3e} exceeds tolerance")
    return AdaptedDecomposition(
        A=A,
        basis=f @ basis_o,
        lambdas=np.array(lambdas),
        mus=np.array(mus),
        As=np.array(As[:n]),
        residual=residual,
        degenerate_levels=degenerate,
        unique_parameters=is_trace_free(s, 1e-8),
    )


def diagonalize_commuting(s: StatStructure, tol: float = DEFAULT_TOL, seed: int = 0):
    """Basis with ``K(e_i, e_j) = delta_ij lambda_i e_i`` when ``[K, K] = 0``.

    The ``K_X`` commute and are self-adjoint, so the eigenbasis of one generic
    combination ``sum_b r_b K_{e_b}`` diagonalizes them all.

    Returns
    -------
    basis : ndarray
        g-orthonormal columns, ordered by decreasing diagonal value.
    values : ndarray
    """
    scale = 1.0 + s.cubic.max_abs ** 2
    if np.max(np.abs(s.bracket)) > tol * scale:
        raise ValueError("[K, K] does not vanish; K_X do not commute")
    so, f = s.orthonormal()
    n = s.dim
    r = np.random.default_rng(seed).standard_normal(n)
    _, v = np.linalg.eigh(np.einsum("abc,b->ac", so.C, r))
    cv = np.einsum("abc,ai,bj,ck->ijk", so.C, v, v, v)
    values = np.array([cv[i, i, i] for i in range(n)])
    expected = np.zeros_like(cv)
    for i in range(n):
        expected[i, i, i] = values[i]
    if np.max(np.abs(cv - expected)) > max(tol, 1e-8) * (1.0 + so.cubic.max_abs):
        raise ArithmeticError("simultaneous diagonalization failed")
    # flipping e_i flips the sign of its value; report non-negative values
    signs = np.where(values < 0, -1.0, 1.0)
    v, values = v * signs, values * signs
    order = np.argsort(-values, kind="stable")
    values, v = values[order], v[:, order]
    if is_trace_free(s, 1e-8) and np.max(np.abs(values), initial=0.0) > 1e-8 * (1.0 + so.cubic.max_abs):
        raise ArithmeticError("trace-free structure with [K,K]=0 must vanish")
    return f @ v, values
