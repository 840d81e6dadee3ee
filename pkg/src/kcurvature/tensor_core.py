"""Dense algebra of statistical structures on an inner-product space.

A statistical structure is stored as a metric ``g`` together with a totally
symmetric cubic form ``C``.  The difference tensor ``K`` is never stored; it
is raised from ``C`` on demand through ``C(X, Y, Z) = g(X, K(Y, Z))``.

Index conventions
-----------------
``K[a, b, c]`` is the component ``K(e_b, e_c)^a``.  The curvature-like tensor
``[K, K]`` is laid out as ``B[i, j, k, a] = ([K_{e_i}, K_{e_j}] e_k)^a``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations_with_replacement
from math import comb
from typing import NamedTuple

import numpy as np

from .errors import DegeneratePlaneError, DimensionError

DEFAULT_TOL = 1e-10
MAX_DIM = 16


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def packed_indices(dim: int) -> list[tuple[int, int, int]]:
    """Canonical multi-indices ``i <= j <= k`` in lexicographic order."""
    return list(combinations_with_replacement(range(dim), 3))


@dataclass(frozen=True, eq=False)
class Metric:
    """Positive-definite scalar product with a cached Cholesky factor."""

    gram: np.ndarray

    def __post_init__(self):
        g = np.array(self.gram, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 1:
            raise DimensionError(f"gram matrix must be square, got shape {g.shape}")
        scale = max(np.max(np.abs(g)), np.finfo(float).tiny)
        if np.max(np.abs(g - g.T)) > 1e-12 * scale:
            raise ValueError("gram matrix is not symmetric")
        g = 0.5 * (g + g.T)
        try:
            chol = np.linalg.cholesky(g)
        except np.linalg.LinAlgError as exc:
            raise ValueError("gram matrix is not positive definite") from exc
        if np.any(np.diag(chol) <= 0):
            raise ValueError("gram matrix is not positive definite")
        object.__setattr__(self, "gram", _frozen(g))
        object.__setattr__(self, "_chol", _frozen(chol))

    @classmethod
    def identity(cls, dim: int) -> "Metric":
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    @property
    def chol(self) -> np.ndarray:
        """Lower-triangular ``L`` with ``gram = L L^T``."""
        return self._chol

    @cached_property
    def frame(self) -> np.ndarray:
        """Columns form a g-orthonormal basis: ``F^T gram F = I``.

        Built from the triangular factor (``F = L^{-T}``), so it is
        deterministic and upper triangular.
        """
        return _frozen(np.linalg.inv(self._chol).T)

    @cached_property
    def inverse(self) -> np.ndarray:
        f = self.frame
        return _frozen(f @ f.T)

    @cached_property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.gram, np.eye(self.dim)))

    def inner(self, x, y) -> float:
        return float(np.asarray(x) @ self.gram @ np.asarray(y))

    def norm(self, x) -> float:
        return float(np.sqrt(max(self.inner(x, x), 0.0)))

    def raise_index(self, covector) -> np.ndarray:
        """Solve ``gram v = covector`` through the cached factor."""
        covector = np.asarray(covector, dtype=float)
        if self.is_identity:
            return covector.copy()
        return self.inverse @ covector

    def lower_index(self, vector) -> np.ndarray:
        return self.gram @ np.asarray(vector, dtype=float)

    def normalize(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.norm(x)
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return x / n


@dataclass(frozen=True, eq=False)
class SymCubic:
    """Totally symmetric (0,3)-form stored on canonical indices only."""

    dim: int
    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=float).ravel()
        if self.dim < 1 or self.dim > MAX_DIM:
            raise DimensionError(f"dimension must lie in 1..{MAX_DIM}, got {self.dim}")
        if e.size != comb(self.dim + 2, 3):
            raise DimensionError(
                f"expected {comb(self.dim + 2, 3)} packed entries for dim {self.dim}, got {e.size}"
            )
        object.__setattr__(self, "entries", _frozen(e))

    @classmethod
    def zeros(cls, dim: int) -> "SymCubic":
        return cls(dim, np.zeros(comb(dim + 2, 3)))

    @classmethod
    def from_full(cls, tensor, tol: float = 1e-12) -> "SymCubic":
        """Pack a dense ``(n, n, n)`` array, which must already be symmetric."""
        t = np.asarray(tensor, dtype=float)
        n = t.shape[0]
        if t.shape != (n, n, n):
            raise DimensionError(f"expected a cube array, got shape {t.shape}")
        scale = max(np.max(np.abs(t)), 1.0) if t.size else 1.0
        for axes in [(1, 0, 2), (0, 2, 1), (2, 1, 0)]:
            if np.max(np.abs(t - t.transpose(axes))) > tol * scale:
                raise ValueError("tensor is not totally symmetric")
        return cls(n, [t[i, j, k] for i, j, k in packed_indices(n)])

    @classmethod
    def from_dict(cls, dim: int, values: dict) -> "SymCubic":
        """Build from ``{(i, j, k): value}``; index order is irrelevant."""
        lookup = {idx: pos for pos, idx in enumerate(packed_indices(dim))}
        out = np.zeros(len(lookup))
        for idx, val in values.items():
            key = tuple(sorted(int(i) for i in idx))
            if key not in lookup:
                raise DimensionError(f"index {idx} out of range for dim {dim}")
            out[lookup[key]] = val
        return cls(dim, out)

    @classmethod
    def symmetrize(cls, tensor) -> "SymCubic":
        t = np.asarray(tensor, dtype=float)
        perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
        return cls.from_full(sum(t.transpose(p) for p in perms) / 6.0)

    @cached_property
    def full(self) -> np.ndarray:
        n = self.dim
        t = np.zeros((n, n, n))
        for val, (i, j, k) in zip(self.entries, packed_indices(n)):
            for a, b, c in {(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}:
                t[a, b, c] = val
        return _frozen(t)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.entries))) if self.entries.size else 0.0

    def __call__(self, x, y, z) -> float:
        return float(np.einsum("abc,a,b,c->", self.full, x, y, z))


@dataclass(frozen=True, eq=False)
class StatStructure:
    """A statistical structure ``(g, C)``; ``K`` is derived."""

    metric: Metric
    cubic: SymCubic

    def __post_init__(self):
        if self.metric.dim != self.cubic.dim:
            raise DimensionError(
                f"metric has dim {self.metric.dim} but cubic form has dim {self.cubic.dim}"
            )

    @classmethod
    def euclidean(cls, cubic: SymCubic) -> "StatStructure":
        return cls(Metric.identity(cubic.dim), cubic)

    @classmethod
    def from_full(cls, c_full, gram=None) -> "StatStructure":
        cubic = SymCubic.from_full(c_full)
        metric = Metric.identity(cubic.dim) if gram is None else Metric(gram)
        return cls(metric, cubic)

    @property
    def dim(self) -> int:
        return self.cubic.dim

    @property
    def C(self) -> np.ndarray:
        return self.cubic.full

    @cached_property
    def K(self) -> np.ndarray:
        """Difference tensor, ``K[a, b, c] = K(e_b, e_c)^a``."""
        if self.metric.is_identity:
            return self.C
        return _frozen(np.einsum("ad,dbc->abc", self.metric.inverse, self.C))

    @cached_property
    def bracket(self) -> np.ndarray:
        """Dense ``[K, K]`` with layout ``B[i, j, k, a]``."""
        # KK[i, j, k, a] = (K_{e_i} K_{e_j} e_k)^a
        kk = np.einsum("aie,ejk->ijka", self.K, self.K)
        return _frozen(kk - kk.transpose(1, 0, 2, 3))

    def _check(self, *vectors):
        for v in vectors:
            if np.shape(v) != (self.dim,):
                raise DimensionError(f"expected a vector of length {self.dim}, got shape {np.shape(v)}")

    def orthonormal(self) -> tuple["StatStructure", np.ndarray]:
        """The same structure written in the frame ``F`` of ``metric.frame``.

        Returns the Euclidean structure and ``F``; a coordinate vector ``y`` in
        the new frame corresponds to ``F @ y`` in the original coordinates.
        """
        f = self.metric.frame
        if self.metric.is_identity:
            return self, f
        c = np.einsum("abc,ai,bj,ck->ijk", self.C, f, f, f)
        return StatStructure.euclidean(SymCubic.symmetrize(c)), f


class Plane(NamedTuple):
    u: np.ndarray
    v: np.ndarray


class CurvatureLikeResiduals(NamedTuple):
    antisymmetry: float
    bianchi: float
    skewness: float
    scale: float


# ---------------------------------------------------------------------------
# operations


def k_from_c(s: StatStructure, y, z) -> np.ndarray:
    """``K(y, z)``, obtained by raising the first slot of ``C``."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    s._check(y, z)
    return np.einsum("abc,b,c->a", s.K, y, z)


def k_operator(s: StatStructure, x) -> np.ndarray:
    """Matrix of ``K_x`` in the standard basis (column ``c`` is ``K(x, e_c)``)."""
    x = np.asarray(x, dtype=float)
    s._check(x)
    return np.einsum("abc,b->ac", s.K, x)


def bracket_kk(s: StatStructure, x, y, z) -> np.ndarray:
    """``[K_x, K_y] z``."""
    kx, ky = k_operator(s, x), k_operator(s, y)
    z = np.asarray(z, dtype=float)
    s._check(z)
    return kx @ (ky @ z) - ky @ (kx @ z)


def orthonormalize_pair(metric: Metric, u, v, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Modified Gram-Schmidt of ``(u, v)`` in the ``g`` inner product.

    Raises
    ------
    DegeneratePlaneError
        If the Gram determinant falls below ``tol * |u|^2 |v|^2``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    uu, vv, uv = metric.inner(u, u), metric.inner(v, v), metric.inner(u, v)
    if uu <= 0.0 or vv <= 0.0 or uu * vv - uv * uv <= tol * uu * vv:
        raise DegeneratePlaneError("vectors do not span a plane")
    x = u / np.sqrt(uu)
    w = v - metric.inner(v, x) * x
    w = w - metric.inner(w, x) * x
    return x, metric.normalize(w)


def sectional_k_curvature(s: StatStructure, plane, tol: float = 1e-12) -> float:
    """Sectional K-curvature ``g([K,K](X,Y)Y, X)`` of a plane.

    ``X, Y`` is the g-orthonormal pair obtained from the spanning vectors, so
    the value depends only on the plane.
    """
    u, v = plane
    s._check(np.asarray(u), np.asarray(v))
    x, y = orthonormalize_pair(s.metric, u, v, tol)
    return s.metric.inner(bracket_kk(s, x, y, y), x)


def curvature_like_residuals(s: StatStructure) -> CurvatureLikeResiduals:
    """Maximum violation of the three curvature-like identities of ``[K, K]``.

    Returns absolute residuals together with ``scale = max |[K,K]|``; each
    residual is expected to sit below ``tol * scale``.
    """
    b = s.bracket
    anti = np.max(np.abs(b + b.transpose(1, 0, 2, 3))) if b.size else 0.0
    cyc = b + b.transpose(1, 2, 0, 3) + b.transpose(2, 0, 1, 3)
    low = np.einsum("ijka,al->ijkl", b, s.metric.gram)
    skew = low + low.transpose(0, 1, 3, 2)
    scale = float(np.max(np.abs(b))) if b.size else 0.0
    return CurvatureLikeResiduals(float(anti), float(np.max(np.abs(cyc))), float(np.max(np.abs(skew))), scale)


def trace_vector(s: StatStructure) -> np.ndarray:
    """``E = tr_g K``, summed over the g-orthonormal factor frame."""
    f = s.metric.frame
    return np.einsum("abc,bi,ci->a", s.K, f, f)


def is_trace_free(s: StatStructure, tol: float = DEFAULT_TOL) -> bool:
    if tol <= 0:
        raise ValueError("tol must be positive")
    return s.metric.norm(trace_vector(s)) <= tol * (1.0 + s.cubic.max_abs)


def orthogonal_complement(metric: Metric, e1, tol: float = 1e-10) -> np.ndarray:
    """g-orthonormal basis of ``{e1}^perp`` as the columns of an ``(n, n-1)`` array.

    ``e1`` is completed by the standard basis vectors, g-Gram-Schmidt is run
    in that order and vectors that collapse to zero are dropped.
    """
    n = metric.dim
    e1 = np.asarray(e1, dtype=float)
    if n < 2:
        raise DimensionError("a one-dimensional space has no orthogonal complement")
    if abs(metric.norm(e1) - 1.0) > tol:
        raise ValueError("e1 must be a g-unit vector")
    basis = [e1]
    for i in range(n):
        w = np.zeros(n)
        w[i] = 1.0
        for _ in range(2):
            for b in basis:
                w = w - metric.inner(w, b) * b
        nw = metric.norm(w)
        if nw > 1e-8:
            basis.append(w / nw)
        if len(basis) == n:
            break
    return np.column_stack(basis[1:])


def restrict(s: StatStructure, basis) -> StatStructure:
    """Cubic form restricted to ``span(basis)``, written in that basis.

    The basis columns must be g-orthonormal, so the induced metric is the
    identity.  Restricting ``C`` is the same as projecting ``K`` onto the
    subspace because ``C(X', Y', Z') = g(X', P K(Y', Z'))``.
    """
    q = np.asarray(basis, dtype=float)
    c = np.einsum("abc,ai,bj,ck->ijk", s.C, q, q, q)
    return StatStructure.euclidean(SymCubic.symmetrize(c))


def project_k(s: StatStructure, e1, tol: float = DEFAULT_TOL) -> StatStructure:
    """The structure ``K' = P o K|_{D x D}`` on ``D = {e1}^perp``."""
    e1 = np.asarray(e1, dtype=float)
    s._check(e1)
    return restrict(s, orthogonal_complement(s.metric, e1, tol))


# ---------------------------------------------------------------------------
# JSON instance format


def instance_to_dict(s: StatStructure) -> dict:
    out = {"dim": s.dim}
    if not s.metric.is_identity:
        out["metric"] = s.metric.gram.tolist()
    out["cubic"] = [
        {"idx": list(idx), "val": float(val)}
        for idx, val in zip(packed_indices(s.dim), s.cubic.entries)
        if val != 0.0
    ]
    return out


def instance_from_dict(data: dict) -> StatStructure:
    try:
        dim = int(data["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError("instance needs an integer 'dim'") from exc
    if not 1 <= dim <= MAX_DIM:
        raise DimensionError(f"dim must lie in 1..{MAX_DIM}")
    gram = data.get("metric")
    metric = Metric.identity(dim) if gram is None else Metric(gram)
    if metric.dim != dim:
        raise DimensionError("metric size does not match dim")
    values = {}
    for item in data.get("cubic", []):
        idx = tuple(int(i) for i in item["idx"])
        if len(idx) != 3 or not all(0 <= i < dim for i in idx):
            raise ValueError(f"bad cubic index {list(idx)}")
        if not idx[0] <= idx[1] <= idx[2]:
            raise ValueError(f"cubic index {list(idx)} is not canonical (need i<=j<=k)")
        if idx in values:
            raise ValueError(f"duplicate cubic index {list(idx)}")
        values[idx] = float(item["val"])
    return StatStructure(metric, SymCubic.from_dict(dim, values))


def load_instance(text: str) -> StatStructure:
    return instance_from_dict(json.loads(text))


def dump_instance(s: StatStructure) -> str:
    return json.dumps(instance_to_dict(s))
