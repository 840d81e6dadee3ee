"""Derivation actions of skew endomorphisms on ``K`` and classifiers built on them.

A g-skew endomorphism ``J`` acts on ``K`` as a derivation,

    (J.K)(X, Y) = J K(X, Y) - K(JX, Y) - K(X, JY),

and ``J.K = 0`` means ``J`` generates an infinitesimal isometry preserving ``K``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .adapted_basis import decompose, is_constant_curvature
from .errors import DimensionError
from .phi_optimizer import eigenframe_at, find_local_max
from .tensor_core import (
    Metric,
    Plane,
    StatStructure,
    is_trace_free,
    sectional_k_curvature,
    trace_vector,
)

log = logging.getLogger(__name__)

SKEW_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SkewEndo:
    """Endomorphism ``J`` with ``g(JX, Y) + g(X, JY) = 0``.

    The skewness is checked against a metric when the endomorphism is applied,
    since the same matrix can be skew for one metric and not another.
    """

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (self.dim, self.dim):
            raise DimensionError(f"expected a {self.dim}x{self.dim} matrix, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def skewness(self, metric: Metric) -> float:
        g = metric.gram
        return float(np.max(np.abs(g @ self.matrix + self.matrix.T @ g), initial=0.0))

    def check(self, metric: Metric, tol: float = SKEW_TOL) -> None:
        if metric.dim != self.dim:
            raise DimensionError(f"endomorphism has dim {self.dim}, metric has dim {metric.dim}")
        scale = 1.0 + float(np.max(np.abs(self.matrix), initial=0.0)) * float(np.max(metric.gram))
        if self.skewness(metric) > tol * scale:
            raise ValueError("endomorphism is not skew-adjoint for the metric")

    @classmethod
    def from_generator(cls, metric: Metric, i: int, j: int) -> "SkewEndo":
        """Rotation generator in the (e_i, e_j) plane of the g-orthonormal frame."""
        n = metric.dim
        s = np.zeros((n, n))
        s[i, j], s[j, i] = -1.0, 1.0
        f = metric.frame
        return cls(n, f @ s @ f.T @ metric.gram)


def _derivation(k, j):
    # D[a, b, c] = ((J.K)(e_b, e_c))^a
    return (
        np.einsum("ad,dbc->abc", j, k)
        - np.einsum("adc,db->abc", k, j)
        - np.einsum("abd,dc->abc", k, j)
    )


def derivation_on_k(s: StatStructure, J: SkewEndo) -> np.ndarray:
    """``(J.K)(e_b, e_c)`` for all basis pairs, as ``D[a, b, c]``.

    Raises
    ------
    ValueError
        If ``J`` is not g-skew.
    """
    if J.dim != s.dim:
        raise DimensionError(f"endomorphism has dim {J.dim}, structure has dim {s.dim}")
    J.check(s.metric)
    return _derivation(s.K, J.matrix)


def cubic_derivation(s: StatStructure, J: SkewEndo) -> np.ndarray:
    """``(J.C)(X, Y, Z) = -C(JX, Y, Z) - C(X, JY, Z) - C(X, Y, JZ)``."""
    J.check(s.metric)
    c, j = s.C, J.matrix
    return -(
        np.einsum("dbc,da->abc", c, j)
        + np.einsum("adc,db->abc", c, j)
        + np.einsum("abd,dc->abc", c, j)
    )


def bracket_derivation_on_k(s: StatStructure) -> float:
    """Largest ``|([K,K](e_i, e_j)).K|`` over basis pairs.

    Each ``[K, K](X, Y)`` is g-skew because ``[K, K]`` is curvature-like, so it
    acts on ``K`` as a derivation.
    """
    b = s.bracket  # B[i, j, k, a] = ([K,K](e_i, e_j) e_k)^a
    worst = 0.0
    for i, j in combinations(range(s.dim), 2):
        d = _derivation(s.K, b[i, j].T)
        worst = max(worst, float(np.max(np.abs(d))))
    return worst


def _so_basis(n):
    out = []
    for i, j in combinations(range(n), 2):
        m = np.zeros((n, n))
        m[i, j], m[j, i] = -1.0, 1.0
        out.append(m)
    return out


def derivation_matrix(s: StatStructure) -> np.ndarray:
    """Matrix of ``J -> J.K`` from ``so(n)`` (in the g-orthonormal frame) to tensors."""
    so, _ = s.orthonormal()
    cols = [_derivation(so.K, m).ravel() for m in _so_basis(s.dim)]
    if not cols:
        return np.zeros((s.dim ** 3, 0))
    return np.column_stack(cols)


def sample_planes(n: int, count: int, seed: int) -> list[Plane]:
    """Seeded random planes, as pairs of standard normal vectors."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((count, 2, n))
    return [Plane(p[0], p[1]) for p in raw]


@dataclass
class RigidityReport:
    curvature_min: float
    curvature_max: float
    planes_sampled: int
    null_dimension: int
    singular_values: np.ndarray
    threshold: float
    gap: float
    constant_curvature: float | None
    asserted: bool

    def to_dict(self) -> dict:
        return {
            "curvature_range": [self.curvature_min, self.curvature_max],
            "planes_sampled": self.planes_sampled,
            "null_dimension": self.null_dimension,
            "singular_values": self.singular_values.tolist(),
            "threshold": self.threshold,
            "gap": self.gap,
            "constant_curvature": self.constant_curvature,
            "asserted": self.asserted,
        }


def rigidity_probe(s: StatStructure, tol: float = 1e-10, seed: int = 0, planes: int = 1000) -> RigidityReport:
    """Sample the curvature sign and compute the kernel of ``J -> J.K``.

    The kernel dimension is the number of singular values at or below
    ``1e-8 * sigma_max``; ``gap`` is the smallest singular value above that
    threshold divided by the threshold.  When the curvature is a negative
    constant the kernel must be trivial, and a nontrivial kernel then raises.

    Raises
    ------
    ArithmeticError
        If the curvature is constant and negative but some ``J != 0`` kills ``K``.
    """
    n = s.dim
    ks = []
    if n >= 2:
        for p in sample_planes(n, planes, seed):
            try:
                ks.append(sectional_k_curvature(s, p))
            except ValueError:
                continue
        if s.cubic.max_abs > 0:
            try:
                cp = find_local_max(s, seed=seed)
                basis, _ = eigenframe_at(s, cp)
                for i, j in combinations(range(n), 2):
                    ks.append(sectional_k_curvature(s, Plane(basis[:, i], basis[:, j])))
            except (RuntimeError, ValueError) as exc:  # sampling alone still informative
                log.warning("eigenframe planes skipped: %s", exc)
    kmin = float(min(ks)) if ks else 0.0
    kmax = float(max(ks)) if ks else 0.0

    m = derivation_matrix(s)
    sv = np.linalg.svd(m, compute_uv=False) if m.size else np.zeros(0)
    sv_full = np.zeros(n * (n - 1) // 2)
    sv_full[: sv.size] = sv[: sv_full.size]
    smax = float(sv_full.max(initial=0.0))
    threshold = 1e-8 * smax
    null = int(np.sum(sv_full <= threshold))
    above = sv_full[sv_full > threshold]
    gap = float(above.min() / threshold) if above.size and threshold > 0 else float("inf")

    A = is_constant_curvature(s, max(tol, 1e-10))
    asserted = A is not None and A < -tol and kmax < -tol
    if asserted and null != 0:
        raise ArithmeticError(
            f"negative constant curvature {A:.6g} but {null} skew derivations annihilate K"
        )
    return RigidityReport(kmin, kmax, len(ks), null, sv_full, threshold, gap, A, asserted)


# Condition identifiers of the canonical characterization
EIGENVECTOR = 1
COMPLEMENT_SCALAR = 2
POSITIVE_CONSTANT = 3
NORM_OF_E = 4
# conditions 1-4 do not pin down the pattern when n = 2 (e.g. lambda = 5 mu)
PATTERN = 5


@dataclass
class CanonicalVerdict:
    canonical: bool
    lam: float | None = None
    failed: int | None = None
    reason: str = ""
    direction: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {"canonical": self.canonical}
        if self.canonical:
            out["lambda"] = self.lam
            out["direction"] = self.direction.tolist()
        else:
            out["failed_condition"] = self.failed
            out["reason"] = self.reason
        return out


def characterize_canonical(s: StatStructure, tol: float = 1e-8) -> CanonicalVerdict:
    """Decide whether ``s`` is the ``lambda/4`` structure in some orthonormal basis.

    The four conditions are tested in order: ``E`` is an eigenvector of
    ``K_E``; ``K_E`` is a multiple of the identity on ``E^perp``; the
    sectional K-curvature is a positive constant ``A``; and
    ``|E| = (n + 1) sqrt(A)``.  In dimension 2 these hold for more than the
    canonical family, so a fifth check confirms ``K_E`` has eigenvalues
    ``lambda`` and ``lambda / 2``.  The recovered ``lambda = 2 |E| / (n + 1)`` is
    positive, with ``e_1 = E / |E|`` returned as ``direction``.
    """
    n = s.dim
    so, f = s.orthonormal()
    scale = max(so.cubic.max_abs, 1.0)
    e = so.metric.lower_index(trace_vector(so))
    norm = float(np.linalg.norm(e))
    if norm <= tol * scale:
        return CanonicalVerdict(False, failed=EIGENVECTOR, reason="trace vector E vanishes")
    u = e / norm
    ke = np.einsum("abc,b->ac", so.C, u)  # K_u, symmetric in the orthonormal frame
    w = ke @ u
    if np.linalg.norm(w - (w @ u) * u) > tol * scale:
        return CanonicalVerdict(False, failed=EIGENVECTOR, reason="E is not an eigenvector of K_E")
    if n > 1:
        q = np.linalg.svd(np.eye(n) - np.outer(u, u))[0][:, : n - 1]
        block = q.T @ ke @ q
        mu = np.trace(block) / (n - 1)
        if np.max(np.abs(block - mu * np.eye(n - 1))) > tol * scale:
            return CanonicalVerdict(
                False, failed=COMPLEMENT_SCALAR, reason="K_E on the complement of E is not scalar"
            )
    A = is_constant_curvature(s, tol)
    if A is None:
        return CanonicalVerdict(False, failed=POSITIVE_CONSTANT, reason="curvature not constant")
    if A <= tol * scale * scale:
        return CanonicalVerdict(False, failed=POSITIVE_CONSTANT, reason=f"constant curvature {A:.6g} is not positive")
    if abs(norm - (n + 1) * np.sqrt(A)) > tol * scale * (n + 1):
        return CanonicalVerdict(False, failed=NORM_OF_E, reason="|E| differs from (n+1) sqrt(A)")
    lam = 2.0 * norm / (n + 1)
    if abs(w @ u - lam) > tol * scale or (n > 1 and abs(mu - lam / 2) > tol * scale):
        return CanonicalVerdict(
            False, failed=PATTERN, reason="K_E has eigenvalues other than (lambda, lambda/2)"
        )

    d = decompose(s, tol=max(tol, 1e-8))
    if abs(d.lambdas[0] - lam) > 1e-6 * scale or abs(d.mus[0] - lam / 2) > 1e-6 * scale:
        raise ArithmeticError("adapted basis disagrees with the canonical pattern")
    return CanonicalVerdict(True, lam=float(lam), direction=f @ u)


def negativity_witness(s: StatStructure, seed: int = 0, tol: float = 1e-10) -> Plane | None:
    """A plane of negative sectional K-curvature of a nonzero trace-free structure.

    At a maximizer ``e_1`` of ``Phi`` with value ``lambda_1 > 0`` the eigenvalues
    ``lambda_j`` of ``K_{e_1}`` on the complement sum to ``-lambda_1``, so some
    ``lambda_j < 0`` and ``k(e_1 ^ e_j) = lambda_j (lambda_1 - lambda_j) < 0``.
    Returns ``None`` (and logs diagnostics) only if that search fails numerically.

    Raises
    ------
    ValueError
        If ``s`` is not trace-free or ``C = 0``.
    """
    if s.dim < 2:
        raise ValueError("need dimension >= 2 for a plane")
    if not is_trace_free(s, 1e-8):
        raise ValueError("structure is not trace-free")
    if s.cubic.max_abs <= tol:
        raise ValueError("C vanishes; every sectional K-curvature is 0")
    cp = find_local_max(s, seed=seed)
    basis, values = eigenframe_at(s, cp)
    best, best_k = None, 0.0
    for j in range(1, s.dim):
        plane = Plane(basis[:, 0], basis[:, j])
        k = sectional_k_curvature(s, plane)
        if k < best_k:
            best, best_k = plane, k
    if best is None:
        log.warning(
            "no negative plane in the eigenframe: lambda_1=%.6g, eigenvalues=%s",
            cp.value,
            np.array2string(values, precision=6),
        )
    return best
