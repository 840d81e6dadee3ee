"""Constructors for the standard example structures and random generators.

All constructors return structures on Euclidean ``R^n`` written in the
standard basis ``e_1, ..., e_n`` (0-based in code), unless a metric is
passed explicitly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .tensor_core import (
    Metric,
    StatStructure,
    SymCubic,
    instance_to_dict,
    is_trace_free,
    trace_vector,
)

KINDS = ("lambda_quarter", "h_umbilical", "tracefree_canonical", "diagonal", "random", "random_tracefree")


def _need_dim(n, minimum=2):
    if int(n) != n or n < minimum:
        raise ValueError(f"dimension must be an integer >= {minimum}, got {n}")


def make_lambda_quarter(n: int, lam: float) -> StatStructure:
    """``K(e1,e1) = lam e1``, ``K(e1,ei) = lam/2 ei``, ``K(ei,ei) = lam/2 e1``.

    Constant sectional K-curvature ``lam**2 / 4``.
    """
    _need_dim(n)
    values = {(0, 0, 0): lam}
    values.update({(0, i, i): lam / 2.0 for i in range(1, n)})
    return StatStructure.euclidean(SymCubic.from_dict(n, values))


def make_h_umbilical(n: int, lam: float, mu: float) -> StatStructure:
    """``K(e1,e1) = lam e1``, ``K(e1,ej) = mu ej``, ``K(ej,ej) = mu e1``."""
    _need_dim(n)
    values = {(0, 0, 0): lam}
    values.update({(0, j, j): mu for j in range(1, n)})
    return StatStructure.euclidean(SymCubic.from_dict(n, values))


def h_umbilical_closed_form(n: int, lam: float, mu: float) -> StatStructure:
    """The same structure from the coordinate-free expression

    ``K(X,Y) = (lam - 3mu) X_1 Y_1 e1 + mu <X,Y> e1 + mu X_1 Y + mu Y_1 X``.
    """
    _need_dim(n)
    e1 = np.zeros(n)
    e1[0] = 1.0
    eye = np.eye(n)
    # K[a, b, c] = K(e_b, e_c)^a
    k = (
        (lam - 3.0 * mu) * np.einsum("a,b,c->abc", e1, e1, e1)
        + mu * np.einsum("a,bc->abc", e1, eye)
        + mu * np.einsum("b,ac->abc", e1, eye)
        + mu * np.einsum("c,ab->abc", e1, eye)
    )
    return StatStructure.from_full(k)


def h_umbilical_curvature(lam: float, mu: float, x1: float, y1: float) -> float:
    """``k(X ^ Y) = mu^2 + mu (lam - 2 mu)(x1^2 + y1^2)`` for orthonormal X, Y
    whose ``e1``-components are ``x1`` and ``y1``."""
    r = x1 * x1 + y1 * y1
    if r > 1.0 + 1e-12:
        raise ValueError("x1^2 + y1^2 must not exceed 1 for an orthonormal pair")
    return mu * mu + mu * (lam - 2.0 * mu) * r


def h_umbilical_plane(n: int, x1: float, y1: float, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """An orthonormal pair ``X, Y`` in ``R^n`` with ``X_1 = x1`` and ``Y_1 = y1``.

    Writing ``X = x1 e1 + X'`` and ``Y = y1 e1 + Y'``, the components in
    ``D = e1^perp`` must satisfy ``|X'|^2 = 1 - x1^2``, ``|Y'|^2 = 1 - y1^2``
    and ``<X', Y'> = -x1 y1``; such a pair exists in ``D`` (dim >= 2) exactly
    when ``x1^2 + y1^2 <= 1``.  With ``rng`` the pair is rotated randomly
    inside ``D``.
    """
    if n == 2 and abs(x1 * x1 + y1 * y1 - 1.0) > 1e-12:
        raise ValueError("in dimension 2 only x1^2 + y1^2 = 1 is realizable")
    if x1 * x1 + y1 * y1 > 1.0 + 1e-12:
        raise ValueError("x1^2 + y1^2 must not exceed 1")
    a = sqrt(max(1.0 - x1 * x1, 0.0))
    b = sqrt(max(1.0 - y1 * y1, 0.0))
    if a > 0 and b > 0:
        cos = float(np.clip(-x1 * y1 / (a * b), -1.0, 1.0))
    else:
        cos = 1.0 if n == 2 else 0.0
    sin = sqrt(max(1.0 - cos * cos, 0.0))
    m = n - 1
    if m == 1:
        xp, yp = np.array([a]), np.array([b * cos])
    else:
        xp = np.zeros(m)
        yp = np.zeros(m)
        xp[0] = a
        yp[0] = b * cos
        yp[1] = b * sin
        if rng is not None:
            q, r = np.linalg.qr(rng.standard_normal((m, m)))
            q = q * np.sign(np.diag(r))
            xp, yp = q @ xp, q @ yp
    x = np.concatenate([[x1], xp])
    y = np.concatenate([[y1], yp])
    return x, y


def tracefree_canonical_params(n: int, A: float):
    """Adapted-basis parameters of the trace-free structure of curvature ``A``.

    Returns ``(lambdas, mus, As)`` of lengths ``n``, ``n - 1`` and ``n``, with
    ``lambda_i = (n-i) s_i``, ``mu_i = -s_i``, ``s_i = sqrt(-A_{i-1}/(n-i+1))``
    and ``A_i = A_{i-1} - mu_i^2``.  The last diagonal value ``lambda_n`` is 0.
    """
    _need_dim(n)
    if A > 0:
        raise ValueError("a trace-free structure has non-positive constant curvature")
    lambdas, mus, As = [], [], [float(A)]
    for i in range(1, n):
        s = sqrt(-As[-1] / (n - i + 1))
        lambdas.append((n - i) * s)
        mus.append(-s)
        As.append(As[-1] - s * s)
    lambdas.append(0.0)
    return np.array(lambdas), np.array(mus), np.array(As)


def adapted_cubic(lambdas, mus) -> SymCubic:
    """Cubic form of the adapted expression in the standard basis.

    ``K(e_i, e_i) = mu_1 e_1 + ... + mu_{i-1} e_{i-1} + lambda_i e_i`` and
    ``K(e_i, e_j) = mu_i e_j`` for ``i < j`` give ``C_iii = lambda_i``,
    ``C_ijj = mu_i`` (``i < j``) and zero otherwise.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    mus = np.asarray(mus, dtype=float)
    n = lambdas.size
    if mus.size != n - 1:
        raise ValueError("need exactly n - 1 values of mu")
    values = {(i, i, i): lambdas[i] for i in range(n)}
    for i in range(n - 1):
        for j in range(i + 1, n):
            values[(i, j, j)] = mus[i]
    return SymCubic.from_dict(n, values)


def make_tracefree_canonical(n: int, A: float) -> StatStructure:
    lambdas, mus, _ = tracefree_canonical_params(n, A)
    return StatStructure.euclidean(adapted_cubic(lambdas, mus))


def make_diagonal(values) -> StatStructure:
    """``K(e_i, e_i) = v_i e_i`` and ``K(e_i, e_j) = 0``; here ``[K, K] = 0``."""
    values = [float(v) for v in values]
    if not values:
        raise ValueError("need at least one diagonal value")
    return StatStructure.euclidean(SymCubic.from_dict(len(values), {(i, i, i): v for i, v in enumerate(values)}))


def tracefree_part(s: StatStructure) -> StatStructure:
    """Remove the trace: ``C - 3/(n+2) sym(g (x) E_flat)``."""
    n = s.dim
    e_flat = s.metric.lower_index(trace_vector(s))
    g = s.metric.gram
    sym = (
        np.einsum("ab,c->abc", g, e_flat)
        + np.einsum("ac,b->abc", g, e_flat)
        + np.einsum("bc,a->abc", g, e_flat)
    ) / 3.0
    out = StatStructure(s.metric, SymCubic.symmetrize(s.C - 3.0 / (n + 2) * sym))
    if not is_trace_free(out, 1e-10):
        raise ArithmeticError("trace removal did not produce a trace-free form")
    return out


def make_random(n: int, seed: int, tracefree: bool = False, metric: Metric | None = None) -> StatStructure:
    """Packed entries i.i.d. uniform on ``[-1, 1]``, optionally made trace-free."""
    _need_dim(n, 1)
    rng = np.random.default_rng(seed)
    cubic = SymCubic(n, rng.uniform(-1.0, 1.0, size=SymCubic.zeros(n).entries.size))
    s = StatStructure(metric or Metric.identity(n), cubic)
    return tracefree_part(s) if tracefree else s


def rotate(s: StatStructure, q) -> StatStructure:
    """Push a Euclidean structure forward by the orthogonal matrix ``q``:
    ``C_new(x, y, z) = C(q^T x, q^T y, q^T z)``."""
    q = np.asarray(q, dtype=float)
    return StatStructure(s.metric, SymCubic.symmetrize(np.einsum("abc,ia,jb,kc->ijk", s.C, q, q, q)))


def random_rotation(n: int, rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


@dataclass
class FamilySpec:
    kind: str
    dim: int
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        need = {
            "lambda_quarter": ("lambda",),
            "h_umbilical": ("lambda", "mu"),
            "tracefree_canonical": ("A",),
            "diagonal": ("values",),
        }.get(self.kind, ())
        missing = [p for p in need if p not in self.params]
        if missing:
            raise ValueError(f"family {self.kind} needs params {missing}")

    def build(self) -> StatStructure:
        p = self.params
        if self.kind == "lambda_quarter":
            return make_lambda_quarter(self.dim, p["lambda"])
        if self.kind == "h_umbilical":
            return make_h_umbilical(self.dim, p["lambda"], p["mu"])
        if self.kind == "tracefree_canonical":
            return make_tracefree_canonical(self.dim, p["A"])
        if self.kind == "diagonal":
            if len(p["values"]) != self.dim:
                raise ValueError("number of diagonal values must equal dim")
            return make_diagonal(p["values"])
        return make_random(self.dim, self.seed or 0, tracefree=self.kind == "random_tracefree")

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "dim": self.dim, "params": self.params, "seed": self.seed})

    @classmethod
    def from_json(cls, text: str) -> "FamilySpec":
        d = json.loads(text)
        return cls(d["kind"], int(d["dim"]), d.get("params", {}), d.get("seed"))


def generate(spec: FamilySpec) -> dict:
    """Instance JSON document for a family spec."""
    return instance_to_dict(spec.build())
