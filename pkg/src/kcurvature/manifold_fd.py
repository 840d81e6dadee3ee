"""Finite-difference chart calculus for statistical structures on open sets of R^n.

A :class:`ChartField` supplies ``g`` and ``C`` as functions of the coordinates.
From them we build the Levi-Civita symbols, the statistical connection
``nabla = nabla_hat + K`` and its dual ``nabla_bar = nabla_hat - K``, their
curvature tensors, and residuals of the identities relating them.

Conventions
-----------
``G[a, b, c]`` is the symbol ``Gamma^a_{bc}`` (``nabla_{e_b} e_c = G[a, b, c] e_a``).
A (1,3) tensor ``T`` is stored as ``T[c, d, b, a] = (T(e_c, e_d) e_b)^a``, the
same layout as :attr:`StatStructure.bracket`, with

    R(e_c, e_d) e_b = d_c G[:, d, b] - d_d G[:, c, b] + G[:, c, e] G[e, d, b] - G[:, d, e] G[e, c, b].

Discretization: first derivatives of ``g`` and ``C`` are fourth-order central
differences with step ``h``; derivatives of symbols and of curvature tensors
are second-order central differences with step ``h/2``.  The reach is
``2h`` for symbols, ``2.5h`` for curvature and ``3h`` for the Bianchi check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Callable

import numpy as np

from .tensor_core import Metric, StatStructure, SymCubic

BIANCHI_ACTION = "K_U acts as a derivation on all four slots of the (1,3) tensor"
MAX_POLY_DEGREE = 6

# Nested differences lose about eps / h^2; extended precision keeps that
# floor well under the truncation error at the default step.
EXTENDED = np.longdouble if np.finfo(np.longdouble).eps < np.finfo(float).eps else np.float64
PRECISIONS = {"double": np.float64, "extended": EXTENDED}


def _solve(a, b):
    """``a^{-1} b`` by Gaussian elimination with partial pivoting (any float dtype)."""
    a = np.array(a, copy=True)
    shape = b.shape
    b = np.array(b, copy=True).reshape(a.shape[0], -1)
    n = a.shape[0]
    for i in range(n):
        piv = i + int(np.argmax(np.abs(a[i:, i])))
        if a[piv, i] == 0:
            raise ValueError("singular metric")
        if piv != i:
            a[[i, piv]] = a[[piv, i]]
            b[[i, piv]] = b[[piv, i]]
        f = a[i + 1 :, i] / a[i, i]
        a[i + 1 :] -= np.outer(f, a[i])
        b[i + 1 :] -= np.outer(f, b[i])
    x = np.empty_like(b)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - a[i, i + 1 :] @ x[i + 1 :]) / a[i, i]
    return x.reshape(shape)


def _bracket(k):
    kk = np.einsum("aie,ejk->ijka", k, k)
    return kk - kk.transpose(1, 0, 2, 3)


@dataclass(frozen=True, eq=False)
class ChartField:
    """Statistical structure given on a coordinate box.

    Parameters
    ----------
    dim : int
    g_at : callable
        Point to Gram matrix (ndarray or :class:`Metric`).
    C_at : callable
        Point to cubic form (full ndarray or :class:`SymCubic`).
    domain_hint : (lower, upper)
        Box bounds; probe points must keep the stencil inside.
    fd_step : float
    precision : {"extended", "double"}
        Working precision of the difference quotients; functions written with
        numpy ufuncs keep the extended type of the probe point.
    """

    dim: int
    g_at: Callable
    C_at: Callable
    domain_hint: tuple
    fd_step: float = 1e-3
    name: str = "field"
    precision: str = "extended"

    def __post_init__(self):
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {sorted(PRECISIONS)}")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")
        lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (self.dim,)) for b in self.domain_hint)
        if np.any(lo >= hi):
            raise ValueError("domain lower bounds must be below upper bounds")
        object.__setattr__(self, "domain_hint", (lo.copy(), hi.copy()))

    def with_step(self, h: float) -> "ChartField":
        return ChartField(self.dim, self.g_at, self.C_at, self.domain_hint, h, self.name, self.precision)

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    def gram(self, p) -> np.ndarray:
        g = self.g_at(np.asarray(p, dtype=self.dtype))
        g = g.gram if isinstance(g, Metric) else np.asarray(g, dtype=self.dtype)
        if g.shape != (self.dim, self.dim):
            raise ValueError(f"g_at returned shape {g.shape}, expected {(self.dim, self.dim)}")
        return g

    def cubic(self, p) -> np.ndarray:
        c = self.C_at(np.asarray(p, dtype=self.dtype))
        c = c.full if isinstance(c, SymCubic) else np.asarray(c, dtype=self.dtype)
        if c.shape != (self.dim,) * 3:
            raise ValueError(f"C_at returned shape {c.shape}, expected {(self.dim,) * 3}")
        return c

    def structure(self, p) -> StatStructure:
        """The algebraic structure at ``p``; validates g as SPD and C as symmetric."""
        g = np.asarray(self.gram(p), dtype=float)
        return StatStructure(Metric(g), SymCubic.from_full(np.asarray(self.cubic(p), dtype=float), tol=1e-9))

    def require_interior(self, p, reach: float) -> np.ndarray:
        p = np.asarray(p, dtype=self.dtype)
        if p.shape != (self.dim,):
            raise ValueError(f"point must have {self.dim} coordinates")
        lo, hi = self.domain_hint
        margin = reach * self.fd_step
        if np.any(p - lo < margin) or np.any(hi - p < margin):
            raise ValueError(
                f"point {p.astype(float).tolist()} is closer than {reach:g}*fd_step to the domain boundary"
            )
        return p


@dataclass
class CurvatureSample:
    point: np.ndarray
    Rhat: np.ndarray
    R: np.ndarray
    Rbar: np.ndarray
    bracketKK: np.ndarray

    def antisymmetry(self) -> float:
        return max(float(np.max(np.abs(t + t.transpose(1, 0, 2, 3)))) for t in (self.Rhat, self.R, self.Rbar))


def _d4(func, p, h):
    """Fourth-order central first derivatives; result[c] = d_c func(p)."""
    out = []
    for c in range(p.size):
        e = np.zeros(p.size, dtype=p.dtype)
        e[c] = h
        out.append((-func(p + 2 * e) + 8 * func(p + e) - 8 * func(p - e) + func(p - 2 * e)) / (12 * h))
    return np.array(out)


def _d2(func, p, h):
    """Second-order central first derivatives; result[c] = d_c func(p)."""
    out = []
    for c in range(p.size):
        e = np.zeros(p.size, dtype=p.dtype)
        e[c] = h
        out.append((func(p + e) - func(p - e)) / (2 * h))
    return np.array(out)


def _levi_civita(f: ChartField, p) -> np.ndarray:
    g = f.gram(p)
    dg = _d4(f.gram, p, f.fd_step)  # dg[c, a, b] = d_c g_ab
    # lowered symbols Gamma_{d, bc} = (d_b g_dc + d_c g_db - d_d g_bc) / 2
    low = 0.5 * (dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg)
    gam = _solve(g, low)
    return 0.5 * (gam + gam.transpose(0, 2, 1))


def _difference(f: ChartField, p) -> np.ndarray:
    return _solve(f.gram(p), f.cubic(p))


def christoffel_hat(f: ChartField, p) -> np.ndarray:
    """Levi-Civita symbols ``G[a, b, c]`` at ``p``, exactly symmetric in ``b, c``."""
    p = f.require_interior(p, 2)
    return _levi_civita(f, p).astype(float)


def statistical_connections(f: ChartField, p):
    """Symbols of ``nabla = nabla_hat + K`` and ``nabla_bar = nabla_hat - K``."""
    p = f.require_interior(p, 2)
    gam, k = _levi_civita(f, p), _difference(f, p)
    return (gam + k).astype(float), (gam - k).astype(float)


def check_codazzi(f: ChartField, p) -> float:
    """``max |nabla g + 2 C|`` together with the asymmetry of ``nabla g``.

    ``(nabla_c g)_{ab} = d_c g_ab - N[d, c, a] g_db - N[d, c, b] g_ad`` for the
    symbols ``N`` of ``nabla``; for a statistical structure it equals ``-2 C_cab``.
    """
    p = f.require_interior(p, 2)
    g = f.gram(p)
    nab = _levi_civita(f, p) + _difference(f, p)
    dg = _d4(f.gram, p, f.fd_step)
    ng = dg - np.einsum("dca,db->cab", nab, g) - np.einsum("dcb,ad->cab", nab, g)
    mismatch = float(np.max(np.abs(ng + 2.0 * f.cubic(p))))
    asym = max(
        float(np.max(np.abs(ng - ng.transpose(1, 0, 2)))),
        float(np.max(np.abs(ng - ng.transpose(0, 2, 1)))),
    )
    return max(mismatch, asym)


def _riemann(gam, dgam):
    """Curvature from symbols and their derivatives ``dgam[c] = d_c G``."""
    dterm = np.einsum("cadb->cdba", dgam)
    quad = np.einsum("ace,edb->cdba", gam, gam)
    return dterm - dterm.transpose(1, 0, 2, 3) + quad - quad.transpose(1, 0, 2, 3)


def _symbols(f: ChartField, p):
    gam, k = _levi_civita(f, p), _difference(f, p)
    return np.stack([gam, gam + k, gam - k])


def _curvatures(f: ChartField, p):
    """``(Rhat, R, Rbar)`` at ``p`` without boundary checks."""
    sym = _symbols(f, p)
    dsym = _d2(lambda q: _symbols(f, q), p, f.fd_step / 2)  # [c, which, a, b, d]
    return tuple(_riemann(sym[w], dsym[:, w]) for w in range(3))


def curvature_tensors(f: ChartField, p) -> CurvatureSample:
    p = f.require_interior(p, 2.5)
    rhat, r, rbar = _curvatures(f, p)
    kk = _bracket(_difference(f, p))
    return CurvatureSample(p.astype(float), *(t.astype(float) for t in (rhat, r, rbar, kk)))


def riemann_direct(f: ChartField, p) -> np.ndarray:
    """Levi-Civita curvature from second derivatives of ``g``.

    Uses ``R_{iklm} = (g_im,kl + g_kl,im - g_il,km - g_km,il)/2
    + g_np (G^n_kl G^p_im - G^n_km G^p_il)``, an independent route to the
    nested-difference tensor, and returns it in the ``[l, m, k, a]`` layout.
    """
    p = f.require_interior(p, 2)
    n, h = f.dim, f.fd_step
    g0 = f.gram(p)
    dd = np.zeros((n, n, n, n))  # dd[i, j] = d_i d_j g
    eye = np.eye(n, dtype=p.dtype) * h
    for i in range(n):
        dd[i, i] = (f.gram(p + eye[i]) - 2 * g0 + f.gram(p - eye[i])) / (h * h)
        for j in range(i + 1, n):
            v = (
                f.gram(p + eye[i] + eye[j])
                - f.gram(p + eye[i] - eye[j])
                - f.gram(p - eye[i] + eye[j])
                + f.gram(p - eye[i] - eye[j])
            ) / (4 * h * h)
            dd[i, j] = dd[j, i] = v
    gam = _levi_civita(f, p)
    # second[k,l,i,m] = d_k d_l g_im
    low = 0.5 * (
        np.einsum("klim->iklm", dd)
        + np.einsum("imkl->iklm", dd)
        - np.einsum("kmil->iklm", dd)
        - np.einsum("ilkm->iklm", dd)
    )
    low += np.einsum("np,nkl,pim->iklm", g0, gam, gam) - np.einsum("np,nkm,pil->iklm", g0, gam, gam)
    return _solve(g0, low).transpose(2, 3, 1, 0)


def _lower(t, g):
    # T_l[c, d, b, w] = g(T(e_c, e_d) e_b, e_w)
    return np.einsum("cdba,aw->cdbw", t, g)


def _nabla_hat_c(f: ChartField, p):
    """``(nabla_hat_x C)(w, y, z)`` as ``D[x, w, y, z]``."""
    gam = _levi_civita(f, p)
    dc = _d4(f.cubic, p, f.fd_step)
    c = f.cubic(p)
    return (
        dc
        - np.einsum("exw,eyz->xwyz", gam, c)
        - np.einsum("exy,wez->xwyz", gam, c)
        - np.einsum("exz,wye->xwyz", gam, c)
    )


def _covariant_r(f: ChartField, p, gam):
    """``(nabla_hat_u T)[u, c, d, b, a]`` for ``T = R + Rbar``."""
    dt = _d2(lambda q: (lambda r: r[1] + r[2])(_curvatures(f, q)), p, f.fd_step / 2)
    r = _curvatures(f, p)
    t = r[1] + r[2]
    return (
        dt
        + np.einsum("aue,cdbe->ucdba", gam, t)
        - np.einsum("euc,edba->ucdba", gam, t)
        - np.einsum("eud,ceba->ucdba", gam, t)
        - np.einsum("eub,cdea->ucdba", gam, t)
    ), r


def _cyclic(t):
    # sum over cyclic permutations of the first three slots (u, c, d)
    return t + t.transpose(2, 0, 1, 3, 4) + t.transpose(1, 2, 0, 3, 4)


def _k_derivation(k, s):
    """``(K_u . S)[u, c, d, b, a]`` with ``K_u`` acting on all four slots."""
    return (
        np.einsum("aue,cdbe->ucdba", k, s)
        - np.einsum("euc,edba->ucdba", k, s)
        - np.einsum("eud,ceba->ucdba", k, s)
        - np.einsum("eub,cdea->ucdba", k, s)
    )


def fd_tolerance(h: float, scale: float) -> float:
    return 100.0 * h * h * scale


def check_identities(f: ChartField, p, tol: float | None = None) -> dict:
    """Residuals of the connection identities at ``p``.

    Keys: ``duality``, ``sum_identity`` (against the direct curvature route),
    ``hessian_relation`` (only when ``R`` vanishes at tolerance), ``bianchi``,
    ``nabla_hat_K_symmetry`` and ``curvature_symmetry_equivalence``.  The
    last holds the truth values of ``R = Rbar``, ``nabla_hat K`` symmetric and
    ``R`` skew in its last pair, which must agree.  ``tolerance`` is
    ``100 h^2 scale`` unless ``tol`` is given.
    """
    p = f.require_interior(p, 3)
    g = f.gram(p)
    gam = _levi_civita(f, p)
    k = _difference(f, p)
    f.structure(p)  # validates g and C at the point
    kk = _bracket(k)
    nab_t, (rhat, r, rbar) = _covariant_r(f, p, gam)
    rhat_direct = riemann_direct(f, p)

    scale = 1.0 + max(float(np.max(np.abs(t))) for t in (rhat, r, rbar, kk))
    tol = fd_tolerance(f.fd_step, scale) if tol is None else tol

    out: dict = {}
    out["duality"] = float(np.max(np.abs(_lower(r, g) + _lower(rbar, g).transpose(0, 1, 3, 2))))
    out["sum_identity"] = float(np.max(np.abs(r + rbar - 2.0 * rhat_direct - 2.0 * kk)))
    if float(np.max(np.abs(r))) <= tol:
        out["hessian_relation"] = float(np.max(np.abs(rhat + kk)))
    lhs = _cyclic(nab_t)
    rhs = _cyclic(_k_derivation(k, rbar - r))
    out["bianchi"] = float(np.max(np.abs(lhs - rhs)))

    dc = _nabla_hat_c(f, p)
    # R - Rbar lowered equals twice the antisymmetrized nabla_hat C
    asym = 2.0 * float(np.max(np.abs(dc - dc.transpose(2, 1, 0, 3))))
    out["nabla_hat_K_symmetry"] = asym
    r_eq = float(np.max(np.abs(_lower(r - rbar, g))))
    skew = float(np.max(np.abs(_lower(r, g) + _lower(r, g).transpose(0, 1, 3, 2))))
    flags = [r_eq <= tol, asym <= tol, skew <= tol]
    out["curvature_symmetry_equivalence"] = {
        "R_equals_Rbar": flags[0],
        "nabla_hat_K_symmetric": flags[1],
        "R_skew_in_last_pair": flags[2],
        "values": [r_eq, asym, skew],
        "agree": all(flags) or not any(flags),
    }
    out["tolerance"] = tol
    out["bianchi_scale"] = 1.0 + float(max(np.max(np.abs(lhs)), np.max(np.abs(rhs))))
    out["bianchi_action"] = BIANCHI_ACTION
    return out


RESIDUAL_KEYS = ("duality", "sum_identity", "hessian_relation", "bianchi")


def convergence_ratios(f: ChartField, p) -> dict:
    """Residual ratio ``r(h) / r(h/2)`` per identity, a Richardson-style order check."""
    a = check_identities(f, p)
    b = check_identities(f.with_step(f.fd_step / 2), p)
    return {key: a[key] / b[key] if b[key] > 0 else float("inf") for key in RESIDUAL_KEYS if key in a and key in b}


# ---------------------------------------------------------------------------
# Built-in fields


def hessian_exp(fd_step: float = 1e-3, bound: float = 2.0) -> ChartField:
    """Hessian structure of ``phi = e^x + e^y + e^(x+y)`` with ``C = -phi_abc / 2``.

    The statistical connection is the flat coordinate connection.
    """

    def g_at(p):
        x, y = p
        exy = np.exp(x + y)
        return np.array([[np.exp(x) + exy, exy], [exy, np.exp(y) + exy]])

    def c_at(p):
        x, y = p
        exy = np.exp(x + y)
        c = np.empty((2, 2, 2), dtype=p.dtype)
        c[0, 0, 0] = np.exp(x) + exy
        c[1, 1, 1] = np.exp(y) + exy
        c[0, 0, 1] = c[0, 1, 0] = c[1, 0, 0] = exy
        c[0, 1, 1] = c[1, 0, 1] = c[1, 1, 0] = exy
        return -0.5 * c

    return ChartField(2, g_at, c_at, (-bound, bound), fd_step, "hessian-exp")


def sphere(dim: int = 2, radius: float = 1.0, fd_step: float = 1e-3, bound: float = 2.0) -> ChartField:
    """Round sphere in stereographic coordinates, ``g = 4 r^4 / (r^2 + |x|^2)^2 delta``, C = 0."""
    if dim < 2:
        raise ValueError("sphere chart needs dim >= 2")
    if radius <= 0:
        raise ValueError("radius must be positive")
    r2 = radius * radius

    def g_at(p):
        return 4.0 * r2 * r2 / (r2 + p @ p) ** 2 * np.eye(dim)

    return ChartField(dim, g_at, lambda p: np.zeros((dim,) * 3), (-bound, bound), fd_step, "sphere")


def constant(s: StatStructure, fd_step: float = 1e-3, bound: float = 1.0) -> ChartField:
    """The algebraic structure ``s`` extended as a constant field."""
    gram, c = np.array(s.metric.gram), np.array(s.C)
    return ChartField(s.dim, lambda p: gram, lambda p: c, (-bound, bound), fd_step, "constant")


def hessian_from_potential(phi: Callable, dim: int, domain, fd_step: float = 1e-3, inner_step: float = 1e-2) -> ChartField:
    """Hessian structure of a potential given only as a function.

    ``g = nabla^2 phi`` and ``C = -phi_abc / 2`` by central differences with
    ``inner_step``; less accurate than an analytic field, but always a genuine
    Hessian pair up to the inner discretization.
    """
    h = inner_step
    eye = np.eye(dim) * h

    def hess(p):
        out = np.empty((dim, dim), dtype=p.dtype)
        f0 = phi(p)
        for i in range(dim):
            out[i, i] = (phi(p + eye[i]) - 2 * f0 + phi(p - eye[i])) / (h * h)
            for j in range(i + 1, dim):
                out[i, j] = out[j, i] = (
                    phi(p + eye[i] + eye[j]) - phi(p + eye[i] - eye[j])
                    - phi(p - eye[i] + eye[j]) + phi(p - eye[i] - eye[j])
                ) / (4 * h * h)
        return out

    def c_at(p):
        d = _d4(hess, p, h)  # d[a, b, c] = d_a g_bc
        return -0.5 * (d + d.transpose(1, 2, 0) + d.transpose(2, 0, 1)) / 3.0

    return ChartField(dim, hess, c_at, domain, fd_step, "hessian-potential")


# ---------------------------------------------------------------------------
# Polynomial fields


@dataclass(frozen=True)
class Polynomial:
    """``sum coef * prod x_i^powers_i``."""

    dim: int
    coefs: np.ndarray
    powers: np.ndarray  # (terms, dim) non-negative integers

    @classmethod
    def from_terms(cls, dim: int, terms) -> "Polynomial":
        coefs, powers = [], []
        for t in terms:
            pw = [int(e) for e in t["powers"]]
            if len(pw) != dim or any(e < 0 for e in pw):
                raise ValueError(f"powers {t['powers']} must be {dim} non-negative integers")
            if sum(pw) > MAX_POLY_DEGREE:
                raise ValueError(f"total degree {sum(pw)} exceeds {MAX_POLY_DEGREE}")
            coefs.append(float(t["coef"]))
            powers.append(pw)
        return cls(dim, np.array(coefs, dtype=float), np.array(powers, dtype=int).reshape(-1, dim))

    def __call__(self, p):
        p = np.asarray(p)
        if self.coefs.size == 0:
            return p.dtype.type(0)
        return self.coefs @ np.prod(p ** self.powers, axis=1)

    def derivative(self, i: int) -> "Polynomial":
        keep = self.powers[:, i] > 0
        powers = self.powers[keep].copy()
        coefs = self.coefs[keep] * powers[:, i]
        powers[:, i] -= 1
        return Polynomial(self.dim, coefs, powers)


def _entries(dim, order):
    return list(combinations_with_replacement(range(dim), order))


def _poly_table(dim, spec, order, name):
    table = {}
    for item in spec:
        idx = tuple(int(i) for i in item["index"])
        if len(idx) != order or list(idx) != sorted(idx) or any(not 0 <= i < dim for i in idx):
            raise ValueError(f"{name} index {item['index']} must be {order} sorted indices below {dim}")
        if idx in table:
            raise ValueError(f"duplicate {name} entry {idx}")
        table[idx] = Polynomial.from_terms(dim, item["terms"])
    return table


def polynomial_field(doc: dict, fd_step: float = 1e-3) -> ChartField:
    """Field from polynomial coefficients.

    ``doc`` has ``dim``, ``domain`` (``[[lo, hi], ...]``) and either
    ``potential`` (a term list; the Hessian pair of that polynomial) or
    ``g`` and ``C``, lists of ``{"index": [i, j(, k)], "terms": [...]}`` for
    sorted indices.  A term is ``{"coef": c, "powers": [p_1, ..., p_n]}``.
    Missing entries are zero.
    """
    dim = int(doc["dim"])
    if dim < 1:
        raise ValueError("dim must be positive")
    dom = np.asarray(doc.get("domain", [[-1.0, 1.0]] * dim), dtype=float)
    if dom.shape != (dim, 2):
        raise ValueError("domain must list [lo, hi] for each coordinate")
    domain = (dom[:, 0], dom[:, 1])

    if "potential" in doc:
        phi = Polynomial.from_terms(dim, doc["potential"])
        g_tab = {(i, j): phi.derivative(i).derivative(j) for i, j in _entries(dim, 2)}
        c_tab = {
            (i, j, k): Polynomial(dim, -0.5 * q.coefs, q.powers)
            for (i, j, k) in _entries(dim, 3)
            for q in [phi.derivative(i).derivative(j).derivative(k)]
        }
        name = "polynomial-hessian"
    else:
        g_tab = _poly_table(dim, doc["g"], 2, "g")
        c_tab = _poly_table(dim, doc.get("C", []), 3, "C")
        name = "polynomial"

    def g_at(p):
        out = np.zeros((dim, dim), dtype=p.dtype)
        for (i, j), poly in g_tab.items():
            out[i, j] = out[j, i] = poly(p)
        return out

    def c_at(p):
        out = np.zeros((dim,) * 3, dtype=p.dtype)
        for (i, j, k), poly in c_tab.items():
            v = poly(p)
            for a, b, c in {(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}:
                out[a, b, c] = v
        return out

    return ChartField(dim, g_at, c_at, domain, fd_step, name)


def load_polynomial_field(text: str, fd_step: float = 1e-3) -> ChartField:
    return polynomial_field(json.loads(text), fd_step)
