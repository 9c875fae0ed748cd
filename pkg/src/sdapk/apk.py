"""Jacobi and Appell-Proriol-Koornwinder (APK) polynomial kernels.

The APK family on the unit triangle ``T = {x >= 0, y >= 0, x + y <= 1}`` is

    A_{m,l}(x, y) = P_m^{(alpha-1, a_l)}(1 - 2x)
                    * P_l^{(p, beta-1)}(2y/(1-x) - 1) * (1-x)^l

with ``p = gamma - alpha - beta`` and ``a_l = p + beta + 2l``.  The collapsed
factor is evaluated in homogeneous form (``s = 2y + x - 1``, ``t = 1 - x``),
so nothing here ever divides by ``1 - x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import poch

_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class ApkParams:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"alpha and beta must be positive, got {self}")
        if not self.gamma > self.alpha + self.beta - 1:
            raise ValueError(f"need gamma > alpha + beta - 1, got {self}")

    @property
    def p(self) -> float:
        return self.gamma - self.alpha - self.beta

    def a_l(self, l: int) -> float:
        return self.p + self.beta + 2 * l

    def weight(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return x ** (self.alpha - 1) * y ** (self.beta - 1) * (1 - x - y) ** self.p

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


@dataclass(frozen=True, order=True)
class MultiIndex:
    m: int
    l: int

    @property
    def degree(self) -> int:
        return self.m + self.l


PKD = ApkParams(1.0, 1.0, 2.0)


def basis_ordering(degree: int) -> list[MultiIndex]:
    """All (m, l) with m + l <= degree, degree-major, ascending l inside a degree."""
    return [MultiIndex(d - l, l) for d in range(degree + 1) for l in range(d + 1)]


def num_modes(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


# --------------------------------------------------------------------------
# Jacobi polynomials
# --------------------------------------------------------------------------

def _recurrence_coeffs(k: int, a: float, b: float) -> tuple[float, float, float]:
    """(A, B, C) with P_k = (A x + B) P_{k-1} - C P_{k-2}, valid for k >= 2."""
    s = 2 * k + a + b
    A = (s - 1) * s / (2 * k * (k + a + b))
    B = (s - 1) * (a * a - b * b) / (2 * k * (k + a + b) * (s - 2))
    C = (k + a - 1) * (k + b - 1) * s / (k * (k + a + b) * (s - 2))
    return A, B, C


def jacobi_eval(n: int, a: float, b: float, x):
    """Jacobi polynomial P_n^{(a,b)}(x) by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p0 = np.ones_like(x)
    if n == 0:
        return p0 if p0.ndim else float(p0)
    p1 = 0.5 * (a - b) + 0.5 * (a + b + 2) * x
    for k in range(2, n + 1):
        A, B, C = _recurrence_coeffs(k, a, b)
        p0, p1 = p1, (A * x + B) * p1 - C * p0
    return p1 if p1.ndim else float(p1)


def jacobi_deriv(n: int, a: float, b: float, x, order: int = 1):
    """``order``-th derivative of P_n^{(a,b)} via the shifted-parameter identity."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    x = np.asarray(x, dtype=float)
    if n < order:
        out = np.zeros_like(x)
        return out if out.ndim else 0.0
    scale = 1.0
    for j in range(1, order + 1):
        scale *= 0.5 * (n + a + b + j)
    return scale * jacobi_eval(n - order, a + order, b + order, x)


def pochhammer(xi: float, j: int) -> float:
    """Rising factorial xi (xi+1) ... (xi+j-1); (xi)_0 = 1."""
    if j < 0 or int(j) != j:
        raise ValueError("j must be a non-negative integer")
    out = 1.0
    for i in range(int(j)):
        out *= xi + i
    return out


def eigenvalue(idx: MultiIndex, gamma: float) -> float:
    n = idx.m + idx.l
    return n * (n + gamma)


# --------------------------------------------------------------------------
# APK polynomials
# --------------------------------------------------------------------------

def _collapsed_factor(l: int, a: float, b: float, s, t, nderiv: int):
    """Homogenised q_l(s, t) = t^l P_l^{(a,b)}(s/t) and its (s, t) derivatives.

    Returns a dict with keys among q, s, t, ss, st, tt.
    """
    zero = np.zeros_like(s)
    q0 = {"q": np.ones_like(s), "s": zero, "t": zero, "ss": zero, "st": zero, "tt": zero}
    if l == 0:
        return q0
    c0, c1 = 0.5 * (a - b), 0.5 * (a + b + 2)
    q1 = {"q": c0 * t + c1 * s, "s": c1 + zero, "t": c0 + zero,
          "ss": zero, "st": zero, "tt": zero}
    prev, cur = q0, q1
    for k in range(2, l + 1):
        A, B, C = _recurrence_coeffs(k, a, b)
        lin = A * s + B * t
        nxt = {"q": lin * cur["q"] - C * t * t * prev["q"]}
        if nderiv >= 1:
            nxt["s"] = A * cur["q"] + lin * cur["s"] - C * t * t * prev["s"]
            nxt["t"] = (B * cur["q"] + lin * cur["t"]
                        - 2 * C * t * prev["q"] - C * t * t * prev["t"])
        if nderiv >= 2:
            nxt["ss"] = 2 * A * cur["s"] + lin * cur["ss"] - C * t * t * prev["ss"]
            nxt["st"] = (A * cur["t"] + B * cur["s"] + lin * cur["st"]
                         - 2 * C * t * prev["s"] - C * t * t * prev["st"])
            nxt["tt"] = (2 * B * cur["t"] + lin * cur["tt"] - 2 * C * prev["q"]
                         - 4 * C * t * prev["t"] - C * t * t * prev["tt"])
        prev, cur = cur, nxt
    return cur


def _apk_parts(params: ApkParams, m: int, l: int, x, y, nderiv: int):
    """Value and partial derivatives of A_{m,l} up to ``nderiv`` (0, 1 or 2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a_r, b_r = params.alpha - 1, params.a_l(l)
    z = 1 - 2 * x
    R = jacobi_eval(m, a_r, b_r, z)
    Q = _collapsed_factor(l, params.p, params.beta - 1, 2 * y + x - 1, 1 - x, nderiv)
    out = {"f": R * Q["q"]}
    if nderiv >= 1:
        dR = -2 * jacobi_deriv(m, a_r, b_r, z, 1)
        Qx = Q["s"] - Q["t"]
        Qy = 2 * Q["s"]
        out["x"] = dR * Q["q"] + R * Qx
        out["y"] = R * Qy
    if nderiv >= 2:
        ddR = 4 * jacobi_deriv(m, a_r, b_r, z, 2)
        Qxx = Q["ss"] - 2 * Q["st"] + Q["tt"]
        Qxy = 2 * (Q["ss"] - Q["st"])
        Qyy = 4 * Q["ss"]
        out["xx"] = ddR * Q["q"] + 2 * dR * Qx + R * Qxx
        out["xy"] = dR * Qy + R * Qxy
        out["yy"] = R * Qyy
    return out


def _check_in_triangle(x, y, strict=False):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if strict:
        ok = (x > 0) & (y > 0) & (x + y < 1)
        what = "open"
    else:
        ok = (x >= -_EDGE_TOL) & (y >= -_EDGE_TOL) & (x + y <= 1 + _EDGE_TOL)
        what = "closed"
    if not np.all(ok):
        raise ValueError(f"point(s) outside the {what} unit triangle")


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def apk_eval(params: ApkParams, idx: MultiIndex, point):
    x, y = point
    _check_in_triangle(x, y)
    return _scalar(_apk_parts(params, idx.m, idx.l, x, y, 0)["f"])


def apk_grad(params: ApkParams, idx: MultiIndex, point):
    x, y = point
    _check_in_triangle(x, y)
    d = _apk_parts(params, idx.m, idx.l, x, y, 1)
    return _scalar(d["x"]), _scalar(d["y"])


def apply_D(params: ApkParams, idx: MultiIndex, point):
    """Apply the second-order operator whose eigenfunctions are the APK polynomials."""
    x, y = point
    _check_in_triangle(x, y, strict=True)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = _apk_parts(params, idx.m, idx.l, x, y, 2)
    g = params.gamma
    val = ((x * x - x) * d["xx"] + 2 * x * y * d["xy"] + (y * y - y) * d["yy"]
           + ((g + 1) * x - params.alpha) * d["x"]
           + ((g + 1) * y - params.beta) * d["y"])
    return _scalar(val)


def kappa(params: ApkParams, idx: MultiIndex) -> float:
    """Normalisation constant kappa_{l,m}; only defined for m >= 1."""
    m, l = idx.m, idx.l
    if m < 1:
        raise ValueError("kappa_{l,m} is 0/0 at m = 0")
    al = params.a_l(l)
    p = params.p
    num = poch(l + params.beta, p) * m * poch(m + al, params.alpha)
    den = poch(l + 1, p) * poch(m, params.alpha) * (m + al)
    return math.sqrt(num / den)


def norm_squared_closed_form(params: ApkParams, idx: MultiIndex) -> float:
    k2 = kappa(params, idx) ** 2
    return 1.0 / ((2 * idx.l + params.gamma - params.alpha)
                  * (2 * idx.degree + params.gamma) * k2)


def norm_squared(params: ApkParams, idx: MultiIndex, quad_order: int | None = None) -> float:
    """Weighted L2 norm squared by collapsed Gauss-Jacobi quadrature."""
    from sdapk.geometry import weighted_quadrature

    if quad_order is None:
        quad_order = 2 * idx.degree
    rule = weighted_quadrature(params, quad_order)
    vals = _apk_parts(params, idx.m, idx.l, rule.points[:, 0], rule.points[:, 1], 0)["f"]
    return float(np.dot(rule.weights, vals * vals))


@dataclass(frozen=True)
class ApkBasis:
    """Ordered APK family up to total degree ``degree``."""

    params: ApkParams
    degree: int
    ordering: tuple[MultiIndex, ...] = field(init=False)

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        object.__setattr__(self, "ordering", tuple(basis_ordering(self.degree)))

    def __len__(self):
        return len(self.ordering)

    def index_of(self, idx: MultiIndex) -> int:
        return self.ordering.index(idx)

    @cached_property
    def total_degrees(self) -> np.ndarray:
        return np.array([i.degree for i in self.ordering])

    def eigenvalues(self, gamma: float | None = None) -> np.ndarray:
        g = self.params.gamma if gamma is None else gamma
        return np.array([eigenvalue(i, g) for i in self.ordering])

    def eval(self, points) -> np.ndarray:
        """Matrix ``(npts, K)`` of basis values."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        return np.stack([_apk_parts(self.params, i.m, i.l, x, y, 0)["f"]
                         for i in self.ordering], axis=1)

    def grad(self, points) -> tuple[np.ndarray, np.ndarray]:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        parts = [_apk_parts(self.params, i.m, i.l, x, y, 1) for i in self.ordering]
        return (np.stack([d["x"] for d in parts], axis=1),
                np.stack([d["y"] for d in parts], axis=1))

    def norms_squared(self, quad_order: int | None = None) -> np.ndarray:
        from sdapk.geometry import weighted_quadrature

        rule = weighted_quadrature(self.params, quad_order or 2 * self.degree)
        vals = self.eval(rule.points)
        return rule.weights @ (vals * vals)
