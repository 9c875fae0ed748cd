"""Truncated and filtered APK expansions, filter profiles, and an error lab."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from sdapk.apk import ApkBasis, ApkParams, MultiIndex, eigenvalue
from sdapk.geometry import weighted_quadrature


@dataclass(frozen=True)
class SeriesExpansion:
    basis: ApkBasis
    coeffs: np.ndarray

    def __post_init__(self):
        if len(self.coeffs) != len(self.basis):
            raise ValueError("coefficient count does not match the basis size")

    def __call__(self, points) -> np.ndarray:
        return self.basis.eval(points) @ self.coeffs

    def weighted_norm_squared(self) -> float:
        return float(np.sum(self.basis.norms_squared() * self.coeffs ** 2))


@dataclass(frozen=True)
class FilterProfile:
    """A damping law.

    ``kind`` is one of ``identity``, ``exponential`` (uses ``strength`` and
    ``order``), ``cosine``, ``natural`` (uses ``epsilon``, ``dt``, ``order``
    and ``gamma_filter``) and ``natural_approx``, the large-degree form
    ``exp(-epsilon dt (m+l)^(2 order))``.
    """

    kind: str = "identity"
    strength: float = 0.0
    order: int = 1
    epsilon: float = 0.0
    dt: float = 0.0
    gamma_filter: float = 0.0

    _KINDS = ("identity", "exponential", "cosine", "natural", "natural_approx")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.epsilon < 0 or self.dt < 0:
            raise ValueError("epsilon and dt must be non-negative")

    def sigma(self, idx: MultiIndex, basis_degree: int) -> float:
        k = idx.m + idx.l
        if self.kind == "identity":
            return 1.0
        if self.kind == "natural":
            return natural_filter(idx, self.epsilon, self.dt, self.order, self.gamma_filter)
        if self.kind == "natural_approx":
            return math.exp(-self.epsilon * self.dt * float(k) ** (2 * self.order))
        eta = k / basis_degree if basis_degree > 0 else 0.0
        if self.kind == "exponential":
            return sigma_exponential(eta, self.strength, self.order)
        return sigma_cosine(eta)


IDENTITY = FilterProfile()


def sigma_exponential(eta: float, alpha_f: float, p_f: float) -> float:
    return math.exp(-alpha_f * eta ** p_f)


def sigma_cosine(eta: float) -> float:
    return 0.5 * (1.0 + math.cos(math.pi * eta))


def natural_filter(idx: MultiIndex, epsilon: float, dt: float, p: int, gamma_filter: float) -> float:
    lam = eigenvalue(idx, gamma_filter)
    return math.exp(-epsilon * dt * lam ** p)


def viscosity_strength(c: float, h: float, N: int, p: int) -> float:
    """Spectral-viscosity amplitude ``c / (h N^(2p-1))``."""
    return c / (h * N ** (2 * p - 1))


def build_filter_matrix(basis: ApkBasis, profile: FilterProfile) -> np.ndarray:
    """Diagonal of M_sigma for ``basis`` (a 1D array; use ``np.diag`` for the matrix)."""
    diag = np.array([profile.sigma(i, basis.degree) for i in basis.ordering])
    diag[0] = 1.0
    return diag


def apply_filter(expansion: SeriesExpansion, profile: FilterProfile) -> SeriesExpansion:
    sig = build_filter_matrix(expansion.basis, profile)
    return replace(expansion, coeffs=expansion.coeffs * sig)


def project(f: Callable, basis: ApkBasis, quad_order: int | None = None) -> SeriesExpansion:
    """Weighted L2 projection of ``f(x, y)`` onto ``basis``."""
    if quad_order is None:
        quad_order = min(40, 2 * basis.degree + 20)
    rule = weighted_quadrature(basis.params, quad_order)
    vals = basis.eval(rule.points)
    fv = np.asarray(f(rule.points[:, 0], rule.points[:, 1]), dtype=float)
    num = vals.T @ (rule.weights * fv)
    den = vals.T ** 2 @ rule.weights
    return SeriesExpansion(basis, num / den)


# --------------------------------------------------------------------------
# Error study
# --------------------------------------------------------------------------

REGIONS = ("all", "interior", "edge0", "edge1", "edge2", "vertex10")


@dataclass(frozen=True)
class ErrorStudyRow:
    N: int
    region: str
    max_error: float
    x: float
    y: float
    fitted_exponent: float = float("nan")
    fitted_constant: float = float("nan")


def sample_region(region: str, n: int = 200) -> np.ndarray:
    """Dense sample points of a sub-region of the closed unit triangle."""
    t = np.linspace(0.0, 1.0, n + 1)
    if region in ("all", "interior"):
        i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = i + j <= n
        if region == "interior":
            keep &= (i > 0) & (j > 0) & (i + j < n)
        return np.column_stack([i[keep] / n, j[keep] / n])
    if region == "edge0":
        return np.column_stack([t, np.zeros_like(t)])
    if region == "edge1":
        return np.column_stack([1 - t, t])
    if region == "edge2":
        return np.column_stack([np.zeros_like(t), t])
    if region == "vertex10":
        return np.array([[1.0, 0.0]])
    raise ValueError(f"unknown region {region!r}")


def _refine(err_fn, region: str, start: np.ndarray, step: float) -> tuple[np.ndarray, float]:
    """Polish a lattice maximiser of ``err_fn`` inside ``region``."""
    if region == "vertex10":
        return start, float(err_fn(start[None])[0])
    if region.startswith("edge"):
        a, b = {"edge0": ((0, 0), (1, 0)), "edge1": ((1, 0), (0, 1)),
                "edge2": ((0, 0), (0, 1))}[region]
        a, b = np.array(a, float), np.array(b, float)
        s0 = float(np.dot(start - a, b - a) / np.dot(b - a, b - a))

        def g(s):
            s = np.clip(s[0], 0.0, 1.0)
            return -err_fn((a + s * (b - a))[None])[0]

        res = minimize(g, [s0], method="Nelder-Mead",
                       options={"xatol": 1e-7, "fatol": 1e-15, "initial_simplex": [[s0], [min(1, s0 + step)]]})
        s = float(np.clip(res.x[0], 0, 1))
        pt = a + s * (b - a)
    else:
        def g(z):
            x, y = z
            if x < 0 or y < 0 or x + y > 1:
                return np.inf
            return -err_fn(np.array([[x, y]]))[0]

        simplex = [start, start + [step, 0], start + [0, step]]
        simplex = [np.clip(s, 0, 1) for s in simplex]
        res = minimize(g, start, method="Nelder-Mead",
                       options={"xatol": 1e-7, "fatol": 1e-15, "initial_simplex": simplex})
        pt = res.x if np.isfinite(res.fun) and -res.fun >= err_fn(start[None])[0] else start
    val = float(err_fn(np.asarray(pt)[None])[0])
    return np.asarray(pt, float), val


def max_error(f: Callable, expansion: SeriesExpansion, region: str = "all",
              n_samples: int = 200, signed: bool = True, refine: bool = True):
    """Largest error ``f - expansion`` over ``region`` and its location.

    With ``signed`` the largest value of ``f - u`` is reported, otherwise the
    largest absolute value.
    """

    def err_fn(pts):
        e = np.asarray(f(pts[:, 0], pts[:, 1]), float) - expansion(pts)
        return e if signed else np.abs(e)

    pts = sample_region(region, n_samples)
    e = err_fn(pts)
    k = int(np.argmax(e))
    best, val = pts[k], float(e[k])
    if refine:
        cand, cval = _refine(err_fn, region, best, 1.0 / n_samples)
        if cval >= val:
            best, val = cand, cval
    return val, (float(best[0]), float(best[1]))


def fit_decay(Ns: Sequence[int], errors: Sequence[float], N_min: int = 2,
              rate: float | None = None) -> tuple[float, float]:
    """Fit ``err ~ K / N^r`` over ``N >= N_min``.

    The exponent ``r`` comes from a least-squares line in log-log space; the
    constant is the smallest ``K`` bounding every retained sample at rate
    ``rate`` (the fitted exponent when ``rate`` is None).
    """
    Ns = np.asarray(Ns, float)
    errors = np.asarray(errors, float)
    keep = (Ns >= N_min) & (errors > 0)
    if keep.sum() < 2:
        return float("nan"), float("nan")
    slope, _ = np.polyfit(np.log(Ns[keep]), np.log(errors[keep]), 1)
    r = -slope
    use = r if rate is None else rate
    K = float(np.max(errors[keep] * Ns[keep] ** use))
    return float(r), K


def error_study(f: Callable, params: ApkParams, profile_for: Callable[[int], FilterProfile],
                N_range: Sequence[int], regions: Sequence[str] = ("all",),
                n_samples: int = 200, signed: bool = True,
                rate: float | None = None, quad_order: int | None = None) -> list[ErrorStudyRow]:
    """Maximum error of filtered expansions of ``f`` for each degree and region.

    ``profile_for(N)`` supplies the filter used at degree ``N``.  Each region
    gets its own decay fit, copied into every row of that region.
    """
    rows = []
    for region in regions:
        block = []
        for N in N_range:
            exp_N = project(f, ApkBasis(params, N), quad_order)
            filt = apply_filter(exp_N, profile_for(N))
            val, (x, y) = max_error(f, filt, region, n_samples, signed)
            block.append(ErrorStudyRow(N, region, val, x, y))
        r, K = fit_decay([b.N for b in block], [b.max_error for b in block], rate=rate)
        rows += [replace(b, fitted_exponent=r, fitted_constant=K) for b in block]
    return rows
