"""Spectral Difference discretisation on periodic triangulations.

The state lives at the ``K_s`` solution points of every cell.  Each residual
evaluation extends the state to the ``K_F`` flux points, replaces boundary
fluxes by a Godunov-type numerical flux, interpolates the flux with the
degree ``N+1`` APK basis and differentiates it at the solution points.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from sdapk.apk import PKD, ApkBasis, ApkParams
from sdapk.filters import FilterProfile, build_filter_matrix, viscosity_strength
from sdapk.geometry import RefNodeSets, TriMesh, build_ref_nodes, weighted_quadrature

# --------------------------------------------------------------------------
# Reference operators
# --------------------------------------------------------------------------


class SingularVandermondeError(ValueError):
    pass


@dataclass(frozen=True)
class DiscretizationOps:
    """Reference-element matrices of the degree-``N`` scheme.

    ``D_xi``/``D_eta`` hold the flux-basis gradients at the solution points;
    ``Dlag_xi``/``Dlag_eta`` are the same operators composed with ``V^-1``
    but assembled from a well-conditioned basis, so they act directly on
    nodal flux values.
    """

    basis: ApkBasis
    sol_basis: ApkBasis
    nodes: RefNodeSets
    V: np.ndarray
    V_inv: np.ndarray
    cond: float
    D_xi: np.ndarray
    D_eta: np.ndarray
    E_lag: np.ndarray
    Dlag_xi: np.ndarray
    Dlag_eta: np.ndarray
    sol_to_modal: np.ndarray
    sol_norms: np.ndarray

    @property
    def N(self) -> int:
        return self.nodes.degree


def _checked_inverse(V: np.ndarray, what: str) -> np.ndarray:
    sv = np.linalg.svd(V, compute_uv=False)
    if sv[-1] <= 1e-13 * sv[0]:
        raise SingularVandermondeError(
            f"{what} is numerically singular (smallest singular value {sv[-1]:.3e})")
    return np.linalg.inv(V)


def build_ops(params: ApkParams, N: int, nodes: RefNodeSets | None = None) -> DiscretizationOps:
    nodes = nodes or build_ref_nodes(N)
    if nodes.degree != N:
        raise ValueError("node set degree does not match N")
    basis = ApkBasis(params, N + 1)
    sol_basis = ApkBasis(params, N)
    V = basis.eval(nodes.flux_points)
    V_inv = _checked_inverse(V, "flux-point Vandermonde")
    D_xi, D_eta = basis.grad(nodes.solution_points)

    pk_flux = ApkBasis(PKD, N + 1)
    pk_sol = ApkBasis(PKD, N)
    Pf_inv = _checked_inverse(pk_flux.eval(nodes.flux_points), "PKD flux Vandermonde")
    gx, gy = pk_flux.grad(nodes.solution_points)
    Ps_inv = _checked_inverse(pk_sol.eval(nodes.solution_points), "PKD solution Vandermonde")
    E_lag = pk_sol.eval(nodes.flux_points) @ Ps_inv

    sol_V = sol_basis.eval(nodes.solution_points)
    return DiscretizationOps(
        basis=basis, sol_basis=sol_basis, nodes=nodes, V=V, V_inv=V_inv,
        cond=float(np.linalg.cond(V)), D_xi=D_xi, D_eta=D_eta, E_lag=E_lag,
        Dlag_xi=gx @ Pf_inv, Dlag_eta=gy @ Pf_inv,
        sol_to_modal=_checked_inverse(sol_V, "solution-point Vandermonde"),
        sol_norms=sol_basis.norms_squared(),
    )


def monomial_vandermonde_cond(N: int) -> float:
    """Condition number of the monomial basis of degree N+1 at the flux points."""
    pts = build_ref_nodes(N).flux_points
    d = N + 1
    cols = [pts[:, 0] ** (k - j) * pts[:, 1] ** j for k in range(d + 1) for j in range(k + 1)]
    return float(np.linalg.cond(np.column_stack(cols)))


# --------------------------------------------------------------------------
# Fluxes
# --------------------------------------------------------------------------


class Flux(Protocol):
    def __call__(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...

    def godunov(self, um, up, n1, n2) -> tuple[np.ndarray, np.ndarray]: ...


@dataclass(frozen=True)
class LinearFlux:
    """F(u) = a u."""

    a1: float
    a2: float

    def __call__(self, u):
        return self.a1 * u, self.a2 * u

    def godunov(self, um, up, n1, n2):
        an = self.a1 * n1 + self.a2 * n2
        ustar = np.where(an >= 0, um, up)
        return an * ustar, ustar

    def max_speed(self, umin, umax) -> float:
        return math.hypot(self.a1, self.a2)


@dataclass(frozen=True)
class QuadraticFlux:
    """F(u) = (c1, c2) u^2 / 2; (1, 1) is the two-dimensional Burgers flux."""

    c1: float = 1.0
    c2: float = 1.0

    def __call__(self, u):
        h = 0.5 * u * u
        return self.c1 * h, self.c2 * h

    def godunov(self, um, up, n1, n2):
        cn = self.c1 * n1 + self.c2 * n2
        lo, hi = np.minimum(um, up), np.maximum(um, up)
        mid = np.clip(0.0, lo, hi)
        cands = np.stack([um, up, mid])
        vals = 0.5 * cn * cands ** 2
        pick = np.where(um <= up, np.argmin(vals, axis=0), np.argmax(vals, axis=0))
        ustar = np.take_along_axis(cands, pick[None], axis=0)[0]
        return 0.5 * cn * ustar ** 2, ustar

    def max_speed(self, umin, umax) -> float:
        return math.hypot(self.c1, self.c2) * max(abs(umin), abs(umax))


@dataclass(frozen=True)
class GenericFlux:
    """Arbitrary flux; the Godunov extremum is found by sampling plus golden-section polish."""

    f: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    samples: int = 257
    polish_iters: int = 60

    def __call__(self, u):
        return self.f(u)

    def godunov(self, um, up, n1, n2):
        um, up = np.broadcast_arrays(np.asarray(um, float), np.asarray(up, float))
        n1, n2 = np.broadcast_to(n1, um.shape), np.broadcast_to(n2, um.shape)
        sign = np.where(um <= up, 1.0, -1.0)  # minimise sign * F.n

        def obj(u):
            F1, F2 = self.f(u)
            return sign[..., None] * (F1 * n1[..., None] + F2 * n2[..., None])

        lo, hi = np.minimum(um, up), np.maximum(um, up)
        s = np.linspace(0.0, 1.0, self.samples)
        grid = lo[..., None] + (hi - lo)[..., None] * s
        k = np.argmin(obj(grid), axis=-1)
        step = (hi - lo) / (self.samples - 1)
        best = np.take_along_axis(grid, k[..., None], axis=-1)[..., 0]
        a, b = np.maximum(lo, best - step), np.minimum(hi, best + step)
        g = (math.sqrt(5) - 1) / 2
        for _ in range(self.polish_iters):
            c, d = b - g * (b - a), a + g * (b - a)
            fc, fd = obj(c[..., None])[..., 0], obj(d[..., None])[..., 0]
            left = fc < fd
            b = np.where(left, d, b)
            a = np.where(left, a, c)
        polished = 0.5 * (a + b)
        fb = obj(best[..., None])[..., 0]
        fp = obj(polished[..., None])[..., 0]
        ustar = np.where(fp < fb, polished, best)
        F1, F2 = self.f(ustar)
        return F1 * n1 + F2 * n2, ustar

    def max_speed(self, umin, umax, h: float = 1e-6) -> float:
        u = np.linspace(umin, umax, self.samples)
        a1 = (self.f(u + h)[0] - self.f(u - h)[0]) / (2 * h)
        a2 = (self.f(u + h)[1] - self.f(u - h)[1]) / (2 * h)
        return float(np.max(np.hypot(a1, a2)))


def godunov_flux(u_minus, u_plus, n, F) -> float:
    """Godunov flux H(u-, u+, n): min of F.n over [u-, u+] if u- <= u+, else max."""
    H, _ = F.godunov(np.asarray(u_minus, float), np.asarray(u_plus, float), n[0], n[1])
    return float(H) if np.ndim(H) == 0 else H


def edge_numerical_flux(u_minus, u_plus, n, t, F, tangential: str = "own"):
    """Numerical flux vector with prescribed normal and tangential components.

    ``u_minus`` is this cell's trace.  The normal component is the Godunov
    flux; the tangential component is ``F(u_t) . t`` where ``u_t`` is the own
    trace (``tangential='own'``) or the Godunov state (``'riemann'``).
    """
    n = np.asarray(n, float)
    t = np.asarray(t, float)
    det = n[0] * t[1] - n[1] * t[0]
    if abs(det) < 1e-12:
        raise ValueError("normal and tangent are parallel")
    H, ustar = F.godunov(np.asarray(u_minus, float), np.asarray(u_plus, float), n[0], n[1])
    ut = u_minus if tangential == "own" else ustar
    G1, G2 = F(np.asarray(ut, float))
    Gt = G1 * t[0] + G2 * t[1]
    F1 = (H * t[1] - n[1] * Gt) / det
    F2 = (n[0] * Gt - t[0] * H) / det
    return F1, F2


def _numerical_flux_arrays(um, up, n, t, F, tangential):
    """Vectorised form for orthonormal (n, t) pairs given as arrays (..., 2)."""
    H, ustar = F.godunov(um, up, n[..., 0], n[..., 1])
    ut = um if tangential == "own" else ustar
    G1, G2 = F(ut)
    Gt = G1 * t[..., 0] + G2 * t[..., 1]
    return H * n[..., 0] + Gt * t[..., 0], H * n[..., 1] + Gt * t[..., 1]


# --------------------------------------------------------------------------
# Flux divergence and residual
# --------------------------------------------------------------------------


def flux_divergence(F1, F2, ops: DiscretizationOps, jac, sigma=None):
    """Divergence at the solution points of the flux interpolant.

    ``F1``/``F2`` have shape ``(..., K_F)``; ``jac`` has shape ``(..., 2, 2)``
    with rows ``(xi_x, xi_y)`` and ``(eta_x, eta_y)``.  Without ``sigma`` the
    nodal operators are used; with it the filtered chain ``D M_sigma V^-1``.
    """
    if sigma is None:
        g1x, g1y = F1 @ ops.Dlag_xi.T, F1 @ ops.Dlag_eta.T
        g2x, g2y = F2 @ ops.Dlag_xi.T, F2 @ ops.Dlag_eta.T
    else:
        c1 = (F1 @ ops.V_inv.T) * sigma
        c2 = (F2 @ ops.V_inv.T) * sigma
        g1x, g1y = c1 @ ops.D_xi.T, c1 @ ops.D_eta.T
        g2x, g2y = c2 @ ops.D_xi.T, c2 @ ops.D_eta.T
    jac = np.asarray(jac, float)
    xi_x, xi_y = jac[..., 0, 0, None], jac[..., 0, 1, None]
    eta_x, eta_y = jac[..., 1, 0, None], jac[..., 1, 1, None]
    return xi_x * g1x + eta_x * g1y + xi_y * g2x + eta_y * g2y


def cell_residual(F1, F2, ops: DiscretizationOps, jac, sigma=None) -> np.ndarray:
    """Time derivative at one cell's solution points from its flux-point values."""
    return -flux_divergence(np.asarray(F1, float), np.asarray(F2, float), ops, jac, sigma)


def indicator_value(u_sol: np.ndarray, ops: DiscretizationOps) -> np.ndarray:
    """log10 of the top-degree share of the modal energy, per cell (``-inf`` for zero data)."""
    coeffs = np.atleast_2d(u_sol) @ ops.sol_to_modal.T
    energy = coeffs ** 2 * ops.sol_norms
    top = energy[:, ops.sol_basis.total_degrees == ops.N].sum(axis=1)
    total = energy.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(total > 0, np.log10(top / np.where(total > 0, total, 1.0)), -np.inf)
    return s


def default_threshold(N: int) -> float:
    return -4.0 * math.log10(max(N, 2))


def shock_indicator(u_sol, ops: DiscretizationOps, threshold: float | None = None):
    """True for cells whose top-degree modal share exceeds the threshold."""
    thr = default_threshold(ops.N) if threshold is None else threshold
    flags = indicator_value(u_sol, ops) > thr
    return bool(flags[0]) if np.ndim(u_sol) == 1 else flags


# --------------------------------------------------------------------------
# Mesh coupling
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MeshCoupling:
    """Flux-point connectivity of a closed mesh for a given node set."""

    bnd: np.ndarray
    nbr_cell: np.ndarray
    nbr_k: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    jac: np.ndarray
    h: np.ndarray
    sol_xy: np.ndarray
    flux_xy: np.ndarray


def couple_mesh(mesh: TriMesh, nodes: RefNodeSets) -> MeshCoupling:
    if not mesh.is_closed:
        raise ValueError("the solver needs a closed (periodic) mesh")
    nc = mesh.n_cells
    bnd = nodes.boundary_indices
    flux_xy = mesh.physical_points(nodes.flux_points)
    jac = mesh.jacobians()
    pos = {k: i for i, k in enumerate(bnd)}
    nbr_cell = np.zeros((nc, len(bnd)), dtype=int)
    nbr_k = np.zeros((nc, len(bnd)), dtype=int)
    edge_pts = [nodes.edge_indices(e) for e in range(3)]
    owned = [np.flatnonzero(nodes.edge_tag == e) for e in range(3)]
    scale = float(np.max(mesh.min_edge_lengths()))
    for c in range(nc):
        for e in range(3):
            nb, ne = mesh.neighbor[c, e], mesh.neighbor_edge[c, e]
            cand = edge_pts[ne]
            there = flux_xy[nb, cand] + mesh.shift[c, e]
            here = flux_xy[c, owned[e]]
            d = np.linalg.norm(here[:, None, :] - there[None, :, :], axis=2)
            j = np.argmin(d, axis=1)
            if np.max(d[np.arange(len(j)), j]) > 1e-8 * scale:
                raise ValueError(f"flux points of cell {c} edge {e} do not match the neighbour")
            for k, jj in zip(owned[e], j):
                nbr_cell[c, pos[k]] = nb
                nbr_k[c, pos[k]] = cand[jj]
    n_ref = nodes.normals[bnd]
    n_phys = np.einsum("cji,kj->cki", jac, n_ref)
    n_phys /= np.linalg.norm(n_phys, axis=2, keepdims=True)
    t_phys = np.stack([-n_phys[..., 1], n_phys[..., 0]], axis=-1)
    return MeshCoupling(bnd, nbr_cell, nbr_k, n_phys, t_phys, jac,
                        mesh.min_edge_lengths(), mesh.physical_points(nodes.solution_points), flux_xy)


# --------------------------------------------------------------------------
# Time integration
# --------------------------------------------------------------------------

# Carpenter & Kennedy five-stage fourth-order 2N-storage coefficients.
LSRK_A = np.array([0.0,
                   -567301805773.0 / 1357537059087.0,
                   -2404267990393.0 / 2016746695238.0,
                   -3550918686646.0 / 2091501179385.0,
                   -1275806237668.0 / 842570457699.0])
LSRK_B = np.array([1432997174477.0 / 9575080441755.0,
                   5161836677717.0 / 13612068292357.0,
                   1720146321549.0 / 2090206949498.0,
                   3134564353537.0 / 4481467310338.0,
                   2277821191437.0 / 14882151754819.0])
LSRK_C = np.array([0.0,
                   1432997174477.0 / 9575080441755.0,
                   2526269341429.0 / 6820363962896.0,
                   2006345519317.0 / 3224310063776.0,
                   2802321613138.0 / 2924317926251.0])


def rk_step(u, dt: float, rhs: Callable, t: float = 0.0):
    """One low-storage RK(5,4) step of ``du/dt = rhs(u, t)``."""
    u = np.array(u, dtype=float, copy=True)
    du = np.zeros_like(u)
    for a, b, c in zip(LSRK_A, LSRK_B, LSRK_C):
        du = a * du + dt * rhs(u, t + c * dt)
        u = u + b * du
    return u


def time_step(C_fix: float, N: int, h: float, lambda_max: float) -> float:
    return C_fix / (N + 1) ** 2 * h / lambda_max


# --------------------------------------------------------------------------
# Solver
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    name: str
    flux: object
    lambda_max: float
    u0: Callable
    t_end: float
    exact: Callable | None = None


def sine_initial(x, y):
    return np.sin(np.pi * (x + y))


def advection_problem(psi: float = math.pi / 4, speed: float = 1.0, t_end: float = 0.5,
                      u0: Callable = sine_initial) -> Problem:
    a1, a2 = speed * math.cos(psi), speed * math.sin(psi)
    return Problem("advection", LinearFlux(a1, a2), abs(speed), u0, t_end,
                   exact=lambda x, y, t: u0(x - a1 * t, y - a2 * t))


def burgers_initial(x, y):
    return 0.25 + 0.5 * np.sin(np.pi * (x + y))


def burgers_problem(t_end: float = 0.45) -> Problem:
    return Problem("burgers", QuadraticFlux(1.0, 1.0), math.sqrt(2) * 0.75,
                   burgers_initial, t_end)


@dataclass(frozen=True)
class FilterSettings:
    p: int = 2
    c: float = 8.0
    gamma_filter: float | None = None
    use_indicator: bool = False
    threshold: float | None = None
    mode: str = "stage"
    kind: str = "natural"


@dataclass(frozen=True)
class SolveConfig:
    C_fix: float = 0.5
    filter: FilterSettings | None = None
    tangential: str = "own"
    snapshot_every: int = 0
    blowup_limit: float = 1e3
    error_quad_order: int | None = None

    def __post_init__(self):
        if not self.C_fix > 0:
            raise ValueError("C_fix must be positive")


@dataclass
class Diagnostic:
    t: float
    min: float
    max: float
    L1: float
    L2: float
    Linf: float
    wall_ms: float


@dataclass
class BlowUp:
    step: int
    t_last_finite: float
    cell: int
    reason: str


@dataclass
class SolveResult:
    U: np.ndarray
    t: float
    dt: float
    steps: int
    diagnostics: list[Diagnostic] = field(default_factory=list)
    snapshots: list[tuple[float, np.ndarray]] = field(default_factory=list)
    blowup: BlowUp | None = None
    coupling: MeshCoupling | None = None


class SDSolver:
    """Semi-discrete operator of one (mesh, basis, flux) configuration."""

    def __init__(self, mesh: TriMesh, params: ApkParams, N: int, flux,
                 tangential: str = "own", filter: FilterSettings | None = None,
                 dt: float | None = None):
        if tangential not in ("own", "riemann"):
            raise ValueError("tangential must be 'own' or 'riemann'")
        self.mesh = mesh
        self.params = params
        self.N = N
        self.flux = flux
        self.tangential = tangential
        self.ops = build_ops(params, N)
        self.cpl = couple_mesh(mesh, self.ops.nodes)
        self.filter = filter
        self.sigma = None
        self.sigma_sol = None
        if filter is not None:
            if dt is None:
                raise ValueError("a filtered solver needs the time step")
            self.sigma, self.sigma_sol = self._filter_diagonals(filter, dt)

    def _filter_diagonals(self, fs: FilterSettings, dt: float):
        gf = self.params.gamma if fs.gamma_filter is None else fs.gamma_filter
        sig_f = np.empty((self.mesh.n_cells, len(self.ops.basis)))
        sig_s = np.empty((self.mesh.n_cells, len(self.ops.sol_basis)))
        cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        for c, h in enumerate(self.cpl.h):
            key = round(float(h), 12)
            if key not in cache:
                eps = viscosity_strength(fs.c, h, self.N, fs.p)
                prof = FilterProfile(fs.kind, order=fs.p, epsilon=eps, dt=dt, gamma_filter=gf)
                cache[key] = (build_filter_matrix(self.ops.basis, prof),
                              build_filter_matrix(self.ops.sol_basis, prof))
            sig_f[c], sig_s[c] = cache[key]
        return sig_f, sig_s

    def flagged(self, U) -> np.ndarray:
        fs = self.filter
        if fs is None:
            return np.zeros(len(U), dtype=bool)
        if not fs.use_indicator:
            return np.ones(len(U), dtype=bool)
        return shock_indicator(U, self.ops, fs.threshold)

    def flux_point_values(self, U):
        """Flux components at every flux point, numerical fluxes on cell boundaries."""
        cpl = self.cpl
        Uf = U @ self.ops.E_lag.T
        F1, F2 = self.flux(Uf)
        F1, F2 = np.array(F1, float), np.array(F2, float)
        um = Uf[:, cpl.bnd]
        up = Uf[cpl.nbr_cell, cpl.nbr_k]
        G1, G2 = _numerical_flux_arrays(um, up, cpl.normals, cpl.tangents, self.flux, self.tangential)
        F1[:, cpl.bnd] = G1
        F2[:, cpl.bnd] = G2
        return F1, F2

    def residual(self, U, t: float = 0.0):
        F1, F2 = self.flux_point_values(U)
        R = -flux_divergence(F1, F2, self.ops, self.cpl.jac)
        if self.sigma is not None and self.filter.mode == "stage":
            flags = self.flagged(U)
            if flags.any():
                R[flags] = -flux_divergence(F1[flags], F2[flags], self.ops,
                                            self.cpl.jac[flags], self.sigma[flags])
        return R

    def post_step(self, U):
        if self.sigma is None or self.filter.mode != "step":
            return U
        flags = self.flagged(U)
        if flags.any():
            coeffs = U[flags] @ self.ops.sol_to_modal.T
            basis_vals = np.linalg.inv(self.ops.sol_to_modal)
            U = U.copy()
            U[flags] = (coeffs * self.sigma_sol[flags]) @ basis_vals.T
        return U

    def initial_state(self, u0: Callable) -> np.ndarray:
        xy = self.cpl.sol_xy
        return np.asarray(u0(xy[..., 0], xy[..., 1]), float)

    def error_norms(self, U, exact: Callable, t: float, quad_order: int | None = None):
        """(L1, L2, Linf) of ``U - exact(., ., t)`` by per-cell quadrature."""
        q = weighted_quadrature(PKD, quad_order or 2 * self.N + 4)
        P = ApkBasis(PKD, self.N)
        L = P.eval(q.points) @ np.linalg.inv(P.eval(self.ops.nodes.solution_points))
        uq = U @ L.T
        xq = self.mesh.physical_points(q.points)
        e = np.abs(uq - exact(xq[..., 0], xq[..., 1], t))
        detB = 2.0 * self.mesh.areas()
        L1 = float(np.sum(detB * (e @ q.weights)))
        L2 = float(np.sqrt(np.sum(detB * ((e ** 2) @ q.weights))))
        es = np.abs(U - exact(self.cpl.sol_xy[..., 0], self.cpl.sol_xy[..., 1], t))
        return L1, L2, float(max(e.max(), es.max()))


def solve(problem: Problem, mesh: TriMesh, params: ApkParams, N: int,
          config: SolveConfig = SolveConfig(), on_snapshot: Callable | None = None) -> SolveResult:
    """Advance ``problem`` to its end time; stops early with a blow-up report."""
    h = float(np.min(mesh.min_edge_lengths()))
    dt = time_step(config.C_fix, N, h, problem.lambda_max)
    solver = SDSolver(mesh, params, N, problem.flux, config.tangential, config.filter, dt)
    U = solver.initial_state(problem.u0)
    t0 = _time.perf_counter()
    result = SolveResult(U, 0.0, dt, 0, coupling=solver.cpl)

    def record(U, t):
        if problem.exact is not None:
            L1, L2, Linf = solver.error_norms(U, problem.exact, t, config.error_quad_order)
        else:
            L1 = L2 = Linf = float("nan")
        d = Diagnostic(t, float(U.min()), float(U.max()), L1, L2, Linf,
                       (_time.perf_counter() - t0) * 1e3)
        result.diagnostics.append(d)
        result.snapshots.append((t, U.copy()))
        if on_snapshot is not None:
            on_snapshot(d, U)

    record(U, 0.0)
    t, step = 0.0, 0
    n_steps = max(1, math.ceil(problem.t_end / dt - 1e-9))
    while step < n_steps:
        this_dt = min(dt, problem.t_end - t)
        U_new = solver.post_step(rk_step(U, this_dt, solver.residual, t))
        bad = ~np.isfinite(U_new) | (np.abs(U_new) > config.blowup_limit)
        if bad.any():
            cell = int(np.argmax(bad.any(axis=1)))
            reason = "non-finite value" if not np.all(np.isfinite(U_new)) else \
                f"|u| exceeded {config.blowup_limit:g}"
            result.blowup = BlowUp(step + 1, t, cell, reason)
            result.U, result.t, result.steps = U, t, step
            return result
        U = U_new
        step += 1
        t = problem.t_end if step == n_steps else t + this_dt
        if config.snapshot_every and step % config.snapshot_every == 0 and step != n_steps:
            record(U, t)
    record(U, t)
    result.U, result.t, result.steps = U, t, step
    return result


def eoc(errors, resolutions) -> list[float]:
    """Observed orders between consecutive entries.

    ``resolutions`` grow with refinement (polynomial degree, or 1/h for
    meshes): rate_i = ln(e_{i-1}/e_i) / ln(r_i/r_{i-1}).
    """
    e = np.asarray(errors, float)
    r = np.asarray(resolutions, float)
    if len(e) != len(r):
        raise ValueError("errors and resolutions differ in length")
    return [float(np.log(e[i - 1] / e[i]) / np.log(r[i] / r[i - 1])) for i in range(1, len(e))]
