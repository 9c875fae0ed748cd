"""Von Neumann analysis of the SD scheme on the periodic four-triangle pattern.

The reference cell is the unit triangle itself.  For a Fourier mode with wave
numbers ``(w_x, w_y)`` its left neighbour (across ``xi = 0``) and bottom
neighbour (across ``eta = 0``) carry the same nodal values up to the phase
factors built by :func:`phase_matrices`.  Advection along ``(cos psi, sin psi)``
with ``psi`` in ``[0, pi/2]`` never draws information across the hypotenuse.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from sdapk.apk import ApkParams
from sdapk.eig import max_real_eig
from sdapk.filters import FilterProfile, build_filter_matrix, viscosity_strength
from sdapk.geometry import REF_NORMALS, REF_TANGENTS, RefNodeSets
from sdapk.sd import DiscretizationOps, build_ops, time_step

SOURCES = ("left", "own", "bottom")
_EDGE_SOURCE = {0: "bottom", 2: "left"}


@dataclass(frozen=True)
class StabilityCase:
    psi: float
    wx: float
    wy: float

    def __post_init__(self):
        if not (-1e-12 <= self.psi <= math.pi / 2 + 1e-12):
            raise ValueError("psi must lie in [0, pi/2]")
        if abs(self.wx) > math.pi + 1e-12 or abs(self.wy) > math.pi + 1e-12:
            raise ValueError("wave numbers must lie in [-pi, pi]")


def default_cases(psi_steps: int = 4, w_steps: int = 4) -> list[StabilityCase]:
    """psi = 0 : pi/(2 psi_steps) : pi/2 and w = -pi : 2pi/w_steps : pi in both directions."""
    psis = [k * (math.pi / 2) / psi_steps for k in range(psi_steps + 1)] if psi_steps else [0.0]
    ws = [-math.pi + k * 2 * math.pi / w_steps for k in range(w_steps + 1)] if w_steps else [0.0]
    return [StabilityCase(p, a, b) for p in psis for a in ws for b in ws]


@dataclass(frozen=True)
class StabilityConstants:
    h: float = math.sqrt(2) / 6
    C_fix: float = 0.5
    lambda_max: float = 1.0


# --------------------------------------------------------------------------
# Selector and phase matrices
# --------------------------------------------------------------------------


def _axis_upwind_sources(edges: tuple[int, ...]) -> tuple[str, str]:
    if not edges:
        return "own", "own"
    if len(edges) == 1:
        src = _EDGE_SOURCE.get(edges[0], "own")
        return src, src
    # vertex: each component comes from the inflow edge normal to that axis
    s1 = "left" if 2 in edges else "own"
    s2 = "bottom" if 0 in edges else "own"
    return s1, s2


def _flux_rule_sources(edge: int, tangential: str, psi: float) -> tuple[str, str]:
    """Sources read off the numerical flux formula for a probe direction."""
    if edge < 0:
        return "own", "own"
    a = np.array([math.cos(psi), math.sin(psi)])
    n, t = REF_NORMALS[edge], REF_TANGENTS[edge]
    an, at = float(a @ n), float(a @ t)
    upwind = "own" if an >= 0 else _EDGE_SOURCE[edge]
    tang = "own" if tangential == "own" else upwind
    out = []
    for nu in range(2):
        srcs = set()
        if abs(an * n[nu]) > 1e-14:
            srcs.add(upwind)
        if abs(at * t[nu]) > 1e-14:
            srcs.add(tang)
        if len(srcs) > 1:
            raise ValueError(f"flux component {nu + 1} on edge {edge} mixes sources {srcs}")
        out.append(srcs.pop() if srcs else "own")
    return out[0], out[1]


def connectivity_matrices(nodes: RefNodeSets, rule: str = "upwind") -> dict[tuple[int, str], np.ndarray]:
    """0/1 diagonals ``M[(nu, source)]`` saying where flux component ``nu`` is taken.

    ``rule='upwind'`` takes both components from the upwind cell on edges and,
    at a vertex, component ``nu`` from the neighbour across the inflow edge
    whose normal is the ``nu`` axis.  ``'own'`` and ``'riemann'`` follow the
    solver's numerical flux with the matching tangential option.
    """
    if rule not in ("upwind", "own", "riemann"):
        raise ValueError(f"unknown connectivity rule {rule!r}")
    K = nodes.K_F
    M = {(nu, s): np.zeros(K) for nu in (1, 2) for s in SOURCES}
    for k in range(K):
        if rule == "upwind":
            s1, s2 = _axis_upwind_sources(nodes.edges_of[k])
        else:
            s1, s2 = _flux_rule_sources(int(nodes.edge_tag[k]), rule, math.pi / 8)
        M[(1, s1)][k] = 1.0
        M[(2, s2)][k] = 1.0
    for nu in (1, 2):
        if not np.array_equal(sum(M[(nu, s)] for s in SOURCES), np.ones(K)):
            raise ValueError("a flux point is not attributed to exactly one source")
    return M


def phase_matrices(case: StabilityCase, flux_points) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of T_{-1,0} (left neighbour) and T_{0,-1} (bottom neighbour)."""
    xi, eta = np.asarray(flux_points)[:, 0], np.asarray(flux_points)[:, 1]
    wx, wy = case.wx, case.wy
    T_left = np.exp(1j * (-wx * (xi + eta) + wy * (xi - eta)))
    T_bottom = np.exp(1j * (wx * (eta - xi) - wy * (xi + eta)))
    return T_left, T_bottom


# --------------------------------------------------------------------------
# Semi-discretisation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SemiDiscretization:
    S: np.ndarray
    N: int
    params: tuple[float, float, float]
    filtered: bool
    case: StabilityCase


def stability_filter(ops: DiscretizationOps, p: int, c: float, gamma_filter: float | None = None,
                     constants: StabilityConstants = StabilityConstants(), kind: str = "natural") -> np.ndarray:
    N = ops.N
    eps = viscosity_strength(c, constants.h, N, p)
    dt = time_step(constants.C_fix, N, constants.h, constants.lambda_max)
    gf = ops.basis.params.gamma if gamma_filter is None else gamma_filter
    return build_filter_matrix(ops.basis, FilterProfile(kind, order=p, epsilon=eps, dt=dt, gamma_filter=gf))


def derivative_operators(ops: DiscretizationOps, sigma=None, path: str = "lagrange"):
    """(A_xi, A_eta) mapping flux-point values to derivatives at solution points."""
    if sigma is not None:
        W = np.asarray(sigma)[:, None] * ops.V_inv
        return ops.D_xi @ W, ops.D_eta @ W
    if path == "lagrange":
        return ops.Dlag_xi, ops.Dlag_eta
    if path == "vandermonde":
        return ops.D_xi @ ops.V_inv, ops.D_eta @ ops.V_inv
    raise ValueError(f"unknown derivative path {path!r}")


def assemble_S(case: StabilityCase, ops: DiscretizationOps, sigma=None,
               selectors: dict | None = None, path: str = "lagrange",
               _deriv=None) -> SemiDiscretization:
    sel = selectors if selectors is not None else connectivity_matrices(ops.nodes)
    A_xi, A_eta = _deriv if _deriv is not None else derivative_operators(ops, sigma, path)
    T_left, T_bottom = phase_matrices(case, ops.nodes.flux_points)
    C = {nu: sel[(nu, "left")] * T_left + sel[(nu, "own")] + sel[(nu, "bottom")] * T_bottom
         for nu in (1, 2)}
    E = ops.E_lag
    S = -(math.cos(case.psi) * A_xi @ (C[1][:, None] * E)
          + math.sin(case.psi) * A_eta @ (C[2][:, None] * E))
    return SemiDiscretization(S, ops.N, ops.basis.params.as_tuple(), sigma is not None, case)


@dataclass(frozen=True)
class SweepResult:
    alpha: float
    beta: float
    gamma: float
    p: float
    c: float
    L: float
    argmax_psi: float
    argmax_wx: float
    argmax_wy: float
    eig_re: float
    eig_im: float

    @property
    def key(self) -> tuple:
        return _key(self.alpha, self.beta, self.gamma, self.p, self.c)


def _key(a, b, g, p, c):
    return tuple(round(float(v), 10) if v == v else None for v in (a, b, g, p, c))


def max_real_part(N: int, params: ApkParams, cases: Sequence[StabilityCase],
                  p: int | None = None, c: float | None = None, gamma_filter: float | None = None,
                  constants: StabilityConstants = StabilityConstants(), rule: str = "upwind",
                  path: str = "lagrange", backend: str = "inrepo",
                  ops: DiscretizationOps | None = None) -> SweepResult:
    """L = largest real eigenvalue part over ``cases`` for one parameter tuple."""
    if not cases:
        raise ValueError("empty case grid")
    ops = ops or build_ops(params, N)
    sigma = None if p is None else stability_filter(ops, p, c, gamma_filter, constants)
    sel = connectivity_matrices(ops.nodes, rule)
    deriv = derivative_operators(ops, sigma, path)
    best = None
    for case in cases:
        lam_re, lam = max_real_eig(assemble_S(case, ops, sigma, sel, path, deriv).S, backend)
        if best is None or lam_re > best[0]:
            best = (lam_re, lam, case)
    lam_re, lam, case = best
    nan = float("nan")
    return SweepResult(params.alpha, params.beta, params.gamma,
                       nan if p is None else p, nan if c is None else c,
                       lam_re, case.psi, case.wx, case.wy, lam.real, lam.imag)


def parameter_grid(alpha: Sequence[float], beta: Sequence[float], gamma_max: float,
                   gamma_step: float) -> list[ApkParams]:
    """Tuples with gamma running from alpha+beta to gamma_max (both inclusive)."""
    out = []
    for a, b in itertools.product(alpha, beta):
        n = int(math.floor((gamma_max - (a + b)) / gamma_step + 1e-9))
        for k in range(n + 1):
            out.append(ApkParams(a, b, round(a + b + k * gamma_step, 10)))
    return out


def frange(start: float, stop: float, step: float) -> list[float]:
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + k * step, 10) for k in range(n + 1)]


def worker_count() -> int:
    env = os.environ.get("SDAPK_THREADS")
    cpu = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpu))
        except ValueError:
            pass
    return cpu


def _sweep_job(args):
    return max_real_part(*args[:2], **args[2])


def sweep(N: int, tuples: Iterable[ApkParams], filters: Sequence[tuple[int, float] | None] = (None,),
          cases: Sequence[StabilityCase] | None = None, gamma_filter: float | None = None,
          constants: StabilityConstants = StabilityConstants(), rule: str = "upwind",
          path: str = "lagrange", backend: str = "inrepo", checkpoint: str | Path | None = None,
          workers: int | None = None) -> list[SweepResult]:
    """Grid search of L over parameter tuples and filter settings.

    Results come back in the order of the inputs.  With ``checkpoint`` every
    finished tuple is appended to a JSON-lines file and tuples already present
    there are not recomputed.
    """
    cases = list(default_cases() if cases is None else cases)
    if not cases:
        raise ValueError("empty case grid")
    jobs = []
    for prm in tuples:
        for flt in filters:
            p, c = (None, None) if flt is None else flt
            kw = dict(cases=cases, p=p, c=c, gamma_filter=gamma_filter, constants=constants, rule=rule,
                      path=path, backend=backend)
            key = _key(prm.alpha, prm.beta, prm.gamma, float("nan") if p is None else p,
                       float("nan") if c is None else c)
            jobs.append((key, (N, prm, kw)))
    done: dict[tuple, SweepResult] = {}
    ck = Path(checkpoint) if checkpoint else None
    if ck and ck.exists():
        for line in ck.read_text().splitlines():
            if line.strip():
                r = SweepResult(**{k: (float("nan") if v is None else v)
                                   for k, v in json.loads(line).items()})
                done[r.key] = r
    todo = [(k, a) for k, a in jobs if k not in done]
    workers = worker_count() if workers is None else workers

    def store(r: SweepResult):
        done[r.key] = r
        if ck:
            row = {k: (None if isinstance(v, float) and v != v else v) for k, v in asdict(r).items()}
            with ck.open("a") as fh:
                fh.write(json.dumps(row) + "\n")

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for r in ex.map(_sweep_job, [a for _, a in todo]):
                store(r)
    else:
        for _, a in todo:
            store(_sweep_job(a))
    return [done[k] for k, _ in jobs]
