"""Reference-triangle node sets, weighted quadrature, affine maps and meshes.

Local conventions used throughout the package:

* the reference triangle has vertices ``(0,0), (1,0), (0,1)``;
* local edge 0 joins v0-v1 (``eta = 0``), edge 1 joins v1-v2 (the
  hypotenuse) and edge 2 joins v2-v0 (``xi = 0``);
* a flux point sitting on a vertex belongs to the lower-indexed of its two
  edges, so v0 and v1 belong to edge 0 and v2 belongs to edge 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.polynomial import legendre
from scipy.special import roots_jacobi

from sdapk.apk import ApkParams

_NODE_TOL = 1e-12

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
REF_NORMALS = np.array([[0.0, -1.0], [1.0 / math.sqrt(2), 1.0 / math.sqrt(2)], [-1.0, 0.0]])
REF_TANGENTS = np.array([[1.0, 0.0], [-1.0 / math.sqrt(2), 1.0 / math.sqrt(2)], [0.0, -1.0]])
# Edge e joins local vertices EDGE_VERTS[e].
EDGE_VERTS = ((0, 1), (1, 2), (2, 0))


# --------------------------------------------------------------------------
# Node sets
# --------------------------------------------------------------------------

def gauss_lobatto_01(n: int) -> np.ndarray:
    """The ``n + 1`` Gauss-Lobatto-Legendre nodes mapped to [0, 1]."""
    if n < 1:
        raise ValueError("need at least two Lobatto nodes")
    if n == 1:
        return np.array([0.0, 1.0])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    inner = np.sort(legendre.legroots(legendre.legder(c)).real)
    x = np.concatenate([[-1.0], inner, [1.0]])
    v = (x + 1.0) / 2.0
    return 0.5 * (v + (1.0 - v[::-1]))  # enforce exact mirror symmetry


def _barycentric_lobatto(d: int) -> np.ndarray:
    v = gauss_lobatto_01(d)
    rows = []
    for i in range(1, d + 2):
        for j in range(1, d + 2):
            k = d + 3 - i - j
            if 1 <= k <= d + 1:
                vi, vj, vk = v[i - 1], v[j - 1], v[k - 1]
                rows.append(((1 + 2 * vi - vj - vk) / 3,
                             (1 + 2 * vj - vk - vi) / 3,
                             (1 + 2 * vk - vi - vj) / 3))
    b = np.array(rows)
    b[np.abs(b) < _NODE_TOL] = 0.0
    return b


def lobatto_nodes_triangle(d: int) -> np.ndarray:
    """Lobatto-type nodes of degree ``d`` on the unit triangle.

    Returns an array of shape ``((d+1)(d+2)/2, 2)`` sorted by ``x`` and then ``y``.
    The first barycentric coordinate is attached to ``(1,0)``, the second to
    ``(0,1)``, so ``(x, y)`` are simply those two coordinates.
    """
    if d < 1:
        raise ValueError("degree must be at least 1")
    b = _barycentric_lobatto(d)
    pts = b[:, :2].copy()
    key = np.round(pts, 12)
    order = np.lexsort((key[:, 1], key[:, 0]))
    return pts[order]


def _edge_membership(pts: np.ndarray) -> list[tuple[int, ...]]:
    x, y = pts[:, 0], pts[:, 1]
    on = [np.abs(y) < _NODE_TOL, np.abs(x + y - 1) < _NODE_TOL, np.abs(x) < _NODE_TOL]
    return [tuple(e for e in range(3) if on[e][k]) for k in range(len(pts))]


@dataclass(frozen=True)
class RefNodeSets:
    """Solution and flux points of the degree-``N`` scheme.

    ``edge_tag[k]`` is -1 for interior flux points and the owning local edge
    otherwise; ``edges_of[k]`` lists every edge the point lies on.
    """

    degree: int
    solution_points: np.ndarray
    flux_points: np.ndarray
    edge_tag: np.ndarray
    edges_of: tuple[tuple[int, ...], ...]
    normals: np.ndarray
    tangents: np.ndarray

    @property
    def K_s(self) -> int:
        return len(self.solution_points)

    @property
    def K_F(self) -> int:
        return len(self.flux_points)

    @property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.edge_tag >= 0)

    @property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(self.edge_tag < 0)

    def edge_indices(self, e: int) -> np.ndarray:
        """All flux points on edge ``e`` (vertices included), in ascending order."""
        return np.array([k for k, es in enumerate(self.edges_of) if e in es])


@lru_cache(maxsize=None)
def build_ref_nodes(N: int) -> RefNodeSets:
    if not 1 <= N <= 10:
        raise ValueError(f"N must be in 1..10, got {N}")
    sol = lobatto_nodes_triangle(N)
    flux = lobatto_nodes_triangle(N + 1)
    edges_of = _edge_membership(flux)
    tag = np.array([min(es) if es else -1 for es in edges_of])
    normals = np.zeros_like(flux)
    tangents = np.zeros_like(flux)
    bnd = tag >= 0
    normals[bnd] = REF_NORMALS[tag[bnd]]
    tangents[bnd] = REF_TANGENTS[tag[bnd]]
    for arr in (sol, flux, normals, tangents, tag):
        arr.setflags(write=False)
    return RefNodeSets(N, sol, flux, tag, tuple(edges_of), normals, tangents)


# --------------------------------------------------------------------------
# Quadrature
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    exactness: int


def _gauss_jacobi_01(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """n-point rule on [0,1] for the weight (1-u)^a u^b."""
    t, w = roots_jacobi(n, a, b)
    return (t + 1.0) / 2.0, w / 2.0 ** (a + b + 1)


@lru_cache(maxsize=256)
def _weighted_quadrature_cached(alpha, beta, gamma, exactness):
    params = ApkParams(alpha, beta, gamma)
    n = max(1, math.ceil((exactness + 1) / 2))
    p = params.p
    u, wu = _gauss_jacobi_01(n, beta + p, alpha - 1)
    v, wv = _gauss_jacobi_01(n, p, beta - 1)
    U, Vv = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([U.ravel(), ((1 - U) * Vv).ravel()])
    w = np.outer(wu, wv).ravel()
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(pts, w, exactness)


def weighted_quadrature(params: ApkParams, exactness: int) -> QuadRule:
    """Collapsed Gauss-Jacobi rule integrating ``h * poly`` exactly up to ``exactness``.

    The Duffy map ``x = u, y = (1-u) v`` turns the weight into the product
    ``u^(alpha-1) (1-u)^(beta+p)`` times ``v^(beta-1) (1-v)^p``.
    """
    if not 0 <= exactness <= 40:
        raise ValueError("exactness must be in 0..40")
    return _weighted_quadrature_cached(float(params.alpha), float(params.beta),
                                       float(params.gamma), int(exactness))


def dirichlet_moment(params: ApkParams, i: int, j: int) -> float:
    """Exact value of the integral of x^i y^j h(x, y) over the unit triangle."""
    a, b, c = params.alpha + i, params.beta + j, params.p + 1
    return math.exp(math.lgamma(a) + math.lgamma(b) + math.lgamma(c) - math.lgamma(a + b + c))


# --------------------------------------------------------------------------
# Affine maps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineMap:
    """Map ``T(x) = A x + b`` from a physical cell onto the reference triangle."""

    A: np.ndarray
    b: np.ndarray

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.A))

    @property
    def jacobian(self) -> dict[str, float]:
        return {"xi_x": self.A[0, 0], "xi_y": self.A[0, 1],
                "eta_x": self.A[1, 0], "eta_y": self.A[1, 1]}

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        return pts @ self.A.T + self.b

    def inverse(self, ref_pts):
        ref_pts = np.asarray(ref_pts, dtype=float)
        return np.linalg.solve(self.A, (ref_pts - self.b).T).T


def affine_map(vertices) -> AffineMap:
    v = np.asarray(vertices, dtype=float)
    if v.shape != (3, 2):
        raise ValueError("expected three 2D vertices")
    B = np.column_stack([v[1] - v[0], v[2] - v[0]])
    det = float(np.linalg.det(B))
    scale = max(np.abs(B).max(), 1e-300)
    if abs(det) < 1e-14 * scale ** 2:
        raise ValueError("degenerate triangle")
    if det < 0:
        raise ValueError("triangle vertices must be counterclockwise")
    A = np.linalg.inv(B)
    return AffineMap(A, -A @ v[0])


# --------------------------------------------------------------------------
# Meshes
# --------------------------------------------------------------------------

@dataclass
class TriMesh:
    """Conforming triangulation with optional periodic edge pairings.

    ``neighbor[c, e]`` is the cell across local edge ``e`` of cell ``c`` and
    ``neighbor_edge[c, e]`` the local edge index on that side.  ``shift[c, e]``
    is the translation that carries the neighbour's copy of the edge onto
    this cell's copy (zero unless the pairing is periodic).
    """

    vertices: np.ndarray
    cells: np.ndarray
    periodic_pairs: list[tuple[int, int, int, int]] = field(default_factory=list)
    neighbor: np.ndarray = field(init=False)
    neighbor_edge: np.ndarray = field(init=False)
    shift: np.ndarray = field(init=False)
    maps: list[AffineMap] = field(init=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.cells = np.asarray(self.cells, dtype=int)
        self.maps = [affine_map(self.vertices[c]) for c in self.cells]
        self._connect()

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell_vertices(self, c: int) -> np.ndarray:
        return self.vertices[self.cells[c]]

    def edge_midpoint(self, c: int, e: int) -> np.ndarray:
        a, b = EDGE_VERTS[e]
        v = self.cell_vertices(c)
        return 0.5 * (v[a] + v[b])

    def _connect(self):
        nc = self.n_cells
        self.neighbor = -np.ones((nc, 3), dtype=int)
        self.neighbor_edge = -np.ones((nc, 3), dtype=int)
        self.shift = np.zeros((nc, 3, 2))
        seen: dict[tuple[int, int], tuple[int, int]] = {}
        for c, cell in enumerate(self.cells):
            for e, (a, b) in enumerate(EDGE_VERTS):
                key = (min(cell[a], cell[b]), max(cell[a], cell[b]))
                if key in seen:
                    c2, e2 = seen.pop(key)
                    self._link(c, e, c2, e2)
                else:
                    seen[key] = (c, e)
        for c1, e1, c2, e2 in self.periodic_pairs:
            if self.neighbor[c1, e1] >= 0 or self.neighbor[c2, e2] >= 0:
                raise ValueError(f"periodic pair ({c1},{e1})-({c2},{e2}) reuses an edge")
            self._link(c1, e1, c2, e2)
            d = self.edge_midpoint(c1, e1) - self.edge_midpoint(c2, e2)
            self.shift[c1, e1] = d
            self.shift[c2, e2] = -d

    def _link(self, c1, e1, c2, e2):
        self.neighbor[c1, e1], self.neighbor_edge[c1, e1] = c2, e2
        self.neighbor[c2, e2], self.neighbor_edge[c2, e2] = c1, e1

    @property
    def is_closed(self) -> bool:
        return bool(np.all(self.neighbor >= 0))

    def min_edge_lengths(self) -> np.ndarray:
        v = self.vertices[self.cells]
        lens = [np.linalg.norm(v[:, b] - v[:, a], axis=1) for a, b in EDGE_VERTS]
        return np.min(np.stack(lens, axis=1), axis=1)

    def areas(self) -> np.ndarray:
        return np.array([0.5 / m.det for m in self.maps])

    def jacobians(self) -> np.ndarray:
        """Array ``(n_cells, 2, 2)`` of the reference-map matrices A."""
        return np.stack([m.A for m in self.maps])

    def physical_points(self, ref_pts) -> np.ndarray:
        """Array ``(n_cells, npts, 2)`` of the images of reference points."""
        ref_pts = np.asarray(ref_pts, dtype=float)
        v = self.vertices[self.cells]
        return (v[:, None, 0]
                + ref_pts[None, :, 0, None] * (v[:, None, 1] - v[:, None, 0])
                + ref_pts[None, :, 1, None] * (v[:, None, 2] - v[:, None, 0]))


def build_pattern_grid(n_blocks: int, lower=(-1.0, -1.0), upper=(1.0, 1.0)) -> TriMesh:
    """Periodic mesh of a rectangle tiled by the four-triangle generating pattern.

    The rectangle is cut into ``2 n_blocks`` squares per side.  Square ``(i, j)``
    is split along its anti-diagonal when ``i + j`` is even and along its
    diagonal otherwise, so each block of 2x2 squares holds 8 triangles and
    every interior vertex is surrounded by a diamond of right angles.  The
    local vertex v0 is always the right-angle corner.
    """
    if n_blocks < 1:
        raise ValueError("n_blocks must be at least 1")
    M = 2 * n_blocks
    x0, y0 = lower
    hx, hy = (upper[0] - x0) / M, (upper[1] - y0) / M
    xs = x0 + hx * np.arange(M + 1)
    ys = y0 + hy * np.arange(M + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (M + 1) + j

    cells = []
    for i in range(M):
        for j in range(M):
            LL, LR, UL, UR = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
            if (i + j) % 2 == 0:
                cells += [(LL, LR, UL), (UR, UL, LR)]
            else:
                cells += [(LR, UR, LL), (UL, LL, UR)]
    cells = np.array(cells)

    # Pair the boundary edges of opposite sides of the rectangle.
    def boundary_edges():
        out = {}
        for c, cell in enumerate(cells):
            for e, (a, b) in enumerate(EDGE_VERTS):
                pa, pb = vertices[cell[a]], vertices[cell[b]]
                mid = 0.5 * (pa + pb)
                for side, coord, val in (("L", 0, xs[0]), ("R", 0, xs[-1]),
                                         ("B", 1, ys[0]), ("T", 1, ys[-1])):
                    if abs(pa[coord] - val) < 1e-12 and abs(pb[coord] - val) < 1e-12:
                        out[(side, round(float(mid[1 - coord]), 10))] = (c, e)
        return out

    bnd = boundary_edges()
    pairs = []
    for (side, pos), (c, e) in bnd.items():
        partner = {"L": "R", "B": "T"}.get(side)
        if partner is not None:
            c2, e2 = bnd[(partner, pos)]
            pairs.append((c, e, c2, e2))
    return TriMesh(vertices, cells, pairs)


def write_mesh(mesh: TriMesh, path) -> None:
    """Plain-text mesh: vertex, cell and periodic-pair sections, whitespace separated."""
    lines = [f"vertices {len(mesh.vertices)}"]
    lines += [f"{i} {x:.17g} {y:.17g}" for i, (x, y) in enumerate(mesh.vertices)]
    lines.append(f"cells {mesh.n_cells}")
    lines += [f"{i} {a} {b} {c}" for i, (a, b, c) in enumerate(mesh.cells)]
    lines.append(f"periodic {len(mesh.periodic_pairs)}")
    lines += [f"{c1} {e1} {c2} {e2}" for c1, e1, c2, e2 in mesh.periodic_pairs]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> TriMesh:
    tokens = [ln.split() for ln in Path(path).read_text().splitlines()
              if ln.strip() and not ln.lstrip().startswith("#")]
    pos = 0

    def section(name, width):
        nonlocal pos
        head = tokens[pos]
        if head[0] != name or len(head) != 2:
            raise ValueError(f"expected '{name} <count>' header, got {' '.join(head)!r}")
        n = int(head[1])
        rows = tokens[pos + 1:pos + 1 + n]
        if len(rows) != n or any(len(r) != width for r in rows):
            raise ValueError(f"malformed '{name}' section")
        pos += n + 1
        return rows

    vrows = section("vertices", 3)
    vertices = np.zeros((len(vrows), 2))
    for r in vrows:
        vertices[int(r[0])] = float(r[1]), float(r[2])
    crows = section("cells", 4)
    cells = np.zeros((len(crows), 3), dtype=int)
    for r in crows:
        cells[int(r[0])] = [int(t) for t in r[1:]]
    pairs = []
    if pos < len(tokens):
        pairs = [tuple(int(t) for t in r) for r in section("periodic", 4)]
    return TriMesh(vertices, cells, pairs)
