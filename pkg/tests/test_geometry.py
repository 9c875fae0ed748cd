import math

import numpy as np
import pytest

from sdapk.apk import PKD, ApkBasis, ApkParams
from sdapk.geometry import (EDGE_VERTS, affine_map, build_pattern_grid, build_ref_nodes,
                            dirichlet_moment, gauss_lobatto_01, lobatto_nodes_triangle, read_mesh,
                            weighted_quadrature, write_mesh)

SYMMETRIES = [
    lambda x, y: (x, y),
    lambda x, y: (y, x),
    lambda x, y: (1 - x - y, y),
    lambda x, y: (x, 1 - x - y),
    lambda x, y: (1 - x - y, x),
    lambda x, y: (y, 1 - x - y),
]


def _same_set(a, b, tol=1e-14):
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return np.all(d.min(axis=1) < tol) and np.all(d.min(axis=0) < tol)


class TestNodes:
    def test_gll_endpoints(self):
        v = gauss_lobatto_01(4)
        assert v[0] == 0.0 and v[-1] == 1.0
        np.testing.assert_allclose(v + v[::-1], 1.0, atol=1e-15)

    def test_degree_one(self):
        assert _same_set(lobatto_nodes_triangle(1), np.array([[0, 0], [1, 0], [0, 1.0]]))

    def test_degree_two(self):
        expected = np.array([[0, 0], [1, 0], [0, 1], [0.5, 0], [0.5, 0.5], [0, 0.5]])
        assert _same_set(lobatto_nodes_triangle(2), expected)

    def test_degree_three(self):
        pts = lobatto_nodes_triangle(3)
        assert len(pts) == 10
        a, b = (1 - 1 / math.sqrt(5)) / 2, (1 + 1 / math.sqrt(5)) / 2
        for p in ([a, 0], [b, 0], [0, a], [0, b], [a, b], [b, a], [1 / 3, 1 / 3]):
            assert np.min(np.linalg.norm(pts - p, axis=1)) < 1e-14

    @pytest.mark.parametrize("d", range(1, 11))
    def test_symmetry(self, d):
        pts = lobatto_nodes_triangle(d)
        for s in SYMMETRIES:
            img = np.array([s(x, y) for x, y in pts])
            assert _same_set(pts, img, 1e-14)

    def test_lexicographic_order(self):
        pts = lobatto_nodes_triangle(4)
        keys = [tuple(np.round(p, 12)) for p in pts]
        assert keys == sorted(keys)

    @pytest.mark.parametrize("N,Ks,KF,interior", [(1, 3, 6, 0), (2, 6, 10, 1), (3, 10, 15, 3)])
    def test_ref_nodes_counts(self, N, Ks, KF, interior):
        nodes = build_ref_nodes(N)
        assert (nodes.K_s, nodes.K_F) == (Ks, KF)
        assert len(nodes.interior_indices) == interior == KF - 3 * (N + 2) + 3
        for e in range(3):
            assert len(nodes.edge_indices(e)) == N + 2

    def test_vertex_ownership(self):
        nodes = build_ref_nodes(2)
        tag = {tuple(p): t for p, t in zip(nodes.flux_points, nodes.edge_tag)}
        assert tag[(0.0, 0.0)] == 0 and tag[(1.0, 0.0)] == 0 and tag[(0.0, 1.0)] == 1

    def test_normals_unit_and_orthogonal(self):
        nodes = build_ref_nodes(3)
        b = nodes.boundary_indices
        np.testing.assert_allclose(np.linalg.norm(nodes.normals[b], axis=1), 1.0)
        np.testing.assert_allclose(np.sum(nodes.normals[b] * nodes.tangents[b], axis=1), 0.0, atol=1e-15)

    @pytest.mark.parametrize("N", range(1, 11))
    def test_unisolvence(self, N):
        V = ApkBasis(PKD, N).eval(lobatto_nodes_triangle(N))
        assert np.linalg.svd(V, compute_uv=False)[-1] > 1e-10

    def test_bad_degree(self):
        with pytest.raises(ValueError):
            build_ref_nodes(0)


class TestQuadrature:
    def test_examples(self):
        q = weighted_quadrature(PKD, 4)
        assert q.weights.sum() == pytest.approx(0.5)
        assert q.weights @ q.points[:, 0] == pytest.approx(1 / 6)
        assert weighted_quadrature(ApkParams(2, 2, 5), 2).weights.sum() == pytest.approx(1 / 120)

    @pytest.mark.parametrize("params", [PKD, ApkParams(2, 2, 5), ApkParams(0.5, 0.7, 2.0),
                                        ApkParams(1, 2, 3)])
    def test_monomial_exactness(self, params):
        deg = 12
        q = weighted_quadrature(params, deg)
        for i in range(deg + 1):
            for j in range(deg + 1 - i):
                got = q.weights @ (q.points[:, 0] ** i * q.points[:, 1] ** j)
                assert got == pytest.approx(dirichlet_moment(params, i, j), rel=1e-12)

    def test_range(self):
        with pytest.raises(ValueError):
            weighted_quadrature(PKD, 41)


class TestAffine:
    def test_identity(self):
        m = affine_map([[0, 0], [1, 0], [0, 1]])
        np.testing.assert_allclose(m.A, np.eye(2))
        np.testing.assert_allclose(m.b, 0)

    def test_scaled(self):
        m = affine_map([[0, 0], [2, 0], [0, 2]])
        np.testing.assert_allclose(m.A, np.diag([0.5, 0.5]))
        assert m.det == pytest.approx(0.25)

    def test_vertices_map(self):
        v = np.array([[0.3, 0.1], [1.2, 0.4], [0.5, 0.9]])
        m = affine_map(v)
        np.testing.assert_allclose(m(v), [[0, 0], [1, 0], [0, 1]], atol=1e-14)
        np.testing.assert_allclose(m.inverse(m(v)), v, atol=1e-14)

    def test_rejects(self):
        with pytest.raises(ValueError):
            affine_map([[0, 0], [1, 1], [2, 2]])
        with pytest.raises(ValueError):
            affine_map([[0, 0], [0, 1], [1, 0]])


class TestPatternMesh:
    @pytest.mark.parametrize("nb", [1, 2, 3])
    def test_closed_and_periodic(self, nb):
        mesh = build_pattern_grid(nb)
        assert mesh.n_cells == 8 * nb * nb
        assert mesh.is_closed
        for c in range(mesh.n_cells):
            assert len(set(mesh.neighbor[c])) == 3
            for e in range(3):
                c2, e2 = mesh.neighbor[c, e], mesh.neighbor_edge[c, e]
                assert (mesh.neighbor[c2, e2], mesh.neighbor_edge[c2, e2]) == (c, e)
                np.testing.assert_allclose(mesh.shift[c2, e2], -mesh.shift[c, e])
        assert all(m.det > 0 for m in mesh.maps)
        assert mesh.areas().sum() == pytest.approx(4.0)

    def test_right_angle_at_v0(self):
        mesh = build_pattern_grid(2)
        for c in range(mesh.n_cells):
            v = mesh.cell_vertices(c)
            assert np.dot(v[1] - v[0], v[2] - v[0]) == pytest.approx(0.0, abs=1e-14)

    def test_neighbour_maps(self):
        """Neighbours of a right-angle cell relate to it by the four pattern transformations."""
        mesh = build_pattern_grid(2)
        allowed = [np.eye(2), np.array([[0, 1], [-1, 0]]), np.array([[0, -1], [1, 0]]), -np.eye(2)]
        for c in range(mesh.n_cells):
            Ac = mesh.maps[c].A
            for e in range(3):
                An = mesh.maps[mesh.neighbor[c, e]].A
                R = An @ np.linalg.inv(Ac)
                assert any(np.allclose(R, M) for M in allowed)

    def test_left_neighbour_is_rotation(self):
        mesh = build_pattern_grid(2)
        c = 0
        nb = mesh.neighbor[c, 2]
        R = mesh.maps[nb].A @ np.linalg.inv(mesh.maps[c].A)
        np.testing.assert_allclose(R, [[0, 1], [-1, 0]], atol=1e-14)

    def test_mesh_roundtrip(self, tmp_path):
        mesh = build_pattern_grid(2)
        write_mesh(mesh, tmp_path / "m.txt")
        m2 = read_mesh(tmp_path / "m.txt")
        np.testing.assert_array_equal(m2.cells, mesh.cells)
        np.testing.assert_array_equal(m2.neighbor, mesh.neighbor)
        np.testing.assert_allclose(m2.vertices, mesh.vertices)

    def test_edge_verts_convention(self):
        assert EDGE_VERTS == ((0, 1), (1, 2), (2, 0))
