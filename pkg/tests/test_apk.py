import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdapk.apk import (ApkBasis, ApkParams, MultiIndex, apk_eval, apk_grad, apply_D, basis_ordering,
                       eigenvalue, jacobi_deriv, jacobi_eval, kappa, norm_squared,
                       norm_squared_closed_form, num_modes, pochhammer)

P112 = ApkParams(1, 1, 2)
P225 = ApkParams(2, 2, 5)


class TestJacobi:
    def test_degree_zero(self):
        assert jacobi_eval(0, 1, 3, 0.7) == 1.0

    def test_degree_one_closed_form(self):
        for a, b, x in [(0, 0, 0.5), (1.5, -0.5, 0.3), (2, 3, -0.8)]:
            assert jacobi_eval(1, a, b, x) == pytest.approx((a - b) / 2 + (a + b + 2) * x / 2)

    def test_legendre_p2(self):
        assert jacobi_eval(2, 0, 0, 0.5) == pytest.approx(-0.125)

    def test_matches_scipy(self):
        from scipy.special import eval_jacobi
        x = np.linspace(-1, 1, 11)
        for n in range(9):
            np.testing.assert_allclose(jacobi_eval(n, 1.3, 4.0, x), eval_jacobi(n, 1.3, 4.0, x),
                                       rtol=1e-12, atol=1e-12)

    def test_deriv_of_constant(self):
        assert jacobi_deriv(0, 2, 1, 0.4, 1) == 0.0

    def test_deriv_legendre_p1(self):
        assert jacobi_deriv(1, 0, 0, 0.3, 1) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("order", [1, 2])
    def test_deriv_finite_difference(self, order):
        n, a, b, x, h = 3, 2.0, 1.0, 0.2, 1e-4
        f = lambda z: jacobi_eval(n, a, b, z)
        if order == 1:
            fd = (f(x + h) - f(x - h)) / (2 * h)
        else:
            fd = (f(x + h) - 2 * f(x) + f(x - h)) / h ** 2
        assert jacobi_deriv(n, a, b, x, order) == pytest.approx(fd, rel=1e-5)

    def test_bad_order(self):
        with pytest.raises(ValueError):
            jacobi_deriv(2, 0, 0, 0.1, 3)


class TestParams:
    def test_p(self):
        assert P225.p == 1.0

    @pytest.mark.parametrize("args", [(0, 1, 2), (1, -1, 2), (1, 1, 1)])
    def test_domain(self, args):
        with pytest.raises(ValueError):
            ApkParams(*args)


class TestPointwise:
    def test_constant(self):
        assert apk_eval(P112, MultiIndex(0, 0), (0.3, 0.3)) == 1.0

    def test_A01_pkd(self):
        assert apk_eval(P112, MultiIndex(0, 1), (0.25, 0.25)) == pytest.approx(-0.25)
        assert apk_grad(P112, MultiIndex(0, 1), (0.25, 0.25)) == pytest.approx((1.0, 2.0))

    def test_grad_constant(self):
        assert apk_grad(P225, MultiIndex(0, 0), (0.1, 0.2)) == (0.0, 0.0)

    def test_outside_rejected(self):
        with pytest.raises(ValueError):
            apk_eval(P112, MultiIndex(1, 0), (0.8, 0.8))

    def test_vertex_10_finite(self):
        for m, l in ((i.m, i.l) for i in basis_ordering(6)):
            v = apk_eval(P225, MultiIndex(m, l), (1.0, 0.0))
            g = apk_grad(P225, MultiIndex(m, l), (1.0, 0.0))
            assert np.isfinite(v) and np.all(np.isfinite(g))
            if l > 0:
                assert v == pytest.approx(0.0, abs=1e-12)

    def test_grad_fd_225(self):
        idx, (x, y), h = MultiIndex(2, 1), (0.2, 0.3), 1e-6
        gx, gy = apk_grad(P225, idx, (x, y))
        fx = (apk_eval(P225, idx, (x + h, y)) - apk_eval(P225, idx, (x - h, y))) / (2 * h)
        fy = (apk_eval(P225, idx, (x, y + h)) - apk_eval(P225, idx, (x, y - h))) / (2 * h)
        assert gx == pytest.approx(fx, rel=1e-6)
        assert gy == pytest.approx(fy, rel=1e-6)

    def test_apply_D_constant(self):
        assert apply_D(P225, MultiIndex(0, 0), (0.2, 0.3)) == pytest.approx(0.0, abs=1e-14)

    def test_apply_D_examples(self):
        A = apk_eval(P112, MultiIndex(1, 0), (0.3, 0.4))
        assert apply_D(P112, MultiIndex(1, 0), (0.3, 0.4)) == pytest.approx(3 * A)
        A = apk_eval(P225, MultiIndex(1, 1), (0.25, 0.25))
        assert apply_D(P225, MultiIndex(1, 1), (0.25, 0.25)) == pytest.approx(14 * A, abs=1e-12)

    def test_apply_D_rejects_boundary(self):
        with pytest.raises(ValueError):
            apply_D(P112, MultiIndex(1, 0), (0.0, 0.3))

    def test_degree_along_lines(self):
        for m, l in ((i.m, i.l) for i in basis_ordering(5)):
            d = m + l
            p0 = np.array([0.1, 0.2])
            direction = np.array([0.4, 0.3])
            s = np.linspace(0, 1, d + 2)
            pts = p0 + s[:, None] * direction
            vals = np.array([apk_eval(P225, MultiIndex(m, l), tuple(p)) for p in pts])
            coef = np.polyfit(s[:-1], vals[:-1], d) if d > 0 else np.array([vals[0]])
            assert np.polyval(coef, s[-1]) == pytest.approx(vals[-1], abs=1e-10 * (1 + abs(vals[-1])))


class TestScalars:
    def test_eigenvalue(self):
        assert eigenvalue(MultiIndex(0, 0), 2) == 0
        assert eigenvalue(MultiIndex(1, 0), 2) == 3
        assert eigenvalue(MultiIndex(1, 1), 5) == 14

    def test_pochhammer(self):
        assert pochhammer(5, 0) == 1
        assert pochhammer(3, 2) == 12
        assert pochhammer(0.5, 3) == pytest.approx(1.875)

    def test_kappa_undefined_at_m0(self):
        with pytest.raises(ValueError):
            kappa(P225, MultiIndex(0, 1))


class TestNorms:
    def test_area(self):
        assert norm_squared(P112, MultiIndex(0, 0)) == pytest.approx(0.5)

    @pytest.mark.parametrize("params", [P112, P225, ApkParams(1, 2, 3), ApkParams(0.5, 1.5, 4)])
    def test_closed_form_m_ge_1(self, params):
        for m, l in ((i.m, i.l) for i in basis_ordering(6)):
            if m >= 1:
                idx = MultiIndex(m, l)
                assert norm_squared(params, idx) == pytest.approx(
                    norm_squared_closed_form(params, idx), rel=1e-12)

    def test_m0_two_rules(self):
        idx = MultiIndex(0, 1)
        assert norm_squared(P225, idx) == pytest.approx(norm_squared(P225, idx, 8), rel=1e-13)


class TestBasis:
    def test_ordering(self):
        N = 5
        b = ApkBasis(P112, N)
        assert len(b) == num_modes(N) == 21
        assert b.ordering[0] == MultiIndex(0, 0)
        assert len(set(b.ordering)) == len(b)
        degs = [i.degree for i in b.ordering]
        assert degs == sorted(degs)
        assert b.ordering[1:3] == (MultiIndex(1, 0), MultiIndex(0, 1))

    def test_eval_matches_pointwise(self):
        b = ApkBasis(P225, 4)
        pts = np.array([[0.1, 0.2], [0.5, 0.25], [0.0, 1.0]])
        V = b.eval(pts)
        for j, idx in enumerate(b.ordering):
            for i, p in enumerate(pts):
                assert V[i, j] == pytest.approx(apk_eval(P225, idx, tuple(p)), abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.9), st.floats(0.05, 0.9), st.integers(0, 5), st.integers(0, 5),
       st.sampled_from([P112, P225, ApkParams(1, 2, 3), ApkParams(0.7, 1.3, 3.5)]))
def test_eigenrelation_property(u, v, m, l, params):
    x, y = u, (1 - u) * v
    idx = MultiIndex(m, l)
    lam = eigenvalue(idx, params.gamma)
    A = apk_eval(params, idx, (x, y))
    assert abs(apply_D(params, idx, (x, y)) - lam * A) < 1e-8 * (1 + abs(lam * A))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.9), st.floats(0.05, 0.9), st.integers(0, 5), st.integers(0, 5))
def test_gradient_property(u, v, m, l):
    x, y, h = u, (1 - u) * v, 1e-6
    idx = MultiIndex(m, l)
    gx, gy = apk_grad(P225, idx, (x, y))
    fx = (apk_eval(P225, idx, (x + h, y)) - apk_eval(P225, idx, (x - h, y))) / (2 * h)
    fy = (apk_eval(P225, idx, (x, y + h)) - apk_eval(P225, idx, (x, y - h))) / (2 * h)
    scale = 1 + max(abs(gx), abs(gy))
    assert abs(gx - fx) < 1e-6 * scale
    assert abs(gy - fy) < 1e-6 * scale


def test_binomial_vertex_value():
    for params in [P112, P225, ApkParams(1, 2, 3), ApkParams(3, 1, 6)]:
        for m in range(7):
            v = apk_eval(params, MultiIndex(m, 0), (1.0, 0.0))
            assert abs(v) == pytest.approx(math.comb(int(m + params.gamma - params.alpha), m), rel=1e-10)
