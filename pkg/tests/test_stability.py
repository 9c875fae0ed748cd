import json
import math
from collections import Counter

import numpy as np
import pytest

from sdapk.apk import PKD, ApkParams
from sdapk.geometry import build_ref_nodes
from sdapk.sd import build_ops
from sdapk.stability import (SOURCES, StabilityCase, StabilityConstants, assemble_S,
                             connectivity_matrices, default_cases, derivative_operators, frange,
                             max_real_part, parameter_grid, phase_matrices, stability_filter, sweep,
                             worker_count)


def _decode(K, spec_by_source):
    """Per-point source labels from run-length block-diagonal listings."""
    lab = [None] * K
    for name, spec in spec_by_source.items():
        pos = 0
        for on, n in spec:
            for _ in range(n):
                if on:
                    assert lab[pos] is None
                    lab[pos] = name
                pos += 1
        assert pos == K
    assert None not in lab
    return lab


def _our_pairs(N, rule="upwind"):
    M = connectivity_matrices(build_ref_nodes(N), rule)
    K = len(M[(1, "own")])

    def src(nu, k):
        return next(s for s in SOURCES if M[(nu, s)][k])[0].upper()

    return Counter((src(1, k), src(2, k)) for k in range(K))


# Reference selector listings (K_F = 10, 15, 21), as run lengths of (on, count).
LISTINGS = {
    2: ({"L": [(1, 4), (0, 6)], "O": [(0, 5), (1, 2), (0, 1), (1, 2)],
         "B": [(0, 4), (1, 1), (0, 2), (1, 1), (0, 2)]},
        {"L": [(0, 1), (1, 2), (0, 7)], "O": [(0, 3), (1, 1), (0, 1), (1, 2), (0, 1), (1, 1), (0, 1)],
         "B": [(1, 1), (0, 3), (1, 1), (0, 2), (1, 1), (0, 1), (1, 1)]}),
    3: ({"L": [(1, 5), (0, 10)], "O": [(0, 6), (1, 3), (0, 1), (1, 2), (0, 1), (1, 2)],
         "B": [(0, 5), (1, 1), (0, 3), (1, 1), (0, 2), (1, 1), (0, 2)]},
        {"L": [(0, 1), (1, 3), (0, 11)],
         "O": [(0, 4), (1, 1), (0, 1), (1, 3), (0, 1), (1, 2), (0, 1), (1, 1), (0, 1)],
         "B": [(1, 1), (0, 4), (1, 1), (0, 3), (1, 1), (0, 2), (1, 1), (0, 1), (1, 1)]}),
    4: ({"L": [(1, 6), (0, 15)], "O": [(0, 7), (1, 4), (0, 1), (1, 3), (0, 1), (1, 2), (0, 1), (1, 2)],
         "B": [(0, 6), (1, 1), (0, 4), (1, 1), (0, 3), (1, 1), (0, 2), (1, 1), (0, 2)]},
        {"L": [(0, 1), (1, 4), (0, 16)],
         "O": [(0, 5), (1, 1), (0, 1), (1, 4), (0, 1), (1, 3), (0, 1), (1, 2), (0, 1), (1, 1), (0, 1)],
         "B": [(1, 1), (0, 5), (1, 1), (0, 4), (1, 1), (0, 3), (1, 1), (0, 2), (1, 1), (0, 1), (1, 1)]}),
}


class TestSelectors:
    @pytest.mark.parametrize("rule", ["upwind", "own", "riemann"])
    @pytest.mark.parametrize("N", range(1, 6))
    def test_complete(self, rule, N):
        M = connectivity_matrices(build_ref_nodes(N), rule)
        for nu in (1, 2):
            total = sum(M[(nu, s)] for s in SOURCES)
            np.testing.assert_array_equal(total, 1.0)

    def test_second_order_listing(self):
        expected = Counter([("L", "B"), ("L", "L"), ("L", "O"), ("B", "B"), ("O", "O"), ("O", "B")])
        assert _our_pairs(1) == expected

    @pytest.mark.parametrize("N", [2, 3, 4])
    def test_reference_listings_up_to_permutation(self, N):
        K = (N + 2) * (N + 3) // 2
        m1 = _decode(K, LISTINGS[N][0])
        m2 = _decode(K, LISTINGS[N][1])
        assert _our_pairs(N) == Counter(zip(m1, m2))

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            connectivity_matrices(build_ref_nodes(2), "central")


class TestPhases:
    def test_zero_wave_is_identity(self):
        fp = build_ref_nodes(3).flux_points
        TL, TB = phase_matrices(StabilityCase(0.3, 0.0, 0.0), fp)
        np.testing.assert_allclose(TL, 1.0)
        np.testing.assert_allclose(TB, 1.0)

    def test_unit_modulus(self):
        fp = build_ref_nodes(3).flux_points
        TL, TB = phase_matrices(StabilityCase(0.3, 1.1, -2.0), fp)
        np.testing.assert_allclose(np.abs(TL), 1.0)
        np.testing.assert_allclose(np.abs(TB), 1.0)

    def test_example_entry(self):
        TL, _ = phase_matrices(StabilityCase(0.0, math.pi, 0.0), np.array([[0.5, 0.5]]))
        assert TL[0] == pytest.approx(-1.0)

    def test_case_ranges(self):
        with pytest.raises(ValueError):
            StabilityCase(2.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            StabilityCase(0.0, 4.0, 0.0)

    def test_default_grid(self):
        cases = default_cases()
        assert len(cases) == 125
        assert {c.psi for c in cases} == {k * math.pi / 8 for k in range(5)}


@pytest.fixture(scope="module")
def ops225():
    return build_ops(ApkParams(2, 2, 5), 3)


class TestAssemble:
    def test_constant_in_kernel(self, ops225):
        for psi in (0.0, 0.4, math.pi / 2):
            S = assemble_S(StabilityCase(psi, 0.0, 0.0), ops225).S
            assert np.abs(S @ np.ones(10)).max() < 1e-10

    def test_zero_epsilon_filter(self, ops225):
        case = StabilityCase(0.7, 1.0, -0.5)
        S = assemble_S(case, ops225).S
        Ss = assemble_S(case, ops225, sigma=np.ones(15)).S
        np.testing.assert_allclose(Ss, S, atol=1e-10)
        sig = stability_filter(ops225, 2, 0.0)
        np.testing.assert_array_equal(sig, 1.0)

    def test_paths_agree(self, ops225):
        a = derivative_operators(ops225, path="lagrange")
        b = derivative_operators(ops225, path="vandermonde")
        np.testing.assert_allclose(a[0], b[0], atol=1e-10)
        with pytest.raises(ValueError):
            derivative_operators(ops225, path="spectral")

    def test_basis_independent_spectrum(self, ops225):
        case = StabilityCase(math.pi / 8, math.pi / 2, -math.pi)
        e1 = np.sort_complex(np.linalg.eigvals(assemble_S(case, ops225).S))
        e2 = np.sort_complex(np.linalg.eigvals(assemble_S(case, build_ops(PKD, 3)).S))
        np.testing.assert_allclose(e1, e2, atol=1e-8)

    def test_eigen_residual(self, ops225):
        from sdapk.eig import eigvals, eigvec
        S = assemble_S(StabilityCase(0.3, 1.0, 2.0), ops225).S
        for lam in eigvals(S):
            v = eigvec(S, lam)
            assert np.linalg.norm(S @ v - lam * v) < 1e-9 * max(1.0, np.abs(S).max())


class TestSweep:
    def test_result_fields(self, ops225):
        cases = default_cases(2, 2)
        r = max_real_part(3, ApkParams(2, 2, 5), cases, ops=ops225)
        assert math.isnan(r.p) and math.isnan(r.c)
        assert r.L == r.eig_re
        assert any(c.psi == r.argmax_psi and c.wx == r.argmax_wx for c in cases)

    def test_empty_cases(self):
        with pytest.raises(ValueError):
            max_real_part(2, PKD, [])

    def test_ordering_and_checkpoint(self, tmp_path):
        tuples = [ApkParams(1, 1, 2), ApkParams(2, 2, 5), ApkParams(1, 2, 3)]
        cases = default_cases(1, 1)
        ck = tmp_path / "ck.jsonl"
        first = sweep(2, tuples, [None, (2, 4.0)], cases, checkpoint=ck, workers=1)
        assert [(r.alpha, r.beta, r.gamma) for r in first[::2]] == [t.as_tuple() for t in tuples]
        assert len(ck.read_text().splitlines()) == 6
        again = sweep(2, tuples, [None, (2, 4.0)], cases, checkpoint=ck, workers=1)
        assert [r.L for r in again] == [r.L for r in first]
        assert len(ck.read_text().splitlines()) == 6
        json.loads(ck.read_text().splitlines()[0])

    def test_parallel_matches_serial(self):
        tuples = [ApkParams(1, 1, 2), ApkParams(2, 2, 5)]
        cases = default_cases(1, 1)
        a = sweep(2, tuples, [(2, 8.0)], cases, workers=1)
        b = sweep(2, tuples, [(2, 8.0)], cases, workers=2)
        assert [r.L for r in a] == [r.L for r in b]

    def test_filter_lowers_L(self):
        cases = default_cases(2, 2)
        L0 = max_real_part(3, ApkParams(2, 2, 5), cases).L
        L8 = max_real_part(3, ApkParams(2, 2, 5), cases, p=2, c=8.0).L
        assert L8 < L0


def test_parameter_grid():
    g = parameter_grid([0.5, 1.0], [1.0], 2.5, 0.5)
    assert [t.as_tuple() for t in g] == [(0.5, 1.0, 1.5), (0.5, 1.0, 2.0), (0.5, 1.0, 2.5),
                                         (1.0, 1.0, 2.0), (1.0, 1.0, 2.5)]


def test_frange():
    assert frange(0.1, 0.5, 0.1) == [0.1, 0.2, 0.3, 0.4, 0.5]


def test_worker_count(monkeypatch):
    monkeypatch.setenv("SDAPK_THREADS", "1")
    assert worker_count() == 1
    monkeypatch.setenv("SDAPK_THREADS", "junk")
    assert worker_count() >= 1


def test_constants_default():
    c = StabilityConstants()
    assert c.h == pytest.approx(math.sqrt(2) / 6)
