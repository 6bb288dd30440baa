from __future__ import annotations

import json

import numpy as np
import pytest
import pywt
from hypothesis import given, strategies as st

from scatshift.basis import BasisFunction
from scatshift.centers import DensityField, Grid
from scatshift.wavelets import (
    DyadicSamples, WaveletExpansion, WaveletIndex, WaveletSystem, T_wavelet_measure, T_wavelet_sup,
    decompose, density_over_supports, maximal_function, reconstruct, split_by_density, synthesize,
    tl_norm,
)


@pytest.fixture(scope="module")
def db4():
    return WaveletSystem("db4", 1, 0)


def random_expansion(rng, sys, J=7, density=0.3):
    vals = rng.normal(size=2**J + 1) * (rng.uniform(size=2**J + 1) < density)
    return decompose(DyadicSamples(J, [0], vals), sys)


class TestSystem:
    def test_indices(self):
        v = WaveletIndex(3, (5,), 1)
        assert v.length == 0.125 and v.volume(2) == 0.125**2
        np.testing.assert_allclose(v.cube(), ([0.625], [0.75]))

    @pytest.mark.parametrize("family,A0,m", [("db4", 7, 4), ("db7", 13, 7)])
    def test_support_constant(self, family, A0, m):
        sys = WaveletSystem(family)
        assert sys.A0 == A0 and sys.vanishing_moments == m
        x = np.linspace(-1, A0 + 1, 4001)
        vals = sys.values(0, 0, 1, x)
        assert np.all(vals[(x < 0) | (x > A0)] == 0)

    def test_order_check(self):
        with pytest.raises(ValueError):
            WaveletSystem("db2").check_order(3)

    def test_default_family_covers_order(self):
        for phi in (BasisFunction.truncated_power(2), BasisFunction.thin_plate()):
            WaveletSystem.for_basis(phi).check_order(phi.kappa)

    @pytest.mark.parametrize("family", ["db4", "db7"])
    def test_orthonormal_gram(self, family):
        sys = WaveletSystem(family)
        R = 12
        x = np.arange(-sys.A0 * 2**R, 2 * sys.A0 * 2**R + 1) / 2**R
        funcs = [(0, 0, 0), (0, 1, 0)] + [(j, k, 1) for j in (0, 1) for k in (-1, 0, 1, 3)]
        vals = []
        for j, k, e in funcs:
            # L2 normalisation: w_v = |v|^(-1/2) psi_v
            vals.append(2.0 ** (j / 2) * sys.values(j, k, e, x, R=R))
        V = np.array(vals)
        G = V @ V.T / 2**R
        np.testing.assert_allclose(G, np.eye(len(funcs)), atol=1e-8)

    @pytest.mark.parametrize("family", ["db4", "db7", "db12"])
    def test_vanishing_moments(self, family):
        sys = WaveletSystem(family)
        R = 12
        x = np.arange(0, sys.A0 * 2**R + 1) / 2**R
        psi = sys.values(0, 0, 1, x, R=R)
        c = sys.A0 / 2
        for a in range(sys.vanishing_moments):
            assert abs(np.sum(((x - c) / c) ** a * psi) / 2**R) <= 1e-6

    def test_pointwise_refinement_agrees(self, db4):
        x = np.linspace(0.1, 6.9, 37)
        np.testing.assert_allclose(db4.values(0, 0, 1, x, R=10), db4.values(0, 0, 1, x, R=14), atol=2e-4)


class TestTransform:
    def test_single_level_matches_pywt(self, rng):
        for family in ("db4", "db7"):
            vals = rng.normal(size=50)
            exp = decompose(DyadicSamples(6, [0], vals), WaveletSystem(family, 1, 5))
            cA, cD = pywt.dwt(vals * 2.0**-3, family, mode="zero")
            np.testing.assert_allclose(exp.details[(5, 1)].values * 2**-2.5, cD, atol=1e-13)
            np.testing.assert_allclose(exp.coarse.values * 2**-2.5, cA, atol=1e-13)

    def test_single_level_matches_pywt_2d(self, rng):
        V = rng.normal(size=(20, 24))
        exp = decompose(DyadicSamples(5, [0, 0], V), WaveletSystem("db4", 2, 4))
        cA, (cH, cV, cD) = pywt.dwt2(V * 2.0**-5, "db4", mode="zero")
        for e, ref in zip((1, 2, 3), (cH, cV, cD)):
            np.testing.assert_allclose(exp.details[(4, e)].values * 2.0**-4, ref, atol=1e-13)

    @pytest.mark.parametrize("d,prefilter", [(1, "none"), (2, "none")])
    def test_round_trip(self, rng, d, prefilter):
        shape = (37,) if d == 1 else (19, 23)
        S = DyadicSamples(6, [-3] * d, rng.normal(size=shape))
        back = reconstruct(decompose(S, WaveletSystem("db4", d, 2), prefilter))
        sl = tuple(slice(o - b, o - b + n) for o, b, n in zip(S.offset, back.offset, shape))
        np.testing.assert_allclose(back.values[sl], S.values, atol=1e-8)
        outside = back.values.copy()
        outside[sl] = 0
        if prefilter == "none":
            assert np.max(np.abs(outside)) < 1e-8

    def test_quadrature_round_trip_on_polynomial(self, db4):
        S = DyadicSamples.from_function(lambda P: 2 - P[:, 0] + P[:, 0] ** 3, 6, -2, 3)
        back = reconstruct(decompose(S, db4, "quadrature"))
        x = back.points()[:, 0]
        inner = (x > -1) & (x < 1.5)
        np.testing.assert_allclose(back.values[inner], 2 - x[inner] + x[inner] ** 3, atol=1e-8)

    def test_parseval_multilevel(self, rng):
        vals = rng.normal(size=80)
        exp = decompose(DyadicSamples(7, [5], vals), WaveletSystem("db7", 1, 1))
        energy = np.sum((exp.coarse.values * 2**-0.5) ** 2)
        for (j, e), b in exp.details.items():
            energy += np.sum((b.values * 2.0 ** (-j / 2)) ** 2)
        assert energy == pytest.approx(np.sum(vals**2) * 2.0**-7, rel=1e-12)

    def test_synthesized_wavelet(self, db4):
        exp = WaveletExpansion.single(db4, 8, 3, (2,), 1)
        back = decompose(reconstruct(exp), db4)
        j, k, e, v = back.flat()
        big = np.abs(v) > 1e-10
        assert big.sum() == 1
        assert (j[big][0], k[big][0][0], e[big][0]) == (3, 2, 1)
        assert v[big][0] == pytest.approx(1.0, abs=1e-12)

    def test_l2_normalised_wavelet(self, db4):
        j = 3
        exp = WaveletExpansion.single(db4, 8, j, (2,), 1, value=2.0 ** (j / 2))
        back = decompose(reconstruct(exp), db4)
        assert back.coefficient(j, (2,), 1) == pytest.approx(2.0 ** (j / 2))

    def test_point_samples_with_quadrature_prefilter(self, db4):
        f = lambda P: db4.values(3, 2, 1, P.ravel(), R=12)
        S = DyadicSamples.from_function(f, 10, -1, 2)
        exp = decompose(S, db4, "quadrature")
        assert exp.coefficient(3, (2,), 1) == pytest.approx(1.0, abs=1e-4)

    def test_zero(self, db4):
        exp = decompose(DyadicSamples(6, [0], np.zeros(65)), db4)
        assert np.all(exp.flat(nonzero=False)[3] == 0)

    def test_empty_reconstruction(self, db4):
        assert np.all(reconstruct(WaveletExpansion.zeros(db4, 5)).values == 0)

    def test_single_coefficient_sup(self, db4):
        exp = WaveletExpansion.single(db4, 5, 2, (1,), 1)
        x = np.linspace(0, 3, 3001)
        sup = np.max(np.abs(synthesize(exp, x)))
        assert sup == pytest.approx(np.max(np.abs(db4.values(0, 0, 1, np.linspace(0, 7, 7001)))), rel=1e-3)

    def test_quadrature_prefilter_exact_on_cubic(self, db4):
        S = DyadicSamples.from_function(lambda P: 1 + P[:, 0] ** 3, 6, -2, 3)
        exp = decompose(S, db4, "quadrature")
        j, k, e, v = exp.flat(include_coarse=False)
        inner = (k[:, 0] * 2.0 ** (-j) >= -1.5) & ((k[:, 0] + db4.A0) * 2.0 ** (-j) <= 2.5)
        assert np.max(np.abs(v[inner]), initial=0) < 1e-10

    def test_non_dyadic_rejected(self, db4):
        with pytest.raises(ValueError):
            DyadicSamples.from_points(np.linspace(0, 1, 11), np.zeros(11))
        with pytest.raises(ValueError):
            decompose(np.zeros(8), db4)

    def test_from_points(self):
        S = DyadicSamples.from_points(np.arange(4, 12) / 8, np.arange(8.0))
        assert S.J == 3 and S.offset[0] == 4

    def test_json_round_trip(self, rng, db4):
        exp = random_expansion(rng, WaveletSystem("db4", 1, 2))
        rec = json.loads(exp.to_json())
        assert set(rec) >= {"family", "j0", "J", "coarse", "detail"}
        back = WaveletExpansion.from_dict(rec)
        for a, b in zip(exp.flat(), back.flat()):
            np.testing.assert_array_equal(a, b)

    def test_normalisation_invariance(self, db4):
        # f_v psi_{v,inf} equals f_{v,2} w_v
        j, k = 4, (3,)
        exp = WaveletExpansion.single(db4, 9, j, k, 1, value=0.7)
        x = np.linspace(0, 1, 257)
        lhs = synthesize(exp, x)
        w = 2.0 ** (j / 2) * db4.values(j, k, 1, x)
        f2 = 0.7 * 2.0 ** (-j / 2)
        np.testing.assert_allclose(lhs, f2 * w, atol=1e-14)


class TestMaximalFunction:
    def test_single_coefficient(self, db4):
        exp = WaveletExpansion.single(db4, 6, 2, (1,), 1, value=-3.0)
        x = np.linspace(-1, 4, 501)
        M = maximal_function(exp, 1.5, np.inf, x)
        inside = (x >= 0.25) & (x < 0.25 + 7 * 0.25)
        np.testing.assert_allclose(M[inside], 4**1.5 * 3.0)
        assert np.all(M[~inside] == 0)

    def test_two_overlapping_q1(self, db4):
        a = WaveletExpansion.single(db4, 6, 2, (1,), 1, value=1.0)
        exp = WaveletExpansion.from_flat(db4, 6, [2, 3], [[1], [3]], [1, 1], [1.0, -2.0])
        assert float(maximal_function(exp, 1.0, 1.0, 0.5)) == pytest.approx(4 * 1 + 8 * 2)
        assert float(maximal_function(a, 1.0, 1.0, 0.5)) == pytest.approx(4.0)

    @given(st.floats(0.3, 3.0), st.floats(0.2, 8.0), st.integers(0, 1000))
    def test_sup_dominated(self, s, q, seed):
        rng = np.random.default_rng(seed)
        exp = random_expansion(rng, WaveletSystem("db4", 1, 1), J=6)
        x = rng.uniform(-1, 2, 50)
        assert np.all(maximal_function(exp, s, np.inf, x) <= maximal_function(exp, s, q, x) * (1 + 1e-12))

    def test_matches_brute_force(self, rng):
        sys = WaveletSystem("db4", 1, 1)
        exp = random_expansion(rng, sys, J=6)
        x = rng.uniform(-1, 2, 40)
        s, q = 1.3, 0.7
        expect = np.zeros_like(x)
        for v, c in exp.items():
            lo, hi = v.support_cube(sys.A0)
            inside = (x >= lo[0]) & (x < hi[0])
            expect[inside] += (v.length ** (-s) * abs(c)) ** q
        np.testing.assert_allclose(maximal_function(exp, s, q, x), expect ** (1 / q), rtol=1e-12)

    def test_rejects_bad_smoothness(self, db4):
        with pytest.raises(ValueError):
            maximal_function(WaveletExpansion.zeros(db4, 4), 0.0, 1.0, [0.0])


class TestTLNorm:
    def test_zero(self, db4):
        assert tl_norm(WaveletExpansion.zeros(db4, 5), 1.0, 2.0, 1.0) == (0.0, 0.0)

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.5, np.inf])
    def test_single_coefficient(self, db4, p):
        j, s = 3, 1.25
        exp = WaveletExpansion.single(db4, 6, j, (2,), 1)
        semi, norm = tl_norm(exp, s, p, 1.0)
        vol = db4.A0 * 2.0**-j
        expect = 2.0 ** (j * s) * (1 if np.isinf(p) else vol ** (1 / p))
        assert semi == pytest.approx(expect, rel=1e-12)
        # same value by brute-force grid quadrature
        x = (np.arange(-2**10, 2 * 2**10) + 0.5) / 2**10
        M = maximal_function(exp, s, 1.0, x)
        quad = M.max() if np.isinf(p) else (np.sum(M**p) / 2**10) ** (1 / p)
        assert semi == pytest.approx(quad, rel=1e-12)
        assert norm > semi

    def test_single_coefficient_2d(self):
        sys = WaveletSystem("db4", 2, 0)
        exp = WaveletExpansion.single(sys, 4, 2, (1, 1), 3)
        semi, _ = tl_norm(exp, 1.0, 2.0, 1.0)
        assert semi == pytest.approx(4.0 * (7 * 0.25))

    @given(st.floats(0.2, 4.0), st.floats(0.1, 3.0), st.integers(0, 10_000))
    def test_q_monotone(self, q1, dq, seed):
        rng = np.random.default_rng(seed)
        exp = random_expansion(rng, WaveletSystem("db4", 1, 1), J=6)
        a, _ = tl_norm(exp, 1.0, 2.0, q1)
        b, _ = tl_norm(exp, 1.0, 2.0, q1 + dq)
        assert b <= a * (1 + 1e-12)

    @pytest.mark.parametrize("spec", ["bump", "cusp", "twobump"])
    def test_embedding_on_registry(self, spec, tp2):
        from scatshift.basis import get_test_function
        f = get_test_function(spec, tp2)
        sys = WaveletSystem("db7", 1, 0)
        exp = decompose(DyadicSamples.from_function(lambda P: f(P), 10, -1, 2), sys, "quadrature")
        vals = [tl_norm(exp, 1.0, 2.0, q)[0] for q in (0.5, 1.0, 2.0, np.inf)]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))


class TestSplit:
    def test_small_density_keeps_everything(self, rng):
        sys = WaveletSystem("db4", 1, 1)
        exp = random_expansion(rng, sys, J=6)
        df = DensityField.constant(Grid.covering(-2, 4, 2**-8), 2**-8)
        plus, minus = split_by_density(exp, df)
        assert minus.flat()[3].size == 0
        assert plus.flat()[3].size == exp.flat()[3].size

    def test_large_density_keeps_coarse_only(self, rng):
        sys = WaveletSystem("db4", 1, 1)
        exp = random_expansion(rng, sys, J=6)
        df = DensityField.constant(Grid.covering(-2, 4, 0.05), 1.0)
        plus, minus = split_by_density(exp, df)
        assert np.all(plus.flat()[2] == 0)
        assert minus.flat()[3].size == exp.flat(include_coarse=False)[3].size

    def test_mixed_density_brute_force(self, rng):
        sys = WaveletSystem("db4", 1, 1)
        exp = random_expansion(rng, sys, J=7, density=1.0)
        grid = Grid.covering(-1, 3, 2**-9)
        df = DensityField.from_function(grid, lambda P: np.where(P[:, 0] < 0.5, 2**-6, 2**-3))
        plus, minus = split_by_density(exp, df)
        nodes = grid.nodes()[:, 0]
        expect_plus = set()
        for v, c in exp.items():
            lo, hi = v.support_cube(sys.A0)
            inside = (nodes >= lo[0] - 1e-12) & (nodes <= hi[0] + 1e-12)
            hv = df.values[inside].max()
            if v.e == 0 or v.length >= hv:
                expect_plus.add((v.j, v.k, v.e))
        got = {(v.j, v.k, v.e) for v, _ in plus.items()}
        assert got == expect_plus
        assert {(v.j, v.k, v.e) for v, _ in minus.items()}.isdisjoint(got)

    @given(st.integers(0, 10_000), st.floats(2**-8, 1.0))
    def test_exact_partition(self, seed, h0):
        rng = np.random.default_rng(seed)
        sys = WaveletSystem("db4", 1, 1)
        exp = random_expansion(rng, sys, J=6)
        grid = Grid.covering(-2, 4, 2**-7)
        df = DensityField.from_function(grid, lambda P: h0 * (1 + np.abs(np.sin(5 * P[:, 0]))))
        plus, minus = split_by_density(exp, df)
        j, k, e, v = exp.flat()
        for jj, kk, ee, vv in zip(j, k, e, v):
            assert plus.coefficient(jj, kk, ee) + minus.coefficient(jj, kk, ee) == vv

    def test_density_over_supports_empty_cube(self):
        sys = WaveletSystem("db4", 1, 6)
        exp = WaveletExpansion.single(sys, 8, 6, (64,), 1)
        df = DensityField.constant(Grid((0.0,), 0.5, (5,)), 0.5)
        assert density_over_supports(exp, df)[0] == 0.5


class TestOperatorBound:
    @pytest.mark.parametrize("phi_name", ["tp2", "thin_plate"])
    def test_uniform_over_levels(self, phi_name, request):
        phi = request.getfixturevalue(phi_name)
        sys = WaveletSystem.for_basis(phi)
        e = 1 if phi.d == 1 else 3
        vals = [T_wavelet_sup(sys, phi, j, e, R=6) * 2.0 ** (-j * phi.kappa) for j in range(4)]
        assert max(vals) <= 1.1 * min(vals)

    def test_derivative_table_matches_finite_differences(self, tp2):
        sys = WaveletSystem.for_basis(tp2)
        R = 10
        x = np.arange(0, sys.A0 * 2**R + 1) / 2**R
        psi = sys.values(0, 0, 1, x, R=R)
        d2 = np.diff(psi, 2) * 4**R
        assert np.max(np.abs(d2)) == pytest.approx(T_wavelet_sup(sys, tp2, 0, 1, R=R), rel=0.02)

    def test_measure_annihilates_low_degree(self, tp2):
        sys = WaveletSystem.for_basis(tp2)
        nodes, w = T_wavelet_measure(sys, tp2, 2, (1,), 1, 6)
        for a in range(tp2.kappa):
            assert abs(np.sum(w * nodes[:, 0] ** a)) < 1e-9 * np.sum(np.abs(w))
