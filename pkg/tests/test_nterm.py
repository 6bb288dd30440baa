from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scatshift.basis import BasisFunction, get_test_function
from scatshift.nterm import (
    NTermConfig, ReferenceApproximants, allocate, error_grid, error_profile, expansion_of,
    linear_study, local_grid, local_spacing, nterm_approximate, nterm_from_expansion,
    ordered_partial_sums, precedes, series_bound_constant, series_ratio, sigma_study,
    wavelet_approximant,
)
from scatshift.quasilinear import lp_norm
from scatshift.wavelets import (
    DyadicSamples, WaveletExpansion, WaveletIndex, WaveletSystem, decompose, maximal_function,
)


@pytest.fixture(scope="module")
def cfg(tp2):
    return NTermConfig.for_basis(tp2, s=2.0, p=2.0, nu=3)


@pytest.fixture(scope="module")
def sysw(tp2):
    return WaveletSystem.for_basis(tp2, j0=3)


def random_expansion(seed, J=8, j0=2, density=0.2):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=2**J + 1) * (rng.uniform(size=2**J + 1) < density)
    vals[rng.integers(vals.size)] = 1.0
    return decompose(DyadicSamples(J, [0], vals), WaveletSystem("db7", 1, j0))


class TestConfig:
    def test_exponents(self):
        c = NTermConfig(1, 2, 1.0, 2.0, 3.0)
        assert c.q == pytest.approx(0.5) and c.tau == pytest.approx(2 / 3)

    @pytest.mark.parametrize("d,kappa,nu,n0", [(1, 2, 3, 4), (1, 2, 3.5, 5), (2, 4, 5, 49)])
    def test_minimal_count(self, d, kappa, nu, n0):
        assert NTermConfig(d, kappa, 1.0, 2.0, nu).n0 == n0

    @pytest.mark.parametrize("kw", [dict(nu=2.0), dict(s=0.0), dict(s=2.5), dict(p=0.5),
                                    dict(p=math.inf)])
    def test_rejects(self, kw):
        base = dict(d=1, kappa=2, s=1.0, p=2.0, nu=3.0)
        base.update(kw)
        with pytest.raises(ValueError):
            NTermConfig(**base)

    def test_default_nu(self, thin_plate):
        assert NTermConfig.for_basis(thin_plate).nu == 5


class TestLocalGrid:
    def test_unit_example(self):
        sys = WaveletSystem("db2")  # A0 = 3
        grid = local_grid(WaveletIndex(0, (0,), 1), 4, sys)
        np.testing.assert_allclose(grid.ravel(), [0, 1, 2, 3])

    def test_square(self):
        sys = WaveletSystem("db1", 2)  # A0 = 1
        grid = local_grid(WaveletIndex(0, (0, 0), 3), 9, sys)
        assert grid.shape == (9, 2)
        assert {tuple(p) for p in grid} == {(a, b) for a in (0, 0.5, 1) for b in (0, 0.5, 1)}

    def test_non_square_budget_rounds_down(self):
        grid = local_grid(WaveletIndex(0, (0, 0), 1), 15, WaveletSystem("db2", 2))
        assert grid.shape == (9, 2)

    @pytest.mark.parametrize("d", [1, 2])
    def test_spacing_halves(self, d):
        v = WaveletIndex(2, (0,) * d, 1)
        sys = WaveletSystem("db4", d)
        assert local_spacing(v, 2**d * 16, sys) == pytest.approx(local_spacing(v, 16, sys) / 2)

    def test_too_small(self):
        with pytest.raises(ValueError):
            local_grid(WaveletIndex(0, (0,), 1), 1, WaveletSystem("db4"))


class TestWaveletApproximant:
    def test_below_minimal_count(self, tp2, sysw, cfg):
        with pytest.raises(ValueError):
            wavelet_approximant(WaveletIndex(0, (0,), 1), 3, sysw, tp2, cfg)

    def test_refinement_exponent(self, tp2, sysw, cfg):
        v = WaveletIndex(0, (0,), 1)
        errs = []
        for N in (128, 256):
            S = wavelet_approximant(v, N, sysw, tp2, cfg)
            errs.append(error_profile(v, S, sysw, cfg, N)["raw_sup"])
        rate = math.log2(errs[0] / errs[1])
        assert abs(rate - tp2.kappa) <= 0.15 * tp2.kappa

    @pytest.mark.parametrize("N", [16, 128])
    def test_dilation_consistency(self, tp2, sysw, cfg, N):
        refs = ReferenceApproximants(sysw, tp2, cfg)
        v = WaveletIndex(3, (5,), 1)
        direct = wavelet_approximant(v, N, sysw, tp2, cfg)
        mapped = refs(v, N)
        x = np.linspace(0.5, 3.0, 401)[:, None]
        scale = np.max(np.abs(direct(x)))
        np.testing.assert_allclose(mapped(x), direct(x), atol=1e-10 * scale)
        p_direct = error_profile(v, direct, sysw, cfg, N)["sup"]
        p_ref = error_profile(WaveletIndex(0, (0,), 1), refs.reference(1, N), sysw, cfg, N)["sup"]
        assert p_direct == pytest.approx(p_ref, rel=1e-6)

    def test_far_field_bounded(self, tp2, sysw, cfg):
        v = WaveletIndex(4, (17,), 1)
        N = 64
        S = ReferenceApproximants(sysw, tp2, cfg)(v, N)
        prof = error_profile(v, S, sysw, cfg, N, far=30)
        outside = prof["dist"] > v.length
        assert np.all(np.isfinite(prof["values"]))
        assert prof["values"][outside].max() <= prof["values"][~outside].max()

    def test_certificate_stable_once_resolved(self, tp2, sysw, cfg):
        refs = ReferenceApproximants(sysw, tp2, cfg)
        sups = [error_profile(WaveletIndex(0, (0,), 1), refs.reference(1, N), sysw, cfg, N)["sup"]
                for N in (256, 512, 1024)]
        assert max(sups) <= 1.15 * min(sups)


class TestOrdering:
    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(1, 3)), min_size=3, max_size=3, unique=True))
    def test_strict_total_order(self, items):
        a, b, c = (WaveletIndex(j, (0,), e) for j, e in items)
        for x, y in ((a, b), (b, c), (a, c)):
            assert precedes(x, y) != precedes(y, x)
        assert not precedes(a, a)
        if precedes(a, b) and precedes(b, c):
            assert precedes(a, c)

    def test_larger_cube_first(self):
        assert precedes(WaveletIndex(1, (0,), 1), WaveletIndex(2, (0,), 3))
        assert precedes(WaveletIndex(2, (0,), 3), WaveletIndex(2, (0,), 1))


def brute_partial(exp, s, q, v, x):
    """Sum over w with x in I_w and w no later than v, by enumeration."""
    total = 0.0
    for w, c in exp.items():
        lo, hi = w.cube()
        if not np.all((x >= lo) & (x < hi)):
            continue
        if w == v or precedes(w, v):
            total += (w.length ** (-s) * abs(c)) ** q
    return total


class TestPartialSums:
    @pytest.mark.parametrize("seed", range(3))
    def test_matches_brute_force_and_constant_on_cube(self, seed):
        exp = random_expansion(seed, J=7)
        s, q = 2.0, 1 / 3
        Mq = ordered_partial_sums(exp, s, q)
        j, k, e, v = exp.flat(nonzero=False)
        rng = np.random.default_rng(seed)
        for i in rng.choice(j.size, size=25, replace=False):
            vi = WaveletIndex(int(j[i]), (int(k[i][0]),), int(e[i]))
            lo, hi = vi.cube()
            for x in lo + (hi - lo) * rng.uniform(size=(3, 1)):
                assert Mq[i] == pytest.approx(brute_partial(exp, s, q, vi, x), rel=1e-10, abs=1e-300)

    def test_bounded_by_maximal_function(self):
        exp = random_expansion(7, J=7)
        s, q = 2.0, 1 / 3
        Mq = ordered_partial_sums(exp, s, q) ** (1 / q)
        j, k, e, v = exp.flat(nonzero=False)
        mids = (k[:, 0] + 0.5) * 2.0 ** (-j)
        assert np.all(Mq <= maximal_function(exp, s, q, mids) * (1 + 1e-12))


class TestAllocate:
    def test_single_coefficient(self, cfg):
        sys = WaveletSystem("db7", 1, 0)
        exp = WaveletExpansion.single(sys, 6, 0, (0,), 1)
        alloc = allocate(exp, 1000, cfg)
        i = np.flatnonzero(alloc.coeff != 0)[0]
        assert alloc.M_q[i] == pytest.approx(1.0)
        assert alloc.seminorm ** cfg.tau == pytest.approx(sys.A0)
        assert alloc.c[i] == pytest.approx(1000 / sys.A0)
        assert alloc.N_v[i] == 1000 // sys.A0

    def test_zero_expansion(self, cfg):
        with pytest.raises(ValueError):
            allocate(WaveletExpansion.zeros(WaveletSystem("db7"), 5), 10, cfg)

    def test_small_costs_skipped(self, cfg):
        exp = random_expansion(3)
        alloc = allocate(exp, 200, cfg)
        assert np.all(alloc.N_v[alloc.c < cfg.n0] == 0)
        assert np.all(alloc.N_v[alloc.c >= cfg.n0] == np.floor(alloc.c[alloc.c >= cfg.n0]))

    @given(st.integers(0, 10_000), st.integers(0, 2**20), st.sampled_from([0.5, 1.0, 2.0]),
           st.sampled_from([1.0, 2.0, 4.0]))
    def test_budget_never_exceeded(self, seed, N, s, p):
        c = NTermConfig(1, 2, s, p, 3)
        alloc = allocate(random_expansion(seed, J=7), N, c)
        assert alloc.total_cost <= N
        assert alloc.total_centers <= N
        assert np.all(alloc.c >= 0)

    def test_normaliser(self, cfg):
        exp = random_expansion(11)
        alloc = allocate(exp, 5000, cfg)
        if not alloc.renormalised:
            assert alloc.a == pytest.approx(5000 / alloc.seminorm ** cfg.tau)


class TestNTermApproximate:
    def test_tiny_budget_is_empty(self, tp2, sysw, cfg):
        f = get_test_function("bump", tp2)
        A = nterm_approximate(f, 8, cfg, sysw, tp2, J=10, lo=0.0, hi=1.0)
        assert A.distinct_centers == 0
        X, cell = error_grid(0.0, 1.0, 1, 11)
        fx = f(X).ravel()
        assert lp_norm(fx - A(X), 2.0, cell) == pytest.approx(lp_norm(fx, 2.0, cell))

    def test_rejects_budget(self, tp2, sysw, cfg):
        with pytest.raises(ValueError):
            nterm_approximate(lambda P: P[:, 0], 0, cfg, sysw, tp2)

    def test_single_wavelet(self, tp2, cfg):
        sys = WaveletSystem("db7", 1, 0)
        exp = WaveletExpansion.single(sys, 6, 0, (0,), 1)
        N = 2000
        A = nterm_from_expansion(exp, N, cfg, tp2)
        S = wavelet_approximant(WaveletIndex(0, (0,), 1), N // sys.A0, sys, tp2, cfg)
        x = np.linspace(-1, 14, 601)[:, None]
        np.testing.assert_allclose(A(x), S(x), atol=1e-10)
        assert A.distinct_centers == N // sys.A0

    def test_zero_target(self, tp2, sysw, cfg):
        rep = sigma_study(lambda P: 0 * P[:, 0], [64, 128, 256, 512], cfg, sysw, tp2, J=8)
        assert rep.errors == [0.0] * 4
        assert math.isnan(rep.slope)
        assert json.loads(rep.to_json())["slope"] is None

    def test_accounting_and_provenance(self, tp2, sysw, cfg):
        f = get_test_function("cusp", tp2)
        A = nterm_approximate(f, 2**14, cfg, sysw, tp2, J=12, lo=0.05, hi=0.95)
        assert A.distinct_centers <= A.raw_centers <= A.allocation.total_centers <= 2**14
        rec = A.to_dict()
        assert rec["distinct_centers"] == A.distinct_centers

    def test_error_decreases_in_funded_regime(self, tp2, sysw, cfg):
        f = get_test_function("cusp", tp2)
        rep = sigma_study(f, [2**k for k in range(14, 18)], cfg, sysw, tp2, J=12, lo=0.05, hi=0.95)
        assert all(b <= a for a, b in zip(rep.errors, rep.errors[1:]))


class TestRates:
    def test_bump_slope(self, tp2, cfg):
        f = get_test_function("bump", tp2)
        sys = WaveletSystem.for_basis(tp2, j0=0)
        rep = sigma_study(f, [2**k for k in range(15, 19)], cfg, sys, tp2, J=12, lo=0.05, hi=0.95)
        assert rep.slope <= -tp2.kappa + 0.3
        assert rep.reference_slope == -2.0

    def test_cusp_beats_uniform(self, tp2, sysw, cfg):
        f = get_test_function("cusp", tp2)
        nl = sigma_study(f, [2**k for k in range(14, 19)], cfg, sysw, tp2, J=12, lo=0.05, hi=0.95)
        lin = linear_study(f, [2**k for k in range(4, 11)], tp2, 2.0, 0.05, 0.95)
        assert nl.slope <= lin.slope - 0.2

    def test_report_formats(self, tp2, sysw, cfg):
        f = get_test_function("cusp", tp2)
        rep = sigma_study(f, [2**12, 2**13, 2**14, 2**15], cfg, sysw, tp2, J=10, lo=0.05, hi=0.95)
        lines = rep.to_csv().splitlines()
        assert lines[0] == "N,error,slope_to_date"
        assert len(lines) == 5 and lines[1].endswith(",nan")
        summary = json.loads(rep.to_json())
        assert summary["reference_slope"] == -2.0
        assert set(summary) >= {"slope", "reference_slope", "config"}


class TestSeriesBound:
    @given(st.lists(st.floats(0, 1e3), min_size=1, max_size=200), st.sampled_from([0.05, 0.2, 0.5, 1.0]))
    def test_bound(self, z, eps):
        assert series_ratio(z, eps) <= series_bound_constant(eps) * (1 + 1e-12)

    @pytest.mark.parametrize("eps", [0.05, 0.2, 0.5])
    def test_growing_geometric_series_is_within_constant_factor(self, eps):
        z = 2.0 ** np.arange(200)
        assert 0.2 * series_bound_constant(eps) <= series_ratio(z, eps) <= series_bound_constant(eps)

    def test_eps_one(self, rng):
        assert series_ratio(rng.uniform(size=30), 1.0) == pytest.approx(1.0)

    def test_rejects(self):
        with pytest.raises(ValueError):
            series_bound_constant(0.0)
        with pytest.raises(ValueError):
            series_ratio([1.0, -1.0], 0.5)
