"""Nonlinear N-term approximation by scattered shifts driven by wavelet coefficients.

Each wavelet ``psi_v`` with enough budget is approximated on its own uniform
center grid over ``Ibar_v``; the budget is distributed by the cost rule

    c_v = a |v|^q |f_v|^q M_{q,v}^(tau - q),   tau = (1/p + s/d)^-1,  q = (1 + s/d)^-1,

and ``N_v = floor(c_v)`` centers are spent on ``psi_v`` when ``c_v >= N0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .basis import BasisFunction, TRUNCATED_POWER, as_points
from .centers import CenterSet
from .quadrature import loglog_slope
from .quasilinear import (
    ScatteredApproximant, assemble_measure, lp_norm, merge_approximants, sampled_operator_measure,
)
from .reports import RateReport
from .reproduction import ReproductionConfig, functionals_for
from .wavelets import (
    DyadicSamples, WaveletExpansion, WaveletIndex, WaveletSystem, T_wavelet_measure, decompose,
    tl_norm,
)


@dataclass(frozen=True)
class NTermConfig:
    """Smoothness ``s``, error exponent ``p`` and the decay exponent ``nu`` of the local grids."""

    d: int
    kappa: int
    s: float
    p: float = 2.0
    nu: Optional[float] = None

    def __post_init__(self):
        nu = 2 * self.d + 1 if self.nu is None else float(self.nu)
        object.__setattr__(self, "nu", nu)
        if not nu > 2 * self.d:
            raise ValueError(f"nu = {nu} must exceed 2d = {2 * self.d}")
        if not 0 < self.s <= self.kappa:
            raise ValueError(f"s = {self.s} must lie in (0, kappa]")
        if not (1 <= self.p < math.inf):
            raise ValueError("p must lie in [1, inf)")

    @classmethod
    def for_basis(cls, phi: BasisFunction, s: float | None = None, p: float = 2.0,
                  nu: float | None = None) -> "NTermConfig":
        return cls(phi.d, phi.kappa, float(phi.kappa if s is None else s), p, nu)

    @property
    def tau(self) -> float:
        return 1.0 / (1.0 / self.p + self.s / self.d)

    @property
    def q(self) -> float:
        return 1.0 / (1.0 + self.s / self.d)

    @property
    def n0(self) -> int:
        """Smallest per-wavelet center count ``(kappa - d + nu)^d``."""
        return int(math.ceil(self.kappa - self.d + self.nu - 1e-12)) ** self.d

    def reproduction(self) -> ReproductionConfig:
        n = int(math.ceil(self.kappa - self.d + self.nu - 1e-12))
        return ReproductionConfig(self.d, n, self.nu, 0)

    def to_dict(self) -> dict:
        return {"d": self.d, "kappa": self.kappa, "s": self.s, "p": self.p, "nu": self.nu,
                "tau": self.tau, "q": self.q, "N0": self.n0}


# ---------------------------------------------------------------------------
# local grids and per-wavelet approximants


def _int_root(N: int, d: int) -> int:
    m = int(round(N ** (1.0 / d)))
    while m**d > N:
        m -= 1
    while (m + 1) ** d <= N:
        m += 1
    return m


def local_grid(v: WaveletIndex, N: int, sys: WaveletSystem, n0: int = 2) -> np.ndarray:
    """The ``m^d`` vertices (``m = floor(N^(1/d))``) of the uniform grid on ``Ibar_v``."""
    if N < max(n0, 2**sys.d):
        raise ValueError(f"N = {N} below the minimal count {max(n0, 2 ** sys.d)}")
    m = _int_root(int(N), sys.d)
    lo, hi = v.support_cube(sys.A0)
    axes = [np.linspace(lo[i], hi[i], m) for i in range(sys.d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def local_spacing(v: WaveletIndex, N: int, sys: WaveletSystem) -> float:
    """Nominal density ``l(v) / N^(1/d)``."""
    return v.length / N ** (1.0 / sys.d)


def _resolution(N: int, sys: WaveletSystem, R: int | None) -> int:
    """Cascade level fine enough that measure nodes are 8x denser than the centers."""
    if R is not None:
        return R
    m = _int_root(int(N), sys.d)
    spacing = sys.A0 / max(m - 1, 1)
    return int(min(12 if sys.d == 1 else 6, max(6 if sys.d == 1 else 4,
                                                 math.ceil(math.log2(8 / spacing)))))


def wavelet_approximant(v: WaveletIndex, N_v: int, sys: WaveletSystem, phi: BasisFunction,
                        cfg: NTermConfig, R: int | None = None) -> ScatteredApproximant:
    """``S_{v,N_v}``: quasi-interpolant of ``psi_v`` from centers on its local grid.

    ``T psi_v`` is the finite-difference measure of :func:`T_wavelet_measure` at
    cascade level ``R``; the functionals are those of :func:`functionals_for`.
    """
    if N_v < cfg.n0:
        raise ValueError(f"N_v = {N_v} below N0 = {cfg.n0}")
    R = _resolution(N_v, sys, R)
    grid = local_grid(v, N_v, sys, cfg.n0)
    cs = CenterSet(grid)
    nodes, w = T_wavelet_measure(sys, phi, v.j, v.k, v.e, R)
    S = assemble_measure(nodes, w, cs, phi, cfg.reproduction(), check_region=False)
    S.info.update({"j": v.j, "k": list(v.k), "e": v.e, "N_v": int(N_v), "R": R})
    return S


class ReferenceApproximants:
    """Cache of level-0 approximants ``S_{(0,0,e),N}`` mapped to any ``v`` by dilation.

    ``S_v(x) = S_ref(2^j x - k)``; the coefficients pick up ``2^(j (kappa - d))`` and the
    polynomial produced by the logarithm vanishes because the measure annihilates
    polynomials of degree ``< kappa``.
    """

    def __init__(self, sys: WaveletSystem, phi: BasisFunction, cfg: NTermConfig, R: int | None = None):
        self.sys, self.phi, self.cfg, self.R = sys, phi, cfg, R
        self._cache = {}

    def reference(self, e: int, N: int) -> ScatteredApproximant:
        key = (e, int(N))
        if key not in self._cache:
            v0 = WaveletIndex(0, (0,) * self.sys.d, e)
            self._cache[key] = wavelet_approximant(v0, N, self.sys, self.phi, self.cfg, self.R)
        return self._cache[key]

    def __call__(self, v: WaveletIndex, N: int) -> ScatteredApproximant:
        ref = self.reference(v.e, N)
        scale = 2.0 ** (-v.j)
        centers = (ref.centers + np.asarray(v.k, float)) * scale
        coeffs = ref.coeffs * 2.0 ** (v.j * (self.phi.kappa - self.phi.d))
        info = dict(ref.info)
        info.update({"j": v.j, "k": list(v.k), "e": v.e})
        return ScatteredApproximant(self.phi, centers, coeffs, info)


def error_profile(v: WaveletIndex, S: ScatteredApproximant, sys: WaveletSystem, cfg: NTermConfig,
                  N_v: int, far: float = 30.0, n_inside: int = 2048, n_far: int = 64, R: int = 10):
    """Normalised error ``|psi_v - S| N_v^(kappa/d) (1 + dist(x, Ibar_v)/l(v))^(nu - d)``.

    Sampled on a lattice inside ``Ibar_v`` and on geometric shells out to ``far * l(v)``.

    Returns
    -------
    dict with ``sup`` (normalised), ``raw_sup``, and the sampled ``dist`` and ``values``.
    """
    lo, hi = v.support_cube(sys.A0)
    ell = v.length
    d = sys.d
    if d == 1:
        inside = np.linspace(lo[0], hi[0], n_inside + 1)[:, None]
        r = ell * np.geomspace(1e-2, far, n_far)
        outside = np.concatenate([lo[0] - r, hi[0] + r])[:, None]
    else:
        m = int(math.sqrt(n_inside))
        ax = [np.linspace(lo[i], hi[i], m + 1) for i in range(2)]
        g = np.meshgrid(*ax, indexing="ij")
        inside = np.stack([a.ravel() for a in g], -1)
        r = ell * np.geomspace(1e-2, far, n_far)
        mid = 0.5 * (lo + hi)
        ang = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        half = 0.5 * (hi - lo)
        outside = np.concatenate([
            np.stack([mid[0] + (half[0] + rr) * np.cos(ang) * np.sqrt(2),
                      mid[1] + (half[1] + rr) * np.sin(ang) * np.sqrt(2)], -1) for rr in r])
    X = np.concatenate([inside, outside])
    psi = sys.values(v.j, v.k, v.e, X, R=R)
    err = np.abs(psi - S(X))
    dist = np.linalg.norm(np.maximum(np.maximum(lo - X, X - hi), 0), axis=1)
    weight = N_v ** (cfg.kappa / d) * (1 + dist / ell) ** (cfg.nu - d)
    vals = err * weight
    return {"sup": float(vals.max()), "raw_sup": float(err.max()), "dist": dist, "values": vals}


# ---------------------------------------------------------------------------
# cost allocation


def precedes(a: WaveletIndex, b: WaveletIndex) -> bool:
    """Strict order on indices sharing a point: ``a > b`` if ``|a| > |b|``, or equal size and ``e_a > e_b``."""
    return a.j < b.j or (a.j == b.j and a.e > b.e)


def ordered_partial_sums(exp: WaveletExpansion, s: float, q: float):
    """``M_{q,v}^q`` for every coefficient (flat order), summing over ancestors of ``I_v``.

    Sums ``l(w)^(-q s) |f_w|^q`` over ``w`` whose cube ``I_w`` contains ``I_v`` and that
    come no later than ``v`` in the order (coarser cubes, then same cube with type ``>= e_v``).
    """
    j, k, e, val = exp.flat(nonzero=False)
    z = 2.0 ** (j * q * s) * np.abs(val) ** q
    out = np.zeros(z.size)
    levels = np.unique(j)
    d = exp.d
    # cube totals and cumulative sums down the dyadic tree
    cum_prev = None
    prev_lo = None
    for lev in levels:
        sel = np.flatnonzero(j == lev)
        kk = k[sel]
        lo = kk.min(axis=0)
        hi = kk.max(axis=0)
        shape = tuple(hi - lo + 1)
        total = np.zeros(shape)
        np.add.at(total, tuple((kk - lo).T), z[sel])
        ancestors = np.zeros(shape)
        if cum_prev is not None:
            cube = np.stack(np.meshgrid(*[lo[i] + np.arange(shape[i]) for i in range(d)],
                                        indexing="ij"), -1).reshape(-1, d)
            parent = np.floor_divide(cube, 2 ** (lev - prev_lev)) - prev_lo
            ok = np.all((parent >= 0) & (parent < np.asarray(cum_prev.shape)), axis=1)
            anc = np.zeros(cube.shape[0])
            anc[ok] = cum_prev[tuple(parent[ok].T)]
            ancestors = anc.reshape(shape)
        # within a cube the types with e' >= e come first: suffix sums after sorting by (cube, -e)
        key = np.ravel_multi_index(tuple((kk - lo).T), shape)
        order = np.lexsort((-e[sel], key))
        zs = z[sel][order]
        ks = key[order]
        csum = np.cumsum(zs)
        start = np.r_[0, np.flatnonzero(np.diff(ks)) + 1]
        base = np.repeat(np.r_[0.0, csum[start[1:] - 1]], np.diff(np.r_[start, ks.size]))
        within = csum - base
        out[sel[order]] = ancestors.ravel()[ks] + within
        cum_prev = ancestors + total
        prev_lo, prev_lev = lo, lev
    return out


@dataclass
class CostAllocation:
    """Costs ``c_v`` and center counts ``N_v`` for every coefficient of an expansion."""

    N: int
    a: float
    j: np.ndarray
    k: np.ndarray
    e: np.ndarray
    coeff: np.ndarray
    c: np.ndarray
    N_v: np.ndarray
    M_q: np.ndarray
    seminorm: float
    n0: int
    renormalised: bool = False

    @property
    def total_cost(self) -> float:
        return float(self.c.sum())

    @property
    def total_centers(self) -> int:
        return int(self.N_v.sum())

    def active(self):
        for i in np.flatnonzero(self.N_v > 0):
            yield WaveletIndex(int(self.j[i]), tuple(int(t) for t in self.k[i]), int(self.e[i])), \
                float(self.coeff[i]), int(self.N_v[i])

    def to_dict(self) -> dict:
        return {"N": self.N, "a": self.a, "seminorm": self.seminorm, "N0": self.n0,
                "total_cost": self.total_cost, "total_centers": self.total_centers,
                "active": int((self.N_v > 0).sum()), "renormalised": self.renormalised}


def allocate(exp: WaveletExpansion, N: int, cfg: NTermConfig) -> CostAllocation:
    """Distribute a budget of ``N`` centers over the coefficients of ``exp``.

    Raises
    ------
    ValueError
        For the zero expansion (the normaliser ``a`` would be undefined).
    """
    if N < 0:
        raise ValueError("budget must be non-negative")
    j, k, e, val = exp.flat(nonzero=False)
    if not np.any(val != 0):
        raise ValueError("cannot allocate a budget to the zero expansion")
    s, q, tau, d = cfg.s, cfg.q, cfg.tau, cfg.d
    semi, _ = tl_norm(exp, s, tau, q, f_samples=DyadicSamples(exp.J, np.zeros(d, int), np.zeros((1,) * d)))
    a = N / semi**tau
    Mq = ordered_partial_sums(exp, s, q) ** (1.0 / q)
    vol = 2.0 ** (-j * d)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(val != 0, a * vol**q * np.abs(val) ** q * Mq ** (tau - q), 0.0)
    renorm = False
    total = c.sum()
    if total > N:
        c *= N / total
        a *= N / total
        while c.sum() > N:
            c = np.nextafter(c, 0)
        renorm = True
    # absorb roundoff just below an integer; sum of the shifts stays below 1
    Nv = np.floor(c * (1 + 1e-12)).astype(int)
    Nv[c < cfg.n0] = 0
    return CostAllocation(int(N), float(a), j, k, e, val, c, Nv, Mq, semi, cfg.n0, renorm)


# ---------------------------------------------------------------------------
# N-term approximants


@dataclass
class NTermApproximant:
    approximant: ScatteredApproximant
    allocation: Optional[CostAllocation]
    provenance: dict = field(default_factory=dict)
    skipped_bound: float = 0.0

    @property
    def distinct_centers(self) -> int:
        return len(self.approximant)

    @property
    def raw_centers(self) -> int:
        return int(sum(n for n in self.provenance.values()))

    def __call__(self, x):
        return self.approximant(x)

    def to_dict(self) -> dict:
        return {"distinct_centers": self.distinct_centers, "raw_centers": self.raw_centers,
                "skipped_bound": self.skipped_bound,
                "allocation": None if self.allocation is None else self.allocation.to_dict(),
                "approximant": self.approximant.to_dict()}


def expansion_of(f, sys: WaveletSystem, J: int, lo=0.0, hi=1.0) -> WaveletExpansion:
    """Wavelet expansion of a callable sampled at level ``J`` (quadrature prefilter)."""
    samples = DyadicSamples.from_function(f, J, lo, hi, sys.d)
    return decompose(samples, sys, "quadrature")


def nterm_from_expansion(exp: WaveletExpansion, N: int, cfg: NTermConfig, phi: BasisFunction,
                         refs: ReferenceApproximants | None = None) -> NTermApproximant:
    """Allocate ``N`` centers over ``exp`` and sum ``f_v S_{v,N_v}``."""
    sys = exp.system
    refs = ReferenceApproximants(sys, phi, cfg) if refs is None else refs
    j, k, e, val = exp.flat(nonzero=False)
    if not np.any(val != 0):
        return NTermApproximant(ScatteredApproximant.empty(phi), None)
    alloc = allocate(exp, N, cfg)
    parts, weights, prov = [], [], {}
    for v, coeff, nv in alloc.active():
        parts.append(refs(v, nv))
        weights.append(coeff)
        prov[(v.j, v.k, v.e)] = _int_root(nv, sys.d) ** sys.d
    skipped = float(np.sum(np.abs(alloc.coeff[alloc.N_v == 0])))
    if not parts:
        return NTermApproximant(ScatteredApproximant.empty(phi), alloc, prov, skipped)
    S = merge_approximants(parts, weights)
    return NTermApproximant(S, alloc, prov, skipped)


def nterm_approximate(f, N: int, cfg: NTermConfig, sys: WaveletSystem, phi: BasisFunction,
                      J: int = 10, lo=0.0, hi=1.0, refs: ReferenceApproximants | None = None
                      ) -> NTermApproximant:
    """Decompose ``f`` (callable on points) at level ``J``, allocate ``N`` and build the sum."""
    if N < 1:
        raise ValueError("budget must be at least 1")
    exp = expansion_of(f, sys, J, lo, hi)
    return nterm_from_expansion(exp, N, cfg, phi, refs)


# ---------------------------------------------------------------------------
# rate studies


def error_grid(lo, hi, d: int, level: int):
    """Cell midpoints at spacing ``2^-level`` over ``[lo, hi]^d`` and the cell volume."""
    n = int(round((hi - lo) * 2**level))
    ax = lo + (np.arange(n) + 0.5) * 2.0 ** (-level)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], -1), 2.0 ** (-level * d)


def sigma_study(f, budgets, cfg: NTermConfig, sys: WaveletSystem, phi: BasisFunction,
                J: int = 12, lo=0.0, hi=1.0, eval_level: int | None = None,
                margin: float = 0.0) -> RateReport:
    """Measured ``||f - S_N||_p`` for each budget and the fitted slope against ``N``.

    The slope is ``nan`` when every error vanishes (e.g. ``f = 0``).
    """
    budgets = sorted(int(n) for n in budgets)
    eval_level = J + 1 if eval_level is None else eval_level
    X, cell = error_grid(lo - margin, hi + margin, sys.d, eval_level)
    fx = np.asarray(f(X), dtype=float)
    exp = expansion_of(f, sys, J, lo, hi)
    refs = ReferenceApproximants(sys, phi, cfg)
    errors, centers = [], []
    for N in budgets:
        A = nterm_from_expansion(exp, N, cfg, phi, refs)
        errors.append(lp_norm(fx - A(X), cfg.p, cell))
        centers.append(A.distinct_centers)
    slope = loglog_slope(budgets, errors) if any(e > 0 for e in errors) else float("nan")
    return RateReport(budgets, errors, slope, -cfg.s / cfg.d, cfg.to_dict(),
                      {"distinct_centers": centers, "J": J, "eval_level": eval_level})


def linear_study(f, budgets, phi: BasisFunction, p: float = 2.0, lo: float = 0.0, hi: float = 1.0,
                 level: int = 14, cfg: ReproductionConfig | None = None, eval_level: int = 13,
                 pad_points: int | None = None) -> RateReport:
    """Uniform-grid linear scheme with ``N`` centers on ``[lo, hi]`` (d = 1), same error metric.

    ``T f`` is the finite-difference measure of :func:`sampled_operator_measure`.
    """
    nodes, w = sampled_operator_measure(f, phi, lo, hi, level)
    X, cell = error_grid(lo, hi, 1, eval_level)
    fx = np.asarray(f(X), dtype=float)
    errors = []
    for N in budgets:
        cs = CenterSet(np.linspace(lo, hi, int(N))[:, None])
        inside = (nodes[:, 0] >= lo) & (nodes[:, 0] <= hi)
        S = assemble_measure(nodes[inside], w[inside], cs, phi, cfg)
        errors.append(lp_norm(fx - S(X), p, cell))
    return RateReport(list(map(int, budgets)), errors, loglog_slope(budgets, errors), float("nan"),
                      {"scheme": "uniform-linear", "p": p, "level": level})


# ---------------------------------------------------------------------------
# elementary series bound


def series_bound_constant(eps: float) -> float:
    """``C_eps = 2 / (2^eps - 1)`` in ``sum z_j / Z_j^(1-eps) <= C_eps Z^eps``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return 2.0 / (2.0**eps - 1.0)


def series_ratio(z, eps: float) -> float:
    """``sum_j z_j Z_j^(eps-1) / Z^eps`` for a non-negative sequence with partial sums ``Z_j``."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("terms must be non-negative")
    Z = np.cumsum(z)
    tot = Z[-1] if Z.size else 0.0
    if tot == 0:
        return 0.0
    nz = z > 0
    return float(np.sum(z[nz] * Z[nz] ** (eps - 1)) / tot**eps)
