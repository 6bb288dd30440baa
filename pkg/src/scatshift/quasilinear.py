"""Linear quasi-interpolation by scattered shifts, weighted error norms and Schur diagnostics.

Given ``T f`` and local functionals ``lambda_t`` the approximant is

    F(x) = sum_xi a(xi) phi(x - xi),   a(xi) = integral A(t, xi) T f(t) dt,

with the integral replaced by a composite Gauss-Legendre rule.  Since
``phi(x - t) = sum_xi A(t, xi) phi(x - xi) + E(x, t)``, the error splits into the
quadrature error of the convolution representation and ``-Q[T f * E(x, .)]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .basis import BasisFunction, AnalyticTestFunction, apply_T, as_points, eval_basis
from .centers import CenterSet, MajorantField
from .quadrature import QuadratureSpec, box_rule, loglog_slope
from .reports import RateReport
from .reproduction import (
    FunctionalBatch, ReproductionConfig, error_kernel_batch, functionals_for,
)
from .wavelets import (
    DyadicSamples, WaveletExpansion, WaveletSystem, T_wavelet_sup, decompose, lattice_measure,
    reconstruct, split_by_density, tl_norm,
)


@dataclass
class ScatteredApproximant:
    """Finite sum ``S(x) = sum a(xi) phi(x - xi)``."""

    phi: BasisFunction
    centers: np.ndarray
    coeffs: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, self.phi.d)
        self.coeffs = np.asarray(self.coeffs, dtype=float).ravel()
        if self.centers.shape[0] != self.coeffs.size:
            raise ValueError("one coefficient per center")

    @classmethod
    def empty(cls, phi: BasisFunction) -> "ScatteredApproximant":
        return cls(phi, np.zeros((0, phi.d)), np.zeros(0))

    def __len__(self) -> int:
        return self.coeffs.size

    def __call__(self, x, chunk: int = 1 << 22):
        pts = as_points(x, self.phi.d)
        shape = pts.shape[:-1]
        flat = pts.reshape(-1, self.phi.d)
        out = np.zeros(flat.shape[0])
        if self.coeffs.size == 0:
            return out.reshape(shape)
        step = max(1, chunk // max(1, self.coeffs.size))
        for i0 in range(0, flat.shape[0], step):
            blk = flat[i0:i0 + step]
            out[i0:i0 + step] = eval_basis(self.phi, blk[:, None, :] - self.centers[None]) @ self.coeffs
        return out.reshape(shape)

    def __add__(self, other: "ScatteredApproximant") -> "ScatteredApproximant":
        return merge_approximants([self, other], [1.0, 1.0])

    def scaled(self, factor: float) -> "ScatteredApproximant":
        return ScatteredApproximant(self.phi, self.centers, factor * self.coeffs, dict(self.info))

    def to_dict(self) -> dict:
        return {"basis": self.phi.describe(),
                "terms": [[c.tolist(), float(a)] for c, a in zip(self.centers, self.coeffs)]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, rec: dict) -> "ScatteredApproximant":
        b = rec["basis"]
        phi = BasisFunction(b["kind"], b["d"], b["kappa"], b.get("m"), b.get("c", 1.0))
        if not rec["terms"]:
            return cls.empty(phi)
        pts = np.array([np.atleast_1d(t[0]) for t in rec["terms"]], dtype=float)
        return cls(phi, pts, np.array([t[1] for t in rec["terms"]], dtype=float))


def merge_approximants(parts, weights=None, decimals: int = 12) -> ScatteredApproximant:
    """Sum of approximants with coincident centers merged (coordinates rounded to ``decimals``)."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to merge")
    phi = parts[0].phi
    weights = [1.0] * len(parts) if weights is None else list(weights)
    pts = [p.centers for p in parts if len(p)]
    if not pts:
        return ScatteredApproximant.empty(phi)
    P = np.concatenate(pts)
    A = np.concatenate([w * p.coeffs for p, w in zip(parts, weights) if len(p)])
    key = np.round(P, decimals)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    coef = np.bincount(inv.ravel(), weights=A, minlength=uniq.shape[0])
    first = np.full(uniq.shape[0], -1)
    first[inv.ravel()[::-1]] = np.arange(inv.size)[::-1]
    return ScatteredApproximant(phi, P[first], coef)


def assemble_measure(nodes, weights, cs: CenterSet, phi: BasisFunction,
                     cfg: ReproductionConfig | None, batch: FunctionalBatch | None = None,
                     keep_zero: bool = False, check_region: bool = True) -> ScatteredApproximant:
    """Approximant for the discrete measure ``sum_q weights[q] delta_{nodes[q]}`` in place of ``T f dt``.

    Each node contributes ``weights[q] * A(t_q, xi)`` to ``a(xi)``.  With
    ``check_region=False`` nodes slightly outside the centers' bounding box are
    accepted; their functionals use the nearest centers.
    """
    nodes = np.asarray(nodes, dtype=float).reshape(-1, cs.d)
    weights = np.asarray(weights, dtype=float).ravel()
    active = weights != 0
    if not np.any(active):
        return ScatteredApproximant.empty(phi)
    nodes, weights = nodes[active], weights[active]
    lo, hi = cs.bounds
    outside = np.any((nodes < lo - 1e-12) | (nodes > hi + 1e-12), axis=1)
    if check_region and np.any(outside):
        bad = nodes[np.flatnonzero(outside)[0]].tolist()
        raise ValueError(f"quadrature node {bad} lies outside the buildable region [{lo}, {hi}]")
    if batch is None:
        batch = functionals_for(cs, phi, cfg, nodes)
    contrib = batch.coeffs * weights[:, None]
    a = np.bincount(batch.index.ravel(), weights=contrib.ravel(), minlength=len(cs))
    used = np.zeros(len(cs), dtype=bool)
    used[batch.index.ravel()[batch.coeffs.ravel() != 0]] = True
    keep = used if keep_zero else used & (a != 0)
    info = {"quadrature_nodes": int(nodes.shape[0]), **batch.locality(),
            "max_functional_norm": float(batch.norms.max())}
    return ScatteredApproximant(phi, cs.points[keep], a[keep], info)


def assemble(f: AnalyticTestFunction, cs: CenterSet, cfg: ReproductionConfig | None,
             quad: QuadratureSpec, phi: BasisFunction) -> ScatteredApproximant:
    """Quasi-interpolant ``F`` of ``f`` from ``T f`` on the support box of ``f``.

    Raises
    ------
    ValueError
        If a quadrature node with nonzero ``T f`` lies outside the centers' bounding box.
    UnisolvenceFailure
        Propagated from the functional construction.
    """
    nodes, w = box_rule(f.lo, f.hi, quad)
    tf = apply_T(phi, f, nodes)
    return assemble_measure(nodes, w * tf, cs, phi, cfg)


def sampled_operator_measure(f, phi: BasisFunction, lo: float, hi: float, level: int):
    """Finite-difference measure for ``T f dt`` from samples of ``f`` at spacing ``2^-level`` (d = 1).

    Used when ``f`` has no classical ``T f``; the measure annihilates polynomials of
    degree ``< kappa`` exactly.
    """
    if phi.d != 1:
        raise ValueError("sampled operator measures are univariate")
    delta = 2.0 ** (-level)
    r = phi.kappa
    x = lo + delta * np.arange(-r, int(round((hi - lo) / delta)) + r + 1)
    vals = np.asarray(f(x[:, None]), dtype=float)
    w = vals
    for _ in range(r):
        w = np.diff(w)
    nodes = x[:w.size] + 0.5 * r * delta
    weights = phi.operator_scale * w / delta ** (r - 1)
    keep = weights != 0
    return nodes[keep][:, None], weights[keep]


def refinement_study(f: AnalyticTestFunction, spacings, phi: BasisFunction,
                     cfg: ReproductionConfig | None, lo, hi, X, p: float = math.inf,
                     cell: float = 1.0, panel_factor: float = 1.0, order: int = 8,
                     sample_level: int = 14) -> RateReport:
    """Uniform centers of each spacing on ``[lo, hi]^d``; error of ``F`` on the points ``X``.

    ``T f`` comes from the registry when available, otherwise (d = 1) from the
    sampled difference measure at level ``sample_level``.  The slope is fitted
    against the spacing, so the reference slope is ``kappa``.
    """
    X = as_points(X, phi.d).reshape(-1, phi.d)
    fx = np.asarray(f(X), dtype=float).ravel()
    errors, sizes = [], []
    for h in spacings:
        cs = CenterSet.uniform(lo, hi, h, phi.d)
        if f.has_T():
            F = assemble(f, cs, cfg, QuadratureSpec(panel_factor * h, order), phi)
        else:
            nodes, w = sampled_operator_measure(f, phi, float(np.min(f.lo)), float(np.max(f.hi)),
                                                sample_level)
            F = assemble_measure(nodes, w, cs, phi, cfg)
        errors.append(lp_norm(fx - F(X), p, cell))
        sizes.append(len(cs))
    slope = loglog_slope(spacings, errors)
    conf = {"basis": phi.describe(), "target": f.name, "lo": lo, "hi": hi, "p": p,
            "panel_factor": panel_factor, "order": order,
            "reproduction": None if cfg is None else cfg.to_dict()}
    return RateReport(list(map(float, spacings)), errors, slope, float(phi.kappa), conf,
                      {"centers": sizes}, param="h")


@dataclass
class LowSmoothnessResult:
    """Approximant of ``f_h^+`` with the weighted error and the smoothness proxy.

    Attributes
    ----------
    approximant : ScatteredApproximant
    plus, minus : WaveletExpansion
        The density split; ``minus`` is left unapproximated.
    weighted_error : float or None
        ``||H^-s (f - F)||_p`` on the supplied norm grid.
    norm_proxy : float
        ``||f||`` in ``F^s_{p,inf}`` computed from the coefficients.
    c_prime : float
        Largest measured ``||T psi_v||_inf l(v)^kappa`` over the wavelet types.
    info : dict
    """

    approximant: ScatteredApproximant
    plus: WaveletExpansion
    minus: WaveletExpansion
    weighted_error: Optional[float]
    norm_proxy: float
    c_prime: float
    info: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        """Weighted error over the smoothness proxy; bounded under refinement when the theory applies."""
        if self.weighted_error is None or self.norm_proxy == 0:
            return math.nan
        return self.weighted_error / self.norm_proxy

    def to_dict(self) -> dict:
        return {"weighted_error": self.weighted_error, "norm_proxy": self.norm_proxy,
                "ratio": self.ratio, "c_prime": self.c_prime, **self.info}


def empirical_c_prime(sys: WaveletSystem, phi: BasisFunction, R: int = 8) -> float:
    """``max_e ||T psi_(0,0,e)||_inf``; level independent because ``T`` is homogeneous of order ``kappa``."""
    return max(T_wavelet_sup(sys, phi, 0, e, R) for e in (0,) + tuple(sys.types))


def approximate_low_smoothness(f, s: float, cs: CenterSet, cfg: ReproductionConfig | None,
                               sys: WaveletSystem, phi: BasisFunction, df, J: int = 10,
                               lo=0.0, hi=1.0, level: int | None = None,
                               norm: WeightedNormSpec | None = None,
                               drop: float = 1e-13) -> LowSmoothnessResult:
    """Approximate ``f`` of smoothness ``0 < s < kappa`` through the density split.

    ``f`` is decomposed at level ``J`` (callable samples on ``[lo, hi]^d`` or a
    :class:`DyadicSamples`), split by the density field ``df`` and ``f_h^+`` is
    assembled from the measure of ``T psi_v``.  By linearity of the difference
    stencil the per-wavelet measures on a common lattice of level ``level`` sum to
    the stencil applied to samples of ``f_h^+`` there, which is how they are merged.

    Raises
    ------
    ValueError
        If ``s`` lies outside ``(0, kappa)`` or a measure node with non-negligible
        weight falls outside the centers' bounding box.
    """
    if not 0 < s < phi.kappa:
        raise ValueError(f"s = {s} must lie in (0, kappa = {phi.kappa})")
    d = phi.d
    samples = f if isinstance(f, DyadicSamples) else DyadicSamples.from_function(f, J, lo, hi, d)
    exp = decompose(samples, sys, "quadrature")
    plus, minus = split_by_density(exp, df)
    if level is None:
        # measure nodes at most min(h) / 4 apart, and never coarser than the data
        level = max(exp.J, int(math.ceil(math.log2(4.0 / float(df.values.min())))))
    fine = WaveletExpansion(sys, level, plus.coarse, plus.details, "quadrature")
    g = reconstruct(fine)
    nodes, w = lattice_measure(g.values, g.offset, level, phi)
    if w.size:
        w = np.where(np.abs(w) > drop * np.abs(w).max(), w, 0.0)
    F = assemble_measure(nodes, w, cs, phi, cfg)
    _, proxy = tl_norm(exp, s, norm.p if norm is not None else 2.0, math.inf)
    werr = None
    if norm is not None and callable(f):
        X = norm.points
        werr = weighted_norm(np.asarray(f(X), float).ravel() - F(X), norm)
    jp = plus.flat()[0]
    jm = minus.flat()[0]
    info = {"level": level, "J": exp.J, "plus_terms": int(jp.size), "minus_terms": int(jm.size),
            "centers": len(F), "measure_nodes": int(np.count_nonzero(w))}
    return LowSmoothnessResult(F, plus, minus, werr, proxy, empirical_c_prime(sys, phi), info)


# ---------------------------------------------------------------------------
# weighted norms


@dataclass
class WeightedNormSpec:
    """Weight ``H^(-s)`` and exponent ``p`` on an evaluation grid.

    Attributes
    ----------
    H : callable
        Majorant (or any positive function) evaluated at grid points.
    s : float
        Weight exponent.
    p : float
        Lebesgue exponent, ``np.inf`` allowed.
    points : ndarray, shape (M, d)
        Evaluation grid.
    cell : float
        Volume element attached to each grid point.
    """

    H: Callable
    s: float
    p: float
    points: np.ndarray
    cell: float = 1.0
    weight: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.p >= 1):
            raise ValueError("p must lie in [1, inf]")
        if self.s < 0:
            raise ValueError("weight exponent must be non-negative")
        self.points = np.asarray(self.points, dtype=float)
        Hv = np.asarray(self.H(self.points), dtype=float).ravel() if self.s != 0 else np.ones(len(self.points))
        if not np.all(Hv > 0):
            raise ValueError("majorant must be positive on the evaluation grid")
        self.weight = Hv ** (-self.s)

    def describe(self) -> dict:
        return {"s": self.s, "p": "inf" if np.isinf(self.p) else self.p,
                "points": int(len(self.points)), "cell": self.cell}


def lp_norm(values, p: float, cell: float = 1.0) -> float:
    v = np.abs(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        return 0.0
    if np.isinf(p):
        return float(v.max())
    return float((np.sum(v**p) * cell) ** (1.0 / p))


def weighted_norm(g, spec: WeightedNormSpec) -> float:
    """``|| H^(-s) g ||_p`` on the points of the norm specification (maximum over the grid when ``p = inf``)."""
    g = np.asarray(g, dtype=float).ravel()
    if g.size != spec.weight.size:
        raise ValueError("samples do not match the evaluation grid")
    return lp_norm(spec.weight * g, spec.p, spec.cell)


# ---------------------------------------------------------------------------
# Schur diagnostic


@dataclass(frozen=True)
class SchurSampling:
    """Anchors and geometric shells for the row and column integrals.

    Shells ``[h 2^k, h 2^(k+1)]`` for ``k = k_min .. k_max`` plus an inner ball carry
    Gauss-Legendre rules with ``order`` radial nodes (and ``n_dirs`` angles in 2D).
    """

    n_anchors: int = 24
    k_min: int = -4
    k_max: int = 40
    order: int = 6
    n_dirs: int = 16
    seed: int = 0

    def refined(self) -> "SchurSampling":
        return SchurSampling(self.n_anchors, self.k_min, self.k_max, 2 * self.order,
                             2 * self.n_dirs, self.seed)


def _shell_rule(d: int, k_min: int, k_max: int, order: int, n_dirs: int):
    """Offsets ``y`` (unit scale), weights and shell labels covering ``|y| <= 2^(k_max+1)``."""
    g, gw = np.polynomial.legendre.leggauss(order)
    g, gw = 0.5 * (g + 1), 0.5 * gw
    edges = np.concatenate([[0.0], 2.0 ** np.arange(k_min, k_max + 2)])
    offs, wts, lab = [], [], []
    for s_i in range(edges.size - 1):
        a, b = edges[s_i], edges[s_i + 1]
        r = a + (b - a) * g
        wr = (b - a) * gw
        if d == 1:
            offs += [r, -r]
            wts += [wr, wr]
            lab += [np.full(order, s_i), np.full(order, s_i)]
        else:
            ang = 2 * np.pi * (np.arange(n_dirs) + 0.5) / n_dirs
            R, Ang = np.meshgrid(r, ang, indexing="ij")
            W = np.outer(wr * r, np.full(n_dirs, 2 * np.pi / n_dirs))
            offs.append(np.stack([R * np.cos(Ang), R * np.sin(Ang)], -1).reshape(-1, 2))
            wts.append(W.ravel())
            lab.append(np.full(W.size, s_i))
    if d == 1:
        return np.concatenate(offs)[:, None], np.concatenate(wts), np.concatenate(lab)
    return np.concatenate(offs), np.concatenate(wts), np.concatenate(lab)


@dataclass
class SchurResult:
    row_sup: float
    col_sup: float
    row_passed: bool
    col_passed: bool
    row_ratio: float
    row_tail_fraction: float
    kernel: str
    r: float
    s: float
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.row_passed and self.col_passed

    def as_tuple(self):
        return self.row_sup, self.col_sup

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("row_sup", "col_sup", "row_passed", "col_passed",
                                              "row_ratio", "row_tail_fraction", "kernel", "r", "s",
                                              "message")} | {"passed": self.passed}


def _kernel_values(batch, phi, X, kernel, nu):
    if kernel == "envelope":
        h = batch.h[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.linalg.norm(X[None, :, :] - batch.t[:, None, :], axis=-1) / h
            env = h ** (phi.kappa - phi.d) * (1 + ratio) ** (-nu)
        return np.where(h > 0, env, 0.0)
    return np.abs(error_kernel_batch(batch, phi, X))


def _tail_analysis(inc: np.ndarray, window: int = 8):
    """Geometric decay ratio of the last shell increments and the extrapolated tail."""
    total = float(inc.sum())
    if total == 0:
        return 0.0, 0.0, True
    last = inc[-window:]
    if np.any(last <= 0):
        return 0.0, 0.0, True
    rho = float(np.exp(np.mean(np.diff(np.log(last)))))
    if rho >= 1:
        return rho, math.inf, False
    tail = float(last[-1] * rho / (1 - rho))
    return rho, tail / (total + tail), True


def schur_diagnostic(cs: CenterSet, phi: BasisFunction, cfg: ReproductionConfig | None,
                     H: MajorantField, s: float, sampling: SchurSampling | None = None,
                     nu: float | None = None, kernel: str = "envelope",
                     rho_max: float = 0.99, tail_max: float = 0.25, stability: float = 0.2,
                     ) -> SchurResult:
    """Row and column integrals of ``H(x)^(-s) |E(x, t)| h(t)^(s - kappa)``.

    Parameters
    ----------
    kernel : {"envelope", "measured"}
        ``"envelope"`` replaces ``|E|`` by the decay bound ``h^(kappa-d) (1 + |x-t|/h)^(-nu)``;
        ``"measured"`` uses the computed ``|E|``.
    rho_max, tail_max : float
        The row integral passes when the far-shell increments shrink geometrically with
        ratio below ``rho_max`` and the extrapolated tail is below ``tail_max`` of the total.
    stability : float
        Allowed relative change of either supremum under sampling refinement.
    """
    if not 0 < s <= phi.kappa:
        raise ValueError(f"weight exponent s = {s} outside (0, kappa]")
    if kernel not in ("envelope", "measured"):
        raise ValueError("kernel must be 'envelope' or 'measured'")
    sampling = SchurSampling() if sampling is None else sampling
    nu = (cfg.nu if cfg is not None and cfg.nu is not None else 2.0) if nu is None else nu
    r1 = _schur_once(cs, phi, cfg, H, s, sampling, nu, kernel, rho_max, tail_max)
    r2 = _schur_once(cs, phi, cfg, H, s, sampling.refined(), nu, kernel, rho_max, tail_max)
    res = r2
    msgs = []
    if not r1.row_passed or not r2.row_passed:
        res.row_passed = False
        msgs.append(f"row integral diverges (shell ratio {r2.row_ratio:.3f})")
    elif abs(r1.row_sup - r2.row_sup) > stability * max(r1.row_sup, r2.row_sup):
        res.row_passed = False
        msgs.append("row supremum unstable under refinement")
    if not np.isfinite(r2.col_sup) or abs(r1.col_sup - r2.col_sup) > stability * max(r1.col_sup, r2.col_sup):
        res.col_passed = False
        msgs.append("column supremum unstable under refinement")
    res.message = "; ".join(msgs)
    return res


def _schur_once(cs, phi, cfg, H, s, sampling, nu, kernel, rho_max, tail_max):
    grid_nodes = H.grid.nodes()
    rng = np.random.default_rng(sampling.seed)
    pick = rng.choice(grid_nodes.shape[0], size=min(sampling.n_anchors, grid_nodes.shape[0]),
                      replace=False)
    anchors = grid_nodes[np.sort(pick)]
    batch = functionals_for(cs, phi, cfg, anchors)
    offs, wts, lab = _shell_rule(phi.d, sampling.k_min, sampling.k_max, sampling.order, sampling.n_dirs)
    nshell = int(lab.max()) + 1
    row_sup, worst = 0.0, None
    ratio_w, tail_w, ok_all = 0.0, 0.0, True
    for i in range(len(batch)):
        lam_h = batch.h[i]
        if lam_h == 0:
            continue
        X = batch.t[i] + lam_h * offs
        sub = _sub(batch, i)
        K = _kernel_values(sub, phi, X, kernel, nu)[0]
        integrand = H(X) ** (-s) * K * lam_h ** (s - phi.kappa) * wts * lam_h**phi.d
        inc = np.bincount(lab, weights=integrand, minlength=nshell)
        rho, tail, ok = _tail_analysis(inc)
        ok = ok and tail <= tail_max and rho < rho_max
        total = float(inc.sum())
        if total >= row_sup:
            row_sup = total
        if not ok:
            ok_all = False
        ratio_w, tail_w = max(ratio_w, rho), max(tail_w, tail)
    # column integrals: x on the grid, t over the grid nodes
    tgrid = grid_nodes
    tb = functionals_for(cs, phi, cfg, tgrid)
    xs = grid_nodes[rng.choice(grid_nodes.shape[0], size=min(sampling.n_anchors, grid_nodes.shape[0]),
                               replace=False)]
    cell = H.grid.spacing ** phi.d
    hx = H(xs) ** (-s)
    col_sup = 0.0
    for j in range(xs.shape[0]):
        K = _kernel_values(tb, phi, xs[j:j + 1], kernel, nu)[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            hw = np.where(tb.h > 0, tb.h ** (s - phi.kappa), 0.0)
        col = float(hx[j] * np.sum(K * hw) * cell)
        col_sup = max(col_sup, col)
    return SchurResult(row_sup if ok_all else math.inf, col_sup, ok_all, True, ratio_w, tail_w,
                       kernel, H.r, s)


def _sub(batch: FunctionalBatch, i: int) -> FunctionalBatch:
    sl = slice(i, i + 1)
    return FunctionalBatch(batch.centers, batch.t[sl], batch.index[sl], batch.coeffs[sl],
                           batch.h[sl], batch.scale[sl], batch.size[sl], batch.kind, batch.n,
                           None, None if batch.lead is None else batch.lead[sl])


# ---------------------------------------------------------------------------
# error reports


@dataclass
class ErrorReport:
    """Rows ``(label, value)`` keyed by refinement parameter and norm type."""

    rows: list = field(default_factory=list)

    def add(self, param: float, norm: str, value: float):
        self.rows.append((float(param), norm, float(value)))

    def to_csv(self) -> str:
        lines = ["param,norm,value"]
        lines += [f"{p:.12g},{n},{v:.12g}" for p, n, v in self.rows]
        return "\n".join(lines) + "\n"
