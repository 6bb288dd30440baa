"""Local reproduction functionals, error kernels and the decay certificate.

A functional ``lambda_t = sum_xi A(t, xi) delta_xi`` supported on centers near ``t``
stands in for point evaluation at ``t``.  Two constructions are provided:

* :func:`build_functional` reproduces polynomials of degree ``< n`` with the
  least-Euclidean-norm coefficient vector (any dimension, surface splines);
* :func:`divided_difference_scheme` is the univariate scheme for truncated powers
  whose error kernel is a B-spline divided by the leading divided-difference weight.

The error kernel is ``E(x, t) = phi(x - t) - sum_xi A(t, xi) phi(x - xi)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Optional

import numpy as np

from .basis import TRUNCATED_POWER, BasisFunction, as_points, eval_basis
from .centers import CenterSet, DensityField, Grid, density_from_schemes

RANK_TOL = 1e-11
COINCIDENCE_TOL = 1e-13


class UnisolvenceFailure(RuntimeError):
    """No acceptable functional was found before the enlargement cap."""


# ---------------------------------------------------------------------------
# configuration and polynomial bookkeeping


def dim_poly(d: int, n: int) -> int:
    """Dimension of the polynomials of total degree ``< n`` in ``d`` variables."""
    return math.comb(n - 1 + d, d) if n >= 1 else 0


@lru_cache(maxsize=32)
def monomial_exponents(d: int, n: int) -> np.ndarray:
    """Exponent vectors of all monomials of degree ``< n``, sorted by degree."""
    exps = []
    for deg in range(n):
        for combo in combinations_with_replacement(range(d), deg):
            e = [0] * d
            for i in combo:
                e[i] += 1
            exps.append(e)
    out = np.array(exps, dtype=int).reshape(-1, d)
    out.setflags(write=False)
    return out


def vandermonde(U, n: int) -> np.ndarray:
    """Monomials of degree ``< n`` evaluated at ``U`` (shape ``(..., d)``) -> ``(..., P)``."""
    U = np.asarray(U)
    exps = monomial_exponents(U.shape[-1], n)
    out = np.ones(U.shape[:-1] + (exps.shape[0],), dtype=U.dtype)
    for i in range(U.shape[-1]):
        out = out * U[..., i:i + 1] ** exps[:, i]
    return out


@dataclass(frozen=True)
class ReproductionConfig:
    """Parameters of the local functionals.

    Attributes
    ----------
    d : int
        Dimension.
    n : int
        Reproduce polynomials of degree ``< n``.
    nu : float, optional
        Decay exponent the functionals are meant to certify.
    r_extra : int
        Centers selected beyond ``dim P``.
    c_max : float, optional
        Acceptance threshold for ``sum |A|``; default ``10 dim P``.
    cap : int, optional
        Maximum number of single-point enlargements; default ``3 dim P``.
    """

    d: int
    n: int
    nu: Optional[float] = None
    r_extra: int = 0
    c_max: Optional[float] = None
    cap: Optional[int] = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if self.n < 1:
            raise ValueError("reproduction degree bound n must be >= 1")
        if self.nu is not None and not self.nu > self.d:
            raise ValueError(f"decay exponent nu = {self.nu} must exceed d = {self.d}")
        if self.r_extra < 0:
            raise ValueError("r_extra must be non-negative")
        if self.c_max is None:
            object.__setattr__(self, "c_max", 10.0 * self.dim_p)
        if self.cap is None:
            object.__setattr__(self, "cap", 3 * self.dim_p)
        if not self.c_max >= 1:
            raise ValueError("c_max must be >= 1")

    @classmethod
    def for_basis(cls, phi: BasisFunction, nu: float | None = None, r_extra: int | None = None,
                  c_max: float | None = None, cap: int | None = None) -> "ReproductionConfig":
        """Config with ``n = ceil(kappa - d + nu)`` and ``nu`` defaulting to ``2d + 1``."""
        nu = 2 * phi.d + 1 if nu is None else float(nu)
        n = int(math.ceil(phi.kappa - phi.d + nu - 1e-12))
        p = dim_poly(phi.d, n)
        r_extra = (p // 2 if phi.d > 1 else 1) if r_extra is None else r_extra
        return cls(phi.d, n, nu, int(r_extra), c_max, cap)

    @property
    def dim_p(self) -> int:
        return dim_poly(self.d, self.n)

    def to_dict(self) -> dict:
        return {"d": self.d, "n": self.n, "nu": self.nu, "r_extra": self.r_extra,
                "c_max": self.c_max, "cap": self.cap, "dim_p": self.dim_p}


# ---------------------------------------------------------------------------
# functionals


@dataclass(frozen=True)
class ReproducingFunctional:
    """``lambda_t = sum A(t, xi) delta_xi`` with its radius and l1 norm."""

    t: np.ndarray
    support: np.ndarray
    coeffs: np.ndarray
    index: np.ndarray = field(repr=False)
    h: float
    kind: str = "reproduction"
    n: int = 0
    enlarged: int = 0
    scale: float = 1.0
    lead: float = 1.0

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.coeffs)))

    @property
    def trivial(self) -> bool:
        return self.kind == "self"

    def reproduction_residual(self) -> float:
        """Max over monomials of degree ``< n`` (scaled to the ball) of ``|lambda p - p(t)|``."""
        if self.trivial or self.n == 0:
            return 0.0
        U = (self.support - self.t) / self.scale
        V = vandermonde(U, self.n)
        e0 = np.zeros(V.shape[1])
        e0[0] = 1.0
        return float(np.max(np.abs(V.T @ self.coeffs - e0)))

    def to_dict(self) -> dict:
        return {
            "t": self.t.tolist(),
            "support": [[xi.tolist(), float(a)] for xi, a in zip(self.support, self.coeffs)],
            "h": self.h,
            "norm": self.norm,
            "kind": self.kind,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, rec: dict, n: int = 0) -> "ReproducingFunctional":
        t = np.asarray(rec["t"], dtype=float)
        sup = np.array([np.atleast_1d(p[0]) for p in rec["support"]], dtype=float)
        coeffs = np.array([p[1] for p in rec["support"]], dtype=float)
        scale = float(rec["h"]) if rec["h"] > 0 else 1.0
        return cls(t, sup.reshape(-1, t.size), coeffs, np.arange(coeffs.size), float(rec["h"]),
                   rec.get("kind", "reproduction"), n, 0, scale)


def _least_norm(B: np.ndarray):
    """Least-norm solutions of ``B a = e0`` for a stack ``B`` of shape ``(M, P, K)``.

    Returns coefficients ``(M, K)`` and a full-rank flag per row.
    """
    u, s, vh = np.linalg.svd(B, full_matrices=False)
    ok = s[:, -1] > RANK_TOL * s[:, 0]
    inv = np.where(s > RANK_TOL * s[:, :1], 1.0 / np.where(s > 0, s, 1.0), 0.0)
    coef = np.einsum("mik,mi->mk", vh, u[:, 0, :] * inv)
    return coef, ok


def _solve_selection(cs: CenterSet, t: np.ndarray, idx: np.ndarray, n: int):
    pts = cs.points[idx]
    dist = np.linalg.norm(pts - t[:, None, :], axis=-1)
    scale = dist.max(axis=1)
    scale = np.where(scale > 0, scale, 1.0)
    U = (pts - t[:, None, :]) / scale[:, None, None]
    B = np.swapaxes(vandermonde(U, n), 1, 2)
    coef, ok = _least_norm(B)
    return coef, ok, dist.max(axis=1), scale


def build_functional(cs: CenterSet, t, cfg: ReproductionConfig) -> ReproducingFunctional:
    """Least-norm functional reproducing polynomials of degree ``< cfg.n`` at ``t``.

    Starts from the ``dim P + r_extra`` nearest centers and adds the next-nearest
    center while the system is rank deficient or ``sum |A| > c_max``.

    Raises
    ------
    UnisolvenceFailure
        When the enlargement cap is reached without an acceptable functional.
    """
    t = np.asarray(t, dtype=float).reshape(cs.d)
    if cfg.d != cs.d:
        raise ValueError("configuration and center set dimensions differ")
    p = cfg.dim_p
    if len(cs) < p:
        raise UnisolvenceFailure(f"need at least {p} centers, have {len(cs)}")
    k0 = min(p + cfg.r_extra, len(cs))
    kmax = min(k0 + cfg.cap, len(cs))
    idx_all, _ = cs.k_nearest_batch(t[None], kmax)
    best = None
    for k in range(k0, kmax + 1):
        idx = idx_all[:, :k]
        coef, ok, h, scale = _solve_selection(cs, t[None], idx, cfg.n)
        if ok[0]:
            norm = float(np.abs(coef[0]).sum())
            if best is None or norm < best[0]:
                best = (norm, k)
            if norm <= cfg.c_max:
                return ReproducingFunctional(t, cs.points[idx[0]], coef[0], idx[0], float(h[0]),
                                             "reproduction", cfg.n, k - k0, float(scale[0]))
    msg = f"no acceptable functional at t = {t.tolist()} within {kmax} centers"
    if best is not None:
        msg += f" (smallest norm {best[0]:.3g} with {best[1]} centers, c_max = {cfg.c_max})"
    raise UnisolvenceFailure(msg)


@dataclass
class FunctionalBatch:
    """Functionals for many anchors, padded to a common support size.

    Padding slots carry coefficient 0 and repeat a genuine support index.
    """

    centers: CenterSet
    t: np.ndarray
    index: np.ndarray
    coeffs: np.ndarray
    h: np.ndarray
    scale: np.ndarray
    size: np.ndarray
    kind: str
    n: int = 0
    enlarged: np.ndarray = None
    lead: np.ndarray = None

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def norms(self) -> np.ndarray:
        return np.abs(self.coeffs).sum(axis=1)

    @property
    def support_points(self) -> np.ndarray:
        return self.centers.points[self.index]

    def __getitem__(self, i: int) -> ReproducingFunctional:
        k = int(self.size[i])
        kind = self.kind
        if self.kind == "divided-difference" and self.h[i] == 0:
            kind = "self"
        return ReproducingFunctional(
            self.t[i], self.centers.points[self.index[i, :k]], self.coeffs[i, :k],
            self.index[i, :k], float(self.h[i]), kind, self.n,
            0 if self.enlarged is None else int(self.enlarged[i]), float(self.scale[i]),
            1.0 if self.lead is None else float(self.lead[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def locality(self) -> dict:
        """Support-size and radius constants (n', M0) realised by the batch."""
        return {"max_support": int(self.size.max(initial=0)),
                "max_radius": float(self.h.max(initial=0.0))}

    def reproduction_residuals(self) -> np.ndarray:
        if self.n == 0 or self.kind != "reproduction":
            return np.zeros(len(self))
        U = (self.support_points - self.t[:, None, :]) / self.scale[:, None, None]
        V = vandermonde(U, self.n)
        r = np.einsum("mkp,mk->mp", V, self.coeffs)
        r[:, 0] -= 1.0
        return np.abs(r).max(axis=1)


def build_functionals(cs: CenterSet, T, cfg: ReproductionConfig, chunk: int = 4096) -> FunctionalBatch:
    """Vectorised :func:`build_functional` over anchors ``T`` of shape ``(M, d)``."""
    T = np.asarray(T, dtype=float).reshape(-1, cs.d)
    p = cfg.dim_p
    if len(cs) < p:
        raise UnisolvenceFailure(f"need at least {p} centers, have {len(cs)}")
    k0 = min(p + cfg.r_extra, len(cs))
    M = T.shape[0]
    idx = np.empty((M, k0), dtype=int)
    coef = np.empty((M, k0))
    h = np.empty(M)
    scale = np.empty(M)
    good = np.empty(M, dtype=bool)
    for i0 in range(0, M, chunk):
        sl = slice(i0, i0 + chunk)
        ii, _ = cs.k_nearest_batch(T[sl], k0)
        c, ok, hh, sc = _solve_selection(cs, T[sl], ii, cfg.n)
        idx[sl], coef[sl], h[sl], scale[sl] = ii, c, hh, sc
        good[sl] = ok & (np.abs(c).sum(axis=1) <= cfg.c_max)
    enlarged = np.zeros(M, dtype=int)
    bad = np.flatnonzero(~good)
    extra = {}
    for i in bad:
        lam = build_functional(cs, T[i], cfg)
        extra[i] = lam
        enlarged[i] = lam.enlarged
    size = np.full(M, k0)
    if extra:
        kk = max(k0, max(lam.coeffs.size for lam in extra.values()))
        idx = np.concatenate([idx, np.repeat(idx[:, :1], kk - k0, axis=1)], axis=1)
        coef = np.concatenate([coef, np.zeros((M, kk - k0))], axis=1)
        for i, lam in extra.items():
            k = lam.coeffs.size
            idx[i, :k], coef[i, :k] = lam.index, lam.coeffs
            idx[i, k:] = lam.index[0]
            coef[i, k:] = 0.0
            h[i], scale[i], size[i] = lam.h, lam.scale, k
    return FunctionalBatch(cs, T, idx, coef, h, scale, size, "reproduction", cfg.n, enlarged)


# ---------------------------------------------------------------------------
# univariate divided differences


def _dd_batch(cs: CenterSet, T: np.ndarray, kappa: int) -> FunctionalBatch:
    if cs.d != 1:
        raise ValueError("divided-difference schemes are univariate")
    if len(cs) < kappa:
        raise ValueError(f"need at least kappa = {kappa} centers")
    T = np.asarray(T, dtype=float).reshape(-1, 1)
    idx, dist = cs.k_nearest_batch(T, kappa)
    xi = cs.points[idx, 0]
    t = T[:, 0]
    scale_ref = np.maximum(np.abs(t), 1.0)
    self_rows = dist[:, 0] <= COINCIDENCE_TOL * scale_ref
    knots = np.concatenate([t[:, None], xi], axis=1)
    diff = knots[:, :, None] - knots[:, None, :]
    np.einsum("mii->mi", diff)[:] = 1.0
    w = 1.0 / np.prod(np.where(self_rows[:, None, None], 1.0, diff), axis=2)
    lead = w[:, 0]
    coef = -w[:, 1:] / lead[:, None]
    h = dist.max(axis=1)
    # t on a center: phi(. - t) lies in the span, use the exact self-scheme
    coef[self_rows] = 0.0
    coef[self_rows, 0] = 1.0
    h[self_rows] = 0.0
    lead[self_rows] = np.inf
    size = np.full(T.shape[0], kappa)
    size[self_rows] = 1
    return FunctionalBatch(cs, T, idx, coef, h, np.where(h > 0, h, 1.0), size,
                           "divided-difference", 0, np.zeros(T.shape[0], dtype=int), lead)


def divided_difference_scheme(cs: CenterSet, t: float, kappa: int) -> ReproducingFunctional:
    """Functional from the divided difference on ``t`` and its ``kappa`` nearest centers.

    ``lead`` holds the weight ``a(t) = 1 / prod_j (t - xi_j)`` of ``phi(x - t)`` in the
    divided difference; ``A(t, xi_j) = -w_j / a(t)``.  When ``t`` is a center the
    trivial self-scheme (``A = 1`` at ``t``, ``h = 0``, ``E = 0``) is returned.
    """
    return _dd_batch(cs, np.array([[float(t)]]), kappa)[0]


def divided_difference_schemes(cs: CenterSet, T, kappa: int) -> FunctionalBatch:
    """Vectorised :func:`divided_difference_scheme`."""
    return _dd_batch(cs, np.asarray(T, dtype=float), kappa)


def bspline_values(knots: np.ndarray, x: np.ndarray) -> np.ndarray:
    """B-spline ``N`` of order ``len(knots) - 1`` on sorted knots (Cox-de Boor, partition of unity)."""
    s = np.asarray(knots, dtype=float)
    x = np.asarray(x, dtype=float)
    k = s.size - 1
    N = [((x >= s[i]) & (x < s[i + 1])).astype(float) for i in range(k)]
    for order in range(2, k + 1):
        nxt = []
        for i in range(k - order + 1):
            left_den = s[i + order - 1] - s[i]
            right_den = s[i + order] - s[i + 1]
            term = 0.0
            if left_den > 0:
                term = term + (x - s[i]) / left_den * N[i]
            if right_den > 0:
                term = term + (s[i + order] - x) / right_den * N[i + 1]
            nxt.append(np.asarray(term, dtype=float) * np.ones_like(x))
        N = nxt
    return N[0]


def bspline_of_scheme(lam: ReproducingFunctional, x) -> np.ndarray:
    """``M(x) = [t, xi_1, ..., xi_kappa] (x - .)_+^(kappa-1)`` for a divided-difference scheme."""
    x = np.asarray(x, dtype=float)
    if lam.trivial:
        return np.zeros_like(x)
    s = np.sort(np.concatenate([lam.t.ravel(), lam.support.ravel()]))
    kappa = s.size - 1
    return bspline_values(s, x) / (s[-1] - s[0])


# ---------------------------------------------------------------------------
# error kernel


def _xi_shape(phi, x):
    pts = as_points(x, phi.d)
    return pts, pts.shape[:-1]


def error_kernel_eval(lam: ReproducingFunctional, phi: BasisFunction, x, precise: bool = False):
    """``E(x, t) = phi(x - t) - sum_xi A(t, xi) phi(x - xi)``.

    Divided-difference schemes are evaluated through their B-spline, which is exact
    outside the knot hull.  Reproduction functionals are evaluated in coordinates
    scaled by the selection radius; ``precise`` switches to extended precision with
    refined coefficients, for far-field samples where the cancellation is severe.
    """
    pts, shape = _xi_shape(phi, x)
    if lam.trivial:
        return np.zeros(shape)
    if lam.kind == "divided-difference" and phi.kind == TRUNCATED_POWER:
        kappa = lam.support.shape[0]
        if kappa != phi.kappa:
            raise ValueError("scheme order and basis order differ")
        M = bspline_of_scheme(lam, pts[..., 0])
        return phi.c * (-1) ** kappa * M / lam.lead
    return _generic_error(lam.t, lam.support, lam.coeffs, lam.scale, lam.n, phi, pts, precise)


def _refine(t, support, coeffs, scale, n, iters: int = 2):
    ld = np.longdouble
    U = (support.astype(ld) - t.astype(ld)) / ld(scale)
    B = vandermonde(U, n).T
    A = coeffs.astype(ld)
    e0 = np.zeros(B.shape[0], dtype=ld)
    e0[0] = 1
    for _ in range(iters):
        r = e0 - B @ A
        dA = np.linalg.lstsq(B.astype(float), r.astype(float), rcond=None)[0]
        A = A + dA.astype(ld)
    return A


def _generic_error(t, support, coeffs, scale, n, phi, pts, precise):
    if precise:
        dt = np.longdouble
        A = _refine(t, support, coeffs, scale, n) if n > 0 else coeffs.astype(dt)
    else:
        dt = float
        A = coeffs
    s = dt(scale)
    U = (pts.astype(dt) - t.astype(dt)) / s
    Z = (support.astype(dt) - t.astype(dt)) / s
    diff = U[..., None, :] - Z
    r0 = np.sqrt(np.sum(U * U, axis=-1))
    rz = np.sqrt(np.sum(diff * diff, axis=-1))
    p = phi.degree
    c = dt(phi.c)
    if phi.kind == TRUNCATED_POWER:
        base = phi_eval_tp(phi, U[..., 0], dt) - phi_eval_tp(phi, diff[..., 0], dt) @ A
        return np.asarray(s ** (phi.kappa - 1) * base, dtype=float)
    if phi.log_branch:
        lg = lambda r: np.where(r > 0, r**p * np.log(np.where(r > 0, r, 1)), 0)
        base = lg(r0) - lg(rz) @ A
        corr = r0**p - (rz**p) @ A
        val = s**p * c * (base + np.log(s) * corr)
    else:
        val = s**p * c * (r0**p - (rz**p) @ A)
    return np.asarray(val, dtype=float)


def phi_eval_tp(phi, u, dt=float):
    if phi.kappa == 1:
        return (u >= 0).astype(dt)
    return np.maximum(u, 0) ** (phi.kappa - 1)


def error_kernel_batch(batch: FunctionalBatch, phi: BasisFunction, X, chunk: int = 512):
    """``E(x_j, t_i)`` for every anchor of ``batch`` and every point ``x_j`` -> shape ``(M, X)``."""
    X = as_points(X, phi.d).reshape(-1, phi.d)
    out = np.empty((len(batch), X.shape[0]))
    for i0 in range(0, len(batch), chunk):
        sl = slice(i0, i0 + chunk)
        out[sl] = _error_rows(batch, phi, X, sl)
    return out


def _error_rows(batch, phi, X, sl):
    t = batch.t[sl]
    if batch.kind == "divided-difference" and phi.kind == TRUNCATED_POWER:
        res = np.zeros((t.shape[0], X.shape[0]))
        for j, i in enumerate(range(*sl.indices(len(batch)))):
            lam = batch[i]
            if not lam.trivial:
                res[j] = error_kernel_eval(lam, phi, X)
        return res
    s = batch.scale[sl][:, None]
    Z = (batch.support_points[sl] - t[:, None, :]) / s[..., None]
    U = (X[None, :, :] - t[:, None, :]) / s[..., None]
    r0 = np.sqrt(np.sum(U * U, axis=-1))
    diff = U[:, :, None, :] - Z[:, None, :, :]
    rz = np.sqrt(np.sum(diff * diff, axis=-1))
    A = batch.coeffs[sl]
    p = phi.degree
    if phi.log_branch:
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = lambda r: np.where(r > 0, r**p * np.log(np.where(r > 0, r, 1.0)), 0.0)
            base = lg(r0) - np.einsum("mxk,mk->mx", lg(rz), A)
        corr = r0**p - np.einsum("mxk,mk->mx", rz**p, A)
        return phi.c * s**p * (base + np.log(s) * corr)
    return phi.c * s**p * (r0**p - np.einsum("mxk,mk->mx", rz**p, A))


# ---------------------------------------------------------------------------
# density from functionals


def functionals_for(cs: CenterSet, phi: BasisFunction, cfg: ReproductionConfig | None, T):
    """Divided differences for truncated powers, least-norm reproduction otherwise."""
    if phi.kind == TRUNCATED_POWER:
        return divided_difference_schemes(cs, T, phi.kappa)
    if cfg is None:
        raise ValueError("surface splines need a ReproductionConfig")
    return build_functionals(cs, T, cfg)


def density_field(cs: CenterSet, phi: BasisFunction, cfg: ReproductionConfig | None, grid: Grid,
                  h_min: float | None = None) -> DensityField:
    """Density ``h`` on ``grid`` realised by the functionals built at each node."""
    batch = functionals_for(cs, phi, cfg, grid.nodes())
    return density_from_schemes(list(batch), grid, h_min)


# ---------------------------------------------------------------------------
# A4 certificate


@dataclass(frozen=True)
class SamplingSpec:
    """Anchors and offsets at which ``E`` is sampled.

    Offsets are ``|x - t| / h(t)`` in ``[0, ratio_max]``: zero plus ``n_ratios``
    log-spaced values from ``ratio_min``; in ``d > 1`` each ratio is taken along
    ``n_dirs`` directions (in 1D both signs).
    """

    n_anchors: int = 20
    ratio_max: float = 100.0
    n_ratios: int = 48
    n_dirs: int = 8
    ratio_min: float = 1e-2
    seed: int = 0
    lo: Optional[tuple] = None
    hi: Optional[tuple] = None

    def refined(self) -> "SamplingSpec":
        return SamplingSpec(self.n_anchors, self.ratio_max, 2 * self.n_ratios, 2 * self.n_dirs,
                            self.ratio_min, self.seed, self.lo, self.hi)

    def anchors(self, cs: CenterSet) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        lo, hi = cs.bounds
        if self.lo is None:
            span = hi - lo
            lo, hi = lo + 0.25 * span, hi - 0.25 * span
        else:
            lo = np.broadcast_to(np.asarray(self.lo, float), (cs.d,))
            hi = np.broadcast_to(np.asarray(self.hi, float), (cs.d,))
        return rng.uniform(lo, hi, size=(self.n_anchors, cs.d))

    def offsets(self, d: int) -> np.ndarray:
        ratios = np.concatenate([[0.0], np.geomspace(self.ratio_min, self.ratio_max, self.n_ratios)])
        if d == 1:
            dirs = np.array([[1.0], [-1.0]])
        elif d == 2:
            ang = np.pi * (np.arange(self.n_dirs) + 0.5) * 2 / self.n_dirs
            dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        else:
            rng = np.random.default_rng(self.seed + 1)
            dirs = rng.normal(size=(self.n_dirs, d))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        return (ratios[:, None, None] * dirs[None]).reshape(-1, d)


@dataclass
class A4Certificate:
    c_meas: float
    c_refined: float
    nu: float
    worst_x: list
    worst_t: list
    max_norm: float
    passed: bool
    message: str = ""

    @property
    def variation(self) -> float:
        if self.c_refined == 0 and self.c_meas == 0:
            return 0.0
        return abs(self.c_refined - self.c_meas) / max(self.c_refined, self.c_meas)

    def to_dict(self) -> dict:
        return {"c_meas": self.c_meas, "c_refined": self.c_refined, "variation": self.variation,
                "nu": self.nu, "worst_x": self.worst_x, "worst_t": self.worst_t,
                "max_norm": self.max_norm, "passed": self.passed, "message": self.message}


def _a4_sup(cs, phi, cfg, nu, sampling: SamplingSpec):
    anchors = sampling.anchors(cs)
    batch = functionals_for(cs, phi, cfg, anchors)
    offs = sampling.offsets(cs.d)
    best = (0.0, None, None)
    for lam in batch:
        if lam.trivial:
            continue
        h = lam.h
        X = lam.t + h * offs
        E = error_kernel_eval(lam, phi, X, precise=True)
        ratio = np.linalg.norm(X - lam.t, axis=1) / h
        val = np.abs(E) * h ** (phi.d - phi.kappa) * (1 + ratio) ** nu
        if not np.all(np.isfinite(val)):
            j = int(np.flatnonzero(~np.isfinite(val))[0])
            return np.inf, X[j].tolist(), lam.t.tolist(), batch
        j = int(np.argmax(val))
        if val[j] > best[0]:
            best = (float(val[j]), X[j].tolist(), lam.t.tolist())
    return best[0], best[1], best[2], batch


def a4_certificate(cs: CenterSet, phi: BasisFunction, cfg: ReproductionConfig | None,
                   sampling: SamplingSpec | None = None, nu: float | None = None,
                   tolerance: float = 0.2) -> A4Certificate:
    """Measure ``sup |E(x,t)| h(t)^(d-kappa) (1 + |x-t|/h(t))^nu`` over sampled pairs.

    Passes when the supremum is finite and changes by less than ``tolerance``
    (relative) when the sampling is refined.
    """
    sampling = SamplingSpec() if sampling is None else sampling
    if sampling.ratio_max < 100:
        raise ValueError("sampling must reach |x - t| / h(t) >= 100")
    if nu is None:
        nu = cfg.nu if (cfg is not None and cfg.nu is not None) else 2.0
    c0, wx, wt, batch = _a4_sup(cs, phi, cfg, nu, sampling)
    c1, wx1, wt1, _ = _a4_sup(cs, phi, cfg, nu, sampling.refined())
    max_norm = float(batch.norms.max(initial=0.0))
    if not (np.isfinite(c0) and np.isfinite(c1)):
        bad_x, bad_t = (wx, wt) if not np.isfinite(c0) else (wx1, wt1)
        return A4Certificate(c0, c1, nu, bad_x, bad_t, max_norm, False,
                             f"kernel blow-up at x = {bad_x}, t = {bad_t}")
    cert = A4Certificate(c0, c1, nu, wx1 if c1 >= c0 else wx, wt1 if c1 >= c0 else wt,
                         max_norm, True)
    if cert.variation >= tolerance:
        cert.passed = False
        cert.message = f"constant moved by {cert.variation:.1%} under refinement"
    return cert
