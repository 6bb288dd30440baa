"""Compactly supported orthonormal wavelets on R^d: transforms, maximal functions, norms.

Conventions
-----------
The low-pass filter ``h`` (length ``L = 2N``, sum ``sqrt(2)``) defines

    phi(x) = sqrt(2) sum_n h_n phi(2x - n),   psi(x) = sqrt(2) sum_n g_n phi(2x - n),
    g_n = (-1)^n h_{L-1-n},

so both ``phi`` and ``psi`` live on ``[0, L-1]``.  In ``d`` dimensions the type
``e`` in ``1 .. 2^d - 1`` selects ``psi`` along axis ``i`` when bit ``i`` is set and
``phi`` otherwise; type ``0`` marks the coarse scaling terms.

Coefficients are stored sup-normalised: ``f = sum_v f_v psi_v`` with
``psi_v(x) = psi_e(2^j x - k)``, i.e. ``f_v = 2^(j d / 2) <f, w_v>`` for the
L2-normalised ``w_v``.  The cube of ``v`` is ``I_v = 2^-j (k + [0,1]^d)`` and the
support cube ``Ibar_v = 2^-j (k + [0, A0]^d)`` with ``A0 = L - 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Optional

import numpy as np
import pywt

from .basis import BasisFunction, SURFACE_SPLINE, TRUNCATED_POWER
from .centers import DensityField

# Daubechies orders chosen so that psi is kappa times differentiable
DEFAULT_FAMILY = {1: "db4", 2: "db7", 3: "db12", 4: "db16"}


# ---------------------------------------------------------------------------
# filters and the cascade algorithm


@lru_cache(maxsize=16)
def lowpass(family: str) -> np.ndarray:
    h = np.array(pywt.Wavelet(family).rec_lo, dtype=float)
    h.setflags(write=False)
    return h


def highpass(h: np.ndarray) -> np.ndarray:
    L = h.size
    return np.array([(-1) ** n * h[L - 1 - n] for n in range(L)])


@lru_cache(maxsize=64)
def _integer_values(family: str, r: int) -> np.ndarray:
    """``phi^(r)(k)`` for ``k = 0 .. L-1`` from the refinement eigenproblem."""
    h = lowpass(family)
    L = h.size
    A = np.zeros((L, L))
    for k in range(L):
        for l in range(L):
            n = 2 * k - l
            if 0 <= n < L:
                A[k, l] = math.sqrt(2) * h[n]
    w, V = np.linalg.eig(A)
    target = 2.0 ** (-r)
    i = int(np.argmin(np.abs(w - target)))
    if abs(w[i] - target) > 1e-6:
        raise ValueError(f"{family} has no refinable {r}-th derivative")
    v = np.real(V[:, i])
    k = np.arange(L, dtype=float)
    norm = np.sum((-k) ** r * v)
    return v * math.factorial(r) / norm


@lru_cache(maxsize=64)
def cascade(family: str, r: int, R: int, wavelet: bool = False) -> np.ndarray:
    """Values of ``phi^(r)`` (or ``psi^(r)``) at ``m 2^-R`` for ``m = 0 .. (L-1) 2^R``."""
    h = lowpass(family)
    L = h.size
    fac = math.sqrt(2) * 2.0**r
    levels = R - 1 if wavelet else R
    T = _integer_values(family, r)
    for i in range(max(levels, 0)):
        nxt = np.zeros((L - 1) * 2 ** (i + 1) + 1)
        step = 2**i
        for n in range(L):
            nxt[n * step:n * step + T.size] += fac * h[n] * T
        T = nxt
    if not wavelet:
        T.setflags(write=False)
        return T
    g = highpass(h)
    if R == 0:
        raise ValueError("wavelet tables need R >= 1")
    out = np.zeros((L - 1) * 2**R + 1)
    step = 2 ** (R - 1)
    for n in range(L):
        out[n * step:n * step + T.size] += fac * g[n] * T
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# system and indices


@dataclass(frozen=True)
class WaveletIndex:
    j: int
    k: tuple
    e: int

    @property
    def length(self) -> float:
        return 2.0 ** (-self.j)

    def volume(self, d: int) -> float:
        return self.length**d

    def cube(self):
        lo = np.asarray(self.k, float) * self.length
        return lo, lo + self.length

    def support_cube(self, A0: int):
        lo = np.asarray(self.k, float) * self.length
        return lo, lo + A0 * self.length


@dataclass(frozen=True)
class WaveletSystem:
    """Daubechies family ``family`` in dimension ``d`` with coarsest level ``j0``."""

    family: str
    d: int = 1
    j0: int = 0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("wavelet systems are provided for d = 1 and d = 2")
        lowpass(self.family)

    @classmethod
    def for_basis(cls, phi: BasisFunction, j0: int = 0, family: str | None = None) -> "WaveletSystem":
        if family is None:
            if phi.kappa not in DEFAULT_FAMILY:
                raise ValueError(f"no default family for kappa = {phi.kappa}")
            family = DEFAULT_FAMILY[phi.kappa]
        return cls(family, phi.d, j0)

    @property
    def h(self) -> np.ndarray:
        return lowpass(self.family)

    @property
    def g(self) -> np.ndarray:
        return highpass(self.h)

    @property
    def length(self) -> int:
        return self.h.size

    @property
    def vanishing_moments(self) -> int:
        return self.length // 2

    @property
    def A0(self) -> int:
        return self.length - 1

    @property
    def types(self) -> tuple:
        return tuple(range(1, 2**self.d))

    def check_order(self, kappa: int):
        if self.vanishing_moments < kappa:
            raise ValueError(f"{self.family} has fewer than kappa = {kappa} vanishing moments")

    def describe(self) -> dict:
        return {"family": self.family, "d": self.d, "j0": self.j0, "A0": self.A0,
                "vanishing_moments": self.vanishing_moments}

    # -- pointwise values -------------------------------------------------

    def factor_table(self, wavelet: bool, r: int, R: int) -> np.ndarray:
        return cascade(self.family, r, R, wavelet)

    def values(self, j: int, k, e: int, x, R: int = 10, r=0) -> np.ndarray:
        """``D^r psi_v(x)`` (type ``e``; ``e = 0`` is the scaling function) by table lookup.

        ``r`` is an int or a per-axis tuple of derivative orders.  Points off the
        ``2^-(j+R)`` lattice are linearly interpolated.
        """
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        k = np.broadcast_to(np.asarray(k, dtype=float), (self.d,))
        rr = (r,) * self.d if np.isscalar(r) else tuple(r)
        out = np.ones(x.shape[:-1])
        for i in range(self.d):
            tab = self.factor_table(bool((e >> i) & 1), rr[i], R)
            y = (2.0**j * x[..., i] - k[i]) * 2**R
            out = out * np.interp(y, np.arange(tab.size), tab, left=0.0, right=0.0)
            out = out * 2.0 ** (j * rr[i])
        return out


# ---------------------------------------------------------------------------
# bands: arrays on Z^d with an integer offset


@dataclass
class Band:
    offset: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.offset = np.asarray(self.offset, dtype=int).reshape(-1)
        self.values = np.asarray(self.values, dtype=float)

    @property
    def d(self) -> int:
        return self.offset.size

    def indices(self) -> np.ndarray:
        axes = [self.offset[i] + np.arange(self.values.shape[i]) for i in range(self.d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def copy(self) -> "Band":
        return Band(self.offset.copy(), self.values.copy())

    def get(self, k) -> float:
        idx = tuple(np.asarray(k, dtype=int) - self.offset)
        if any(i < 0 or i >= n for i, n in zip(idx, self.values.shape)):
            return 0.0
        return float(self.values[idx])


def _band_add(a: Band, b: Band) -> Band:
    lo = np.minimum(a.offset, b.offset)
    hi = np.maximum(a.offset + a.values.shape, b.offset + b.values.shape)
    out = np.zeros(tuple(hi - lo))
    for band in (a, b):
        sl = tuple(slice(o - l, o - l + n) for o, l, n in zip(band.offset, lo, band.values.shape))
        out[sl] += band.values
    return Band(lo, out)


def _analyze_axis(x: np.ndarray, off: int, filt: np.ndarray, axis: int):
    """``y_k = sum_n filt_n x_{2k+n}`` along ``axis``; returns (offset, array)."""
    L = filt.size
    n_in = x.shape[axis]
    k_lo = -((L - 1 - off) // 2)  # ceil((off - L + 1) / 2)
    k_hi = (off + n_in - 1) // 2
    n_out = k_hi - k_lo + 1
    pad_lo = off - 2 * k_lo
    total = 2 * (n_out - 1) + L
    xs = np.moveaxis(x, axis, 0)
    padded = np.zeros((total,) + xs.shape[1:])
    padded[pad_lo:pad_lo + n_in] = xs
    y = np.zeros((n_out,) + xs.shape[1:])
    for n in range(L):
        y += filt[n] * padded[n:n + 2 * n_out - 1:2]
    return k_lo, np.moveaxis(y, 0, axis)


def _synthesize_axis(c: np.ndarray, off: int, filt: np.ndarray, axis: int):
    """``y_m = sum_k filt_(m-2k) c_k`` along ``axis``; returns (offset, array)."""
    L = filt.size
    cs = np.moveaxis(c, axis, 0)
    n_in = cs.shape[0]
    n_out = 2 * (n_in - 1) + L
    y = np.zeros((n_out,) + cs.shape[1:])
    for n in range(L):
        y[n:n + 2 * n_in - 1:2] += filt[n] * cs
    return 2 * off, np.moveaxis(y, 0, axis)


def _split(band: Band, sys: WaveletSystem):
    """One analysis step: returns ``{type: Band}`` with type 0 the low-pass part."""
    parts = {0: band}
    for axis in range(band.d):
        nxt = {}
        for e, b in parts.items():
            for bit, filt in ((0, sys.h), (1, sys.g)):
                off, arr = _analyze_axis(b.values, int(b.offset[axis]), filt, axis)
                o = b.offset.copy()
                o[axis] = off
                nxt[e | (bit << axis)] = Band(o, arr)
        parts = nxt
    return parts


def _merge(parts: dict, sys: WaveletSystem) -> Band:
    """Inverse of :func:`_split`."""
    d = sys.d
    cur = dict(parts)
    for axis in range(d - 1, -1, -1):
        nxt = {}
        for e in range(2**axis):
            acc = None
            for bit, filt in ((0, sys.h), (1, sys.g)):
                key = e | (bit << axis)
                if key not in cur:
                    continue
                b = cur[key]
                off, arr = _synthesize_axis(b.values, int(b.offset[axis]), filt, axis)
                o = b.offset.copy()
                o[axis] = off
                nb = Band(o, arr)
                acc = nb if acc is None else _band_add(acc, nb)
            if acc is not None:
                nxt[e] = acc
        cur = nxt
    return cur[0]


# ---------------------------------------------------------------------------
# samples and expansions


@dataclass
class DyadicSamples:
    """Values at ``2^-J (offset + m)``, ``m`` ranging over ``values.shape``."""

    J: int
    offset: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.offset = np.asarray(self.offset, dtype=int).reshape(-1)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != self.offset.size:
            raise ValueError("sample array rank must equal the dimension")

    @property
    def d(self) -> int:
        return self.offset.size

    def points(self) -> np.ndarray:
        return Band(self.offset, self.values).indices() * 2.0 ** (-self.J)

    @classmethod
    def from_function(cls, f, J: int, lo, hi, d: int = 1) -> "DyadicSamples":
        """Sample ``f`` on the level-``J`` lattice covering ``[lo, hi]^d``."""
        lo = np.broadcast_to(np.asarray(lo, float), (d,))
        hi = np.broadcast_to(np.asarray(hi, float), (d,))
        m0 = np.floor(lo * 2**J).astype(int)
        m1 = np.ceil(hi * 2**J).astype(int)
        shape = tuple(m1 - m0 + 1)
        pts = Band(m0, np.zeros(shape)).indices() * 2.0 ** (-J)
        vals = np.asarray(f(pts if d > 1 else pts), dtype=float).reshape(shape)
        return cls(J, m0, vals)

    @classmethod
    def from_points(cls, x, values) -> "DyadicSamples":
        """Validate a univariate grid ``x`` as a dyadic lattice and wrap it."""
        x = np.asarray(x, dtype=float).ravel()
        if x.size < 2:
            raise ValueError("need at least two samples")
        step = x[1] - x[0]
        J = -math.log2(step) if step > 0 else math.nan
        if not (np.isfinite(J) and abs(J - round(J)) < 1e-12):
            raise ValueError(f"sample spacing {step} is not a power of two")
        J = int(round(J))
        m = x * 2**J
        if not (np.allclose(m, np.round(m), atol=1e-9) and np.allclose(np.diff(m), 1, atol=1e-9)):
            raise ValueError("samples are not on a dyadic lattice")
        return cls(J, [int(round(m[0]))], np.asarray(values, dtype=float).ravel())


PREFILTERS = ("none", "quadrature")


@dataclass
class WaveletExpansion:
    """Sup-normalised coefficients: coarse scaling terms at ``j0`` and details ``j0 <= j < J``."""

    system: WaveletSystem
    J: int
    coarse: Band
    details: dict
    prefilter: str = "none"

    @property
    def j0(self) -> int:
        return self.system.j0

    @property
    def d(self) -> int:
        return self.system.d

    def copy(self) -> "WaveletExpansion":
        return WaveletExpansion(self.system, self.J, self.coarse.copy(),
                                {key: b.copy() for key, b in self.details.items()}, self.prefilter)

    @classmethod
    def zeros(cls, system: WaveletSystem, J: int, prefilter: str = "none") -> "WaveletExpansion":
        z = Band(np.zeros(system.d, int), np.zeros((0,) * system.d))
        return cls(system, J, z, {}, prefilter)

    @classmethod
    def single(cls, system: WaveletSystem, J: int, j: int, k, e: int, value: float = 1.0,
               prefilter: str = "none") -> "WaveletExpansion":
        """Expansion with the one coefficient ``f_v = value``."""
        if not system.j0 <= j < J:
            raise ValueError("level outside [j0, J)")
        exp = cls.zeros(system, J, prefilter)
        band = Band(np.broadcast_to(np.asarray(k, int), (system.d,)), np.full((1,) * system.d, value))
        if e == 0:
            if j != system.j0:
                raise ValueError("scaling terms live on the coarsest level")
            exp.coarse = band
        else:
            exp.details[(j, e)] = band
        return exp

    # -- flat views -------------------------------------------------------

    def flat(self, include_coarse: bool = True, nonzero: bool = True):
        """Arrays ``(j, k, e, value)`` listing the coefficients."""
        js, ks, es, vs = [], [], [], []
        bands = []
        if include_coarse and self.coarse.values.size:
            bands.append((self.j0, 0, self.coarse))
        for (j, e), b in sorted(self.details.items()):
            bands.append((j, e, b))
        for j, e, b in bands:
            idx = b.indices()
            val = b.values.ravel()
            keep = val != 0 if nonzero else np.ones(val.size, bool)
            js.append(np.full(int(keep.sum()), j))
            es.append(np.full(int(keep.sum()), e))
            ks.append(idx[keep])
            vs.append(val[keep])
        if not js:
            return (np.zeros(0, int), np.zeros((0, self.d), int), np.zeros(0, int), np.zeros(0))
        return np.concatenate(js), np.concatenate(ks), np.concatenate(es), np.concatenate(vs)

    def items(self, include_coarse: bool = True):
        j, k, e, v = self.flat(include_coarse)
        for a, b, c, w in zip(j, k, e, v):
            yield WaveletIndex(int(a), tuple(int(t) for t in b), int(c)), float(w)

    def coefficient(self, j: int, k, e: int) -> float:
        if e == 0:
            return self.coarse.get(k) if j == self.j0 else 0.0
        b = self.details.get((j, e))
        return 0.0 if b is None else b.get(k)

    @classmethod
    def from_flat(cls, system, J, j, k, e, v, prefilter="none") -> "WaveletExpansion":
        exp = cls.zeros(system, J, prefilter)
        j = np.asarray(j, int)
        e = np.asarray(e, int)
        k = np.asarray(k, int).reshape(-1, system.d)
        v = np.asarray(v, float)
        for key in sorted(set(zip(j.tolist(), e.tolist()))):
            sel = (j == key[0]) & (e == key[1])
            kk = k[sel]
            lo = kk.min(axis=0)
            arr = np.zeros(tuple(kk.max(axis=0) - lo + 1))
            arr[tuple((kk - lo).T)] = v[sel]
            band = Band(lo, arr)
            if key[1] == 0:
                if key[0] != system.j0:
                    raise ValueError("scaling terms live on the coarsest level")
                exp.coarse = band
            else:
                exp.details[key] = band
        return exp

    def masked(self, keep_fn) -> "WaveletExpansion":
        """Copy keeping coefficients where ``keep_fn(j, k, e)`` (vectorised) is true."""
        j, k, e, v = self.flat(nonzero=False)
        keep = np.asarray(keep_fn(j, k, e), dtype=bool)
        return WaveletExpansion.from_flat(self.system, self.J, j[keep], k[keep], e[keep],
                                          v[keep], self.prefilter)

    def to_dict(self) -> dict:
        j, k, e, v = self.flat(include_coarse=False)
        cj, ck, ce, cv = self.flat(include_coarse=True)
        coarse = [{"k": kk.tolist(), "coeff": float(vv)} for jj, kk, ee, vv in zip(cj, ck, ce, cv) if ee == 0]
        detail = [{"j": int(a), "k": b.tolist(), "e": int(c), "coeff": float(w)}
                  for a, b, c, w in zip(j, k, e, v)]
        return {"family": self.system.family, "d": self.d, "j0": self.j0, "J": self.J,
                "prefilter": self.prefilter, "coarse": coarse, "detail": detail}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, rec: dict) -> "WaveletExpansion":
        sys = WaveletSystem(rec["family"], rec.get("d", 1), rec["j0"])
        js = [sys.j0] * len(rec["coarse"]) + [r["j"] for r in rec["detail"]]
        ks = [r["k"] for r in rec["coarse"]] + [r["k"] for r in rec["detail"]]
        es = [0] * len(rec["coarse"]) + [r["e"] for r in rec["detail"]]
        vs = [r["coeff"] for r in rec["coarse"]] + [r["coeff"] for r in rec["detail"]]
        if not vs:
            return cls.zeros(sys, rec["J"], rec.get("prefilter", "none"))
        return cls.from_flat(sys, rec["J"], js, ks, es, vs, rec.get("prefilter", "none"))


def _prefilter_matrix(sys: WaveletSystem) -> np.ndarray:
    """``phi(k)`` at the integers, the quadrature weights of the sampling prefilter."""
    return _integer_values(sys.family, 0)


def _correlate_axes(values: np.ndarray, offset: np.ndarray, w: np.ndarray, reverse: bool):
    """Apply ``y_m = sum_k w_k x_{m+k}`` (or its adjoint ``y_m = sum_k w_k x_{m-k}``) on every axis."""
    out, off = values, offset.copy()
    L = w.size
    for axis in range(values.ndim):
        xs = np.moveaxis(out, axis, 0)
        n = xs.shape[0]
        y = np.zeros((n + L - 1,) + xs.shape[1:])
        for k in range(L):
            if reverse:
                y[k:k + n] += w[k] * xs
            else:
                y[L - 1 - k:L - 1 - k + n] += w[k] * xs
        off[axis] = off[axis] if reverse else off[axis] - (L - 1)
        out = np.moveaxis(y, 0, axis)
    return out, off


def decompose(samples: DyadicSamples, sys: WaveletSystem, prefilter: str = "none") -> WaveletExpansion:
    """Inhomogeneous wavelet expansion of sampled data down to ``sys.j0``.

    Parameters
    ----------
    prefilter : {"none", "quadrature"}
        ``"none"`` takes ``<f, w_{J,m}> = 2^(-J d/2) f(2^-J m)`` (exactly invertible by
        :func:`reconstruct`); ``"quadrature"`` integrates ``f`` against ``phi_{J,m}``
        with the weights ``phi(k)``, exact for polynomials of degree below the number
        of vanishing moments.
    """
    if not isinstance(samples, DyadicSamples):
        raise ValueError("decompose needs samples on a dyadic grid (DyadicSamples)")
    if prefilter not in PREFILTERS:
        raise ValueError(f"unknown prefilter {prefilter!r}")
    if samples.d != sys.d:
        raise ValueError("sample dimension differs from the wavelet system")
    J = samples.J
    if J <= sys.j0:
        raise ValueError("finest level J must exceed the coarsest level j0")
    scale = 2.0 ** (-J * sys.d / 2)
    if prefilter == "none":
        band = Band(samples.offset, scale * samples.values)
    else:
        vals, off = _correlate_axes(samples.values, samples.offset, _prefilter_matrix(sys), False)
        band = Band(off, scale * vals)
    details = {}
    for j in range(J - 1, sys.j0 - 1, -1):
        parts = _split(band, sys)
        norm = 2.0 ** (j * sys.d / 2)
        for e in sys.types:
            b = parts[e]
            details[(j, e)] = Band(b.offset, norm * b.values)
        band = parts[0]
    coarse = Band(band.offset, 2.0 ** (sys.j0 * sys.d / 2) * band.values)
    return WaveletExpansion(sys, J, coarse, details, prefilter)


def reconstruct(exp: WaveletExpansion, sys: WaveletSystem | None = None) -> DyadicSamples:
    """Inverse of :func:`decompose`, returning values on the level-``J`` lattice.

    For the ``"none"`` prefilter this is the exact inverse; for ``"quadrature"`` the
    result is the point values of the level-``J`` projection.
    """
    sys = exp.system if sys is None else sys
    d = sys.d
    band = Band(exp.coarse.offset, 2.0 ** (-sys.j0 * d / 2) * exp.coarse.values) \
        if exp.coarse.values.size else None
    for j in range(sys.j0, exp.J):
        parts = {}
        parts[0] = band if band is not None else Band(np.zeros(d, int), np.zeros((1,) * d))
        for e in sys.types:
            b = exp.details.get((j, e))
            if b is not None and b.values.size:
                parts[e] = Band(b.offset, 2.0 ** (-j * d / 2) * b.values)
        band = _merge(parts, sys)
    if band is None:
        return DyadicSamples(exp.J, np.zeros(d, int), np.zeros((1,) * d))
    scale = 2.0 ** (exp.J * d / 2)
    if exp.prefilter == "none":
        return DyadicSamples(exp.J, band.offset, scale * band.values)
    phi_int = _prefilter_matrix(sys)
    vals, off = _correlate_axes(band.values, band.offset, phi_int, True)
    return DyadicSamples(exp.J, off, scale * vals)


def synthesize(exp: WaveletExpansion, x, R: int = 10) -> np.ndarray:
    """Evaluate ``sum_v f_v psi_v(x)`` pointwise from cascade tables."""
    x = np.asarray(x, dtype=float)
    pts = x[..., None] if (exp.d == 1 and (x.ndim == 0 or x.shape[-1] != 1)) else x
    out = np.zeros(pts.shape[:-1])
    for v, c in exp.items():
        lo, hi = v.support_cube(exp.system.A0)
        inside = np.all((pts >= lo) & (pts <= hi), axis=-1)
        if np.any(inside):
            out[inside] += c * exp.system.values(v.j, v.k, v.e, pts[inside], R=R)
    return out


# ---------------------------------------------------------------------------
# maximal functions and smoothness norms


def _window_reduce(arr: np.ndarray, width: int, reducer: str) -> np.ndarray:
    """Separable sliding sum or max over the ``width`` entries ending at each index.

    The output has ``n + width - 1`` entries per axis; entry ``i`` reduces input
    entries ``i - width + 1 .. i``.
    """
    out = arr
    for axis in range(arr.ndim):
        xs = np.moveaxis(out, axis, 0)
        n = xs.shape[0]
        padded = np.zeros((n + 2 * (width - 1),) + xs.shape[1:])
        padded[width - 1:width - 1 + n] = xs
        res = np.zeros((n + width - 1,) + xs.shape[1:])
        for t in range(width):
            win = padded[t:t + n + width - 1]
            res = res + win if reducer == "sum" else np.maximum(res, win)
        out = np.moveaxis(res, 0, axis)
    return out


def _terms(exp: WaveletExpansion, s: float, include_coarse: bool):
    """Per-band weighted magnitudes ``l(v)^-s |f_v|`` as (level, offset, array)."""
    bands = []
    if include_coarse and exp.coarse.values.size:
        bands.append((exp.j0, exp.coarse))
    for (j, e), b in exp.details.items():
        bands.append((j, b))
    return [(j, b.offset, 2.0 ** (j * s) * np.abs(b.values)) for j, b in bands]


def maximal_function(exp: WaveletExpansion, s: float, q: float, x,
                     include_coarse: bool = True) -> np.ndarray:
    """``M_{s,q} f(x) = (sum_{x in Ibar_v} l(v)^(-q s) |f_v|^q)^(1/q)``; ``q = inf`` takes the sup."""
    if not s > 0:
        raise ValueError("smoothness s must be positive")
    if not q > 0:
        raise ValueError("q must be positive")
    x = np.asarray(x, dtype=float)
    pts = x[..., None] if (exp.d == 1 and (x.ndim == 0 or x.shape[-1] != 1)) else x
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, exp.d)
    A0 = exp.system.A0
    acc = np.zeros(pts.shape[0])
    for j, off, arr in _terms(exp, s, include_coarse):
        if arr.size == 0:
            continue
        # x in Ibar_v  <=>  k <= 2^j x < k + A0  (half-open convention)
        kx = np.floor(pts * 2.0**j).astype(int)
        vals = arr if np.isinf(q) else arr**q
        win = _window_reduce(vals, A0, "max" if np.isinf(q) else "sum")
        idx = kx - off
        ok = np.all((idx >= 0) & (idx < np.asarray(win.shape)), axis=1)
        got = np.zeros(pts.shape[0])
        got[ok] = win[tuple(idx[ok].T)]
        acc = np.maximum(acc, got) if np.isinf(q) else acc + got
    res = acc if np.isinf(q) else acc ** (1.0 / q)
    return res.reshape(shape)


def evaluation_cells(exp: WaveletExpansion, level: int | None = None):
    """Midpoints and volume of the dyadic cells covering every ``Ibar_v``.

    The maximal function is constant on cells of the finest detail level, so these
    midpoints integrate it exactly.
    """
    j, k, e, v = exp.flat()
    if level is None:
        level = int(j.max()) if j.size else exp.j0
    if j.size == 0:
        return np.zeros((0, exp.d)), 2.0 ** (-level * exp.d)
    A0 = exp.system.A0
    lo = np.min(k * 2.0 ** (-j[:, None]), axis=0)
    hi = np.max((k + A0) * 2.0 ** (-j[:, None]), axis=0)
    n_lo = np.floor(lo * 2**level).astype(int)
    n_hi = np.ceil(hi * 2**level).astype(int)
    axes = [(np.arange(a, b) + 0.5) * 2.0 ** (-level) for a, b in zip(n_lo, n_hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1), 2.0 ** (-level * exp.d)


def tl_norm(exp: WaveletExpansion, s: float, p: float, q: float, grid=None,
            f_samples=None, include_coarse: bool = True):
    """Triebel-Lizorkin seminorm ``||M_{s,q} f||_p`` and norm (seminorm plus ``||f||_p``).

    Parameters
    ----------
    grid : tuple (points, cell), optional
        Quadrature points and cell volume; by default the exact dyadic cell midpoints.
    f_samples : DyadicSamples, optional
        Samples used for ``||f||_p``; defaults to :func:`reconstruct`.
    """
    if not p >= 1 and not p > 0:
        raise ValueError("p must be positive")
    pts, cell = evaluation_cells(exp) if grid is None else grid
    if pts.shape[0] == 0:
        return 0.0, 0.0
    M = maximal_function(exp, s, q, pts, include_coarse)
    semi = float(M.max()) if np.isinf(p) else float((np.sum(M**p) * cell) ** (1 / p))
    fs = reconstruct(exp) if f_samples is None else f_samples
    fv = np.abs(fs.values)
    fcell = 2.0 ** (-fs.J * exp.d)
    fnorm = float(fv.max(initial=0.0)) if np.isinf(p) else float((np.sum(fv**p) * fcell) ** (1 / p))
    return semi, semi + fnorm


# ---------------------------------------------------------------------------
# density split


def density_over_supports(exp: WaveletExpansion, df: DensityField):
    """``h(v) = max of h over Ibar_v`` for every coefficient (flat order of ``exp.flat(nonzero=False)``).

    The maximum runs over density grid nodes inside the closed support cube; a cube
    containing no node takes the nearest-node value at its center.
    """
    j, k, e, v = exp.flat(nonzero=False)
    A0 = exp.system.A0
    nodes = df.grid.nodes()
    hv = np.zeros(j.size)
    for lev in np.unique(j):
        sel = np.flatnonzero(j == lev)
        kk = k[sel]
        lo = kk.min(axis=0)
        shape = tuple(kk.max(axis=0) - lo + 1)
        table = np.zeros(shape)
        y = nodes * 2.0**lev
        kmin = np.ceil(y - A0 - 1e-12).astype(int)
        for shift in product(range(A0 + 2), repeat=exp.d):
            kc = kmin + np.asarray(shift)
            inside = np.all((kc <= y + 1e-12) & (kc >= y - A0 - 1e-12), axis=1)
            idx = kc - lo
            ok = inside & np.all((idx >= 0) & (idx < np.asarray(shape)), axis=1)
            np.maximum.at(table, tuple(idx[ok].T), df.values[ok])
        got = table[tuple((kk - lo).T)]
        empty = got == 0
        if np.any(empty):
            centers = (kk[empty] + 0.5 * A0) * 2.0 ** (-lev)
            got[empty] = df(centers)
        hv[sel] = got
    return hv


def split_by_density(exp: WaveletExpansion, df: DensityField):
    """Partition into ``(plus, minus)``: ``plus`` keeps ``l(v) >= h(v)`` and every coarse term."""
    j, k, e, v = exp.flat(nonzero=False)
    hv = density_over_supports(exp, df)
    plus_mask = (2.0 ** (-j) >= hv) | (e == 0)
    sys, J, pf = exp.system, exp.J, exp.prefilter
    plus = WaveletExpansion.from_flat(sys, J, j[plus_mask], k[plus_mask], e[plus_mask], v[plus_mask], pf)
    mm = ~plus_mask
    minus = WaveletExpansion.from_flat(sys, J, j[mm], k[mm], e[mm], v[mm], pf) if mm.any() \
        else WaveletExpansion.zeros(sys, J, pf)
    return plus, minus


# ---------------------------------------------------------------------------
# operator T applied to wavelets


def T_wavelet_measure(sys: WaveletSystem, phi: BasisFunction, j: int, k, e: int, R: int):
    """Discrete measure approximating ``T psi_v dt`` from finite differences of cascade samples.

    Samples of ``psi_v`` on the lattice of step ``delta = 2^-(j+R)`` are differenced
    (``kappa``-th centred difference in 1D, the squared five-point Laplacian applied
    ``m`` times in 2D).  The measure annihilates polynomials of degree ``< kappa``
    exactly, and ``sum_i w_i phi(x - t_i)`` reproduces the lattice interpolant of
    ``psi_v`` up to ``O(delta^2)``.

    Returns
    -------
    nodes : ndarray, shape (Q, d)
    weights : ndarray, shape (Q,)
    """
    d = sys.d
    tabs = [sys.factor_table(bool((e >> i) & 1), 0, R) for i in range(d)]
    vals = tabs[0]
    for t in tabs[1:]:
        vals = np.multiply.outer(vals, t)
    origin = np.asarray(k, int).reshape(-1) * 2**R
    return lattice_measure(vals, origin, j + R, phi)


def lattice_measure(vals: np.ndarray, origin, level: int, phi: BasisFunction):
    """Finite-difference measure for ``T g dt`` from samples ``g(2^-level (origin + i))``.

    The samples are zero-padded by ``kappa`` on each side.  In 1D the ``kappa``-th
    difference (``2m``-th for surface splines) is attached to the stencil midpoint;
    in 2D the five-point Laplacian is applied ``m`` times.  The weights annihilate
    polynomials of degree ``< kappa`` exactly.
    """
    d = phi.d
    delta = 2.0 ** (-level)
    origin = np.broadcast_to(np.asarray(origin, float), (d,))
    pad = phi.kappa
    vals = np.pad(np.asarray(vals, float), pad)
    if d == 1:
        order = 2 * phi.m if phi.kind == SURFACE_SPLINE else phi.kappa
        w = vals
        for _ in range(order):
            w = np.diff(w)
        w = w / delta ** (order - 1)
        idx = np.arange(w.size) + 0.5 * order - pad
        nodes = ((origin[0] + idx) * delta)[:, None]
        weights = phi.operator_scale * w
    else:
        w = vals
        for _ in range(phi.m):
            lap = np.zeros_like(w)
            lap[1:-1, :] += w[2:, :] + w[:-2, :] - 2 * w[1:-1, :]
            lap[:, 1:-1] += w[:, 2:] + w[:, :-2] - 2 * w[:, 1:-1]
            w = lap / delta**2
        w = w * delta**d
        ii = [np.arange(n) - pad for n in w.shape]
        mesh = np.meshgrid(*ii, indexing="ij")
        nodes = np.stack([(origin[a] + mesh[a].ravel()) * delta for a in range(d)], -1)
        weights = phi.operator_scale * w.ravel()
    keep = weights != 0
    return nodes[keep], weights[keep]


def T_wavelet_sup(sys: WaveletSystem, phi: BasisFunction, j: int, e: int, R: int = 8) -> float:
    """``||T psi_v||_inf`` from the derivative cascade (pointwise derivatives of the refinable tables)."""
    if sys.d == 1:
        tab = sys.factor_table(True, phi.kappa, R)
        return abs(phi.operator_scale) * 2.0 ** (j * phi.kappa) * float(np.max(np.abs(tab)))
    # d = 2: Delta^m of a tensor product, expanded by the binomial formula
    m = phi.m
    total = 0.0
    for a in range(m + 1):
        r0, r1 = 2 * a, 2 * (m - a)
        t0 = sys.factor_table(bool(e & 1), r0, R)
        t1 = sys.factor_table(bool(e & 2), r1, R)
        total = total + math.comb(m, a) * np.multiply.outer(t0, t1)
    return abs(phi.operator_scale) * 2.0 ** (j * phi.kappa) * float(np.max(np.abs(total)))
