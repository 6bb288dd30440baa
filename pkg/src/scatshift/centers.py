"""Center sets, nearest-neighbour queries, sampled densities and their majorants."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree


class CenterFileError(ValueError):
    """Malformed center CSV; the message names the offending row."""


def _lex_order(points: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """Argsort rows by (distance, x0, x1, ...), with distances rounded to absorb roundoff."""
    scale = max(float(np.max(dist, initial=0.0)), 1e-300)
    key = np.round(dist / scale, 12)
    keys = [points[..., i] for i in range(points.shape[-1] - 1, -1, -1)] + [key]
    return np.lexsort(keys, axis=-1)


class CenterSet:
    """Finite set of pairwise distinct centers in ``R^d`` with a k-d tree index.

    Parameters
    ----------
    points : array_like, shape (n, d)
        The centers.  One-dimensional input is read as ``n`` univariate points.
    """

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("center set needs a non-empty (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("centers must be finite")
        uniq = np.unique(pts, axis=0)
        if uniq.shape[0] != pts.shape[0]:
            raise ValueError(f"{pts.shape[0] - uniq.shape[0]} duplicate center(s)")
        pts.setflags(write=False)
        self.points = pts
        self.tree = cKDTree(pts)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def bounds(self):
        return self.points.min(axis=0), self.points.max(axis=0)

    def mean_spacing(self) -> float:
        if len(self) < 2:
            return 1.0
        dist, _ = self.tree.query(self.points, k=2)
        return float(np.mean(dist[:, 1]))

    def k_nearest(self, t, k: int):
        """The ``k`` centers nearest ``t`` in ascending distance, ties broken lexicographically.

        Returns
        -------
        points : ndarray, shape (k, d)
        dist : ndarray, shape (k,)
        index : ndarray, shape (k,)
        """
        t = np.asarray(t, dtype=float).reshape(1, self.d)
        idx, dist = self.k_nearest_batch(t, k)
        return self.points[idx[0]], dist[0], idx[0]

    def k_nearest_batch(self, T, k: int):
        """Vectorised :meth:`k_nearest` for query points ``T`` of shape ``(M, d)``."""
        if not 1 <= k <= len(self):
            raise ValueError(f"k = {k} must lie in [1, {len(self)}]")
        T = np.asarray(T, dtype=float).reshape(-1, self.d)
        out_i = np.empty((T.shape[0], k), dtype=int)
        out_d = np.empty((T.shape[0], k))
        todo = np.arange(T.shape[0])
        extra = 8
        while todo.size:
            kk = min(len(self), k + extra)
            dist, idx = self.tree.query(T[todo], k=kk)
            dist = dist.reshape(todo.size, kk)
            idx = idx.reshape(todo.size, kk)
            order = _lex_order(self.points[idx], dist)
            idx = np.take_along_axis(idx, order, axis=1)
            dist = np.take_along_axis(dist, order, axis=1)
            # a tie straddling the candidate cut-off needs a wider query
            tol = 1e-12 * np.maximum(dist[:, -1], 1e-300)
            ambiguous = (dist[:, -1] - dist[:, k - 1] <= tol) & (kk < len(self))
            done = ~ambiguous
            out_i[todo[done]] = idx[done, :k]
            out_d[todo[done]] = dist[done, :k]
            todo = todo[ambiguous]
            extra *= 4
        return out_i, out_d

    # -- io ---------------------------------------------------------------

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(f"x{i}" for i in range(self.d)) + "\n")
        for p in self.points:
            buf.write(",".join(repr(float(v)) for v in p) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "CenterSet":
        """Read ``x0,x1,...`` CSV from a path or file-like object."""
        if hasattr(source, "read"):
            text = source.read()
        else:
            text = Path(source).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise CenterFileError("empty center file")
        header = [h.strip() for h in rows[0]]
        d = len(header)
        if header != [f"x{i}" for i in range(d)]:
            raise CenterFileError(f"row 1: header must be x0,...,x{d - 1}, got {rows[0]}")
        pts = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != d:
                raise CenterFileError(f"row {lineno}: expected {d} columns, got {len(row)}")
            try:
                pts.append([float(c) for c in row])
            except ValueError:
                raise CenterFileError(f"row {lineno}: non-numeric entry in {row}") from None
        if not pts:
            raise CenterFileError("center file has no data rows")
        try:
            return cls(np.array(pts))
        except ValueError as exc:
            raise CenterFileError(str(exc)) from None

    # -- generators -------------------------------------------------------

    @classmethod
    def uniform(cls, lo, hi, spacing: float, d: int = 1) -> "CenterSet":
        """Lattice ``lo + spacing * k`` filling the box ``[lo, hi]^d``."""
        return cls(lattice(np.full(d, lo, float), np.full(d, hi, float), spacing))

    @classmethod
    def two_density(cls, lo, hi, fine: float, coarse: float, split: float | None = None,
                    d: int = 1) -> "CenterSet":
        """Fine lattice for ``x0 < split``, coarse lattice for ``x0 >= split``."""
        split = 0.5 * (lo + hi) if split is None else split
        lo_v, hi_v = np.full(d, lo, float), np.full(d, hi, float)
        left = lattice(lo_v, np.r_[split, hi_v[1:]], fine)
        right = lattice(np.r_[split, lo_v[1:]], hi_v, coarse)
        left = left[left[:, 0] < split - 1e-12 * fine]
        return cls(np.vstack([left, right]))

    @classmethod
    def random(cls, n: int, lo, hi, seed: int, d: int = 1) -> "CenterSet":
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(lo, hi, size=(n, d)))

    @classmethod
    def jittered(cls, lo, hi, spacing: float, jitter: float, seed: int, d: int = 1) -> "CenterSet":
        """Lattice perturbed by uniform noise of amplitude ``jitter * spacing``."""
        rng = np.random.default_rng(seed)
        pts = lattice(np.full(d, lo, float), np.full(d, hi, float), spacing)
        return cls(pts + rng.uniform(-jitter, jitter, size=pts.shape) * spacing)


def lattice(lo, hi, spacing: float) -> np.ndarray:
    lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
    axes = [a + spacing * np.arange(int(math.floor((b - a) / spacing + 1e-9)) + 1)
            for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


@dataclass(frozen=True)
class Grid:
    """Regular lattice ``lo + spacing * k`` with ``shape[i]`` nodes along axis ``i``."""

    lo: tuple
    spacing: float
    shape: tuple

    @classmethod
    def covering(cls, lo, hi, spacing: float, d: int = 1) -> "Grid":
        lo = np.broadcast_to(np.asarray(lo, float), (d,))
        hi = np.broadcast_to(np.asarray(hi, float), (d,))
        shape = tuple(int(math.floor((b - a) / spacing + 1e-9)) + 1 for a, b in zip(lo, hi))
        return cls(tuple(float(v) for v in lo), float(spacing), shape)

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.lo) + self.spacing * (np.asarray(self.shape) - 1)

    def nodes(self) -> np.ndarray:
        axes = [self.lo[i] + self.spacing * np.arange(self.shape[i]) for i in range(self.d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)

    def nearest_index(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.d)
        k = np.rint((x - np.asarray(self.lo)) / self.spacing).astype(int)
        k = np.clip(k, 0, np.asarray(self.shape) - 1)
        return np.ravel_multi_index(tuple(k.T), self.shape)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.d)
        half = 0.5 * self.spacing
        return np.all((x >= np.asarray(self.lo) - half) & (x <= self.hi + half), axis=-1)


@dataclass(frozen=True)
class DensityField:
    """Values of the local density ``h`` at grid nodes, read by nearest-node lookup."""

    grid: Grid
    values: np.ndarray = field(repr=False)
    h_min: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size != int(np.prod(self.grid.shape)):
            raise ValueError("density values do not match the grid")
        if not (np.all(np.isfinite(v)) and np.all(v > 0)):
            raise ValueError("density values must be positive and finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: Grid, h0: float) -> "DensityField":
        return cls(grid, np.full(int(np.prod(grid.shape)), float(h0)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "DensityField":
        return cls(grid, np.asarray(fn(grid.nodes()), dtype=float))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1] if (self.grid.d > 1 or (x.ndim and x.shape[-1] == 1)) else x.shape
        return self.values[self.grid.nearest_index(x)].reshape(shape)

    def resolution_ok(self) -> bool:
        """Whether the grid spacing is at most half the smallest density value."""
        return self.grid.spacing <= 0.5 * float(self.values.min()) * (1 + 1e-12)

    def to_csv(self, path=None, name: str = "h") -> str:
        return _grid_csv(self.grid, self.values, name, path)


def _grid_csv(grid: Grid, values, name, path=None) -> str:
    nodes = grid.nodes()
    lines = [",".join([f"x{i}" for i in range(grid.d)] + [name])]
    for p, v in zip(nodes, values):
        lines.append(",".join(f"{c:.12g}" for c in (*p, v)))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def density_from_schemes(schemes, grid: Grid, h_min: float | None = None) -> DensityField:
    """Density field from one functional per grid node.

    Parameters
    ----------
    schemes : mapping or sequence
        Either a mapping from node coordinate tuples to functionals, or a sequence
        aligned with ``grid.nodes()``.  Each functional exposes ``support`` (array of
        centers) and ``t``.
    h_min : float, optional
        Floor for the radius; defaults to ``grid.spacing / 4``.
    """
    nodes = grid.nodes()
    h_min = grid.spacing / 4 if h_min is None else float(h_min)
    if h_min <= 0:
        raise ValueError("h_min must be positive")
    if isinstance(schemes, Mapping):
        seq = []
        for p in nodes:
            key = tuple(float(v) for v in p)
            if key not in schemes:
                raise KeyError(f"no functional for grid node {key}")
            seq.append(schemes[key])
    else:
        seq = list(schemes)
        if len(seq) != nodes.shape[0]:
            raise KeyError(f"{nodes.shape[0] - len(seq)} grid node(s) lack a functional")
    vals = np.empty(nodes.shape[0])
    for i, lam in enumerate(seq):
        sup = np.asarray(lam.support, dtype=float).reshape(-1, grid.d)
        t = np.asarray(lam.t, dtype=float).reshape(grid.d)
        vals[i] = np.max(np.linalg.norm(sup - t, axis=1)) if sup.size else 0.0
    return DensityField(grid, np.maximum(vals, h_min), h_min)


def majorant_bound(nu: float, d: int, kappa: int) -> float:
    """Upper limit ``(nu - d) / kappa`` for the majorant exponent."""
    return (nu - d) / kappa


def _majorant_values(df: DensityField, r: float, x: np.ndarray, chunk: int = 2048) -> np.ndarray:
    nodes = df.grid.nodes()
    h = df.values
    out = np.empty(x.shape[0])
    for i0 in range(0, x.shape[0], chunk):
        blk = x[i0:i0 + chunk]
        dist = np.sqrt(((blk[:, None, :] - nodes[None, :, :]) ** 2).sum(-1))
        out[i0:i0 + chunk] = np.max(h * (1 + dist / h) ** (-r), axis=1)
    inside = df.grid.contains(x)
    if np.any(inside):
        out[inside] = np.maximum(out[inside], df(x[inside]))
    return out


def majorant(df: DensityField, r: float, x, bound: float | None = None):
    """Slowly varying majorant ``H(x) = max_t h(t) (1 + |x - t| / h(t))^(-r)``.

    The maximum runs over the grid nodes of ``df`` and the point ``x`` itself
    (``h(x)`` by nearest-node lookup when ``x`` lies on the grid's extent).

    Parameters
    ----------
    bound : float, optional
        Exclusive upper limit ``(nu - d) / kappa``; ``r`` outside ``(0, bound)`` is rejected.
    """
    if not r > 0 or (bound is not None and not r < bound):
        raise ValueError(f"majorant exponent r = {r} outside (0, {bound})")
    x = np.asarray(x, dtype=float)
    d = df.grid.d
    pts = x[..., None] if (d == 1 and (x.ndim == 0 or x.shape[-1] != 1)) else x
    shape = pts.shape[:-1]
    return _majorant_values(df, r, pts.reshape(-1, d)).reshape(shape)


class MajorantField:
    """The majorant ``H`` of a density field, tabulated on the field's grid.

    Parameters
    ----------
    source : DensityField
    r : float
        Exponent, checked against ``bound`` unless ``validate`` is false.
    bound : float, optional
        ``(nu - d) / kappa``.
    validate : bool
        Skip the range check; only diagnostics that probe the failure regime should do this.
    """

    def __init__(self, source: DensityField, r: float, bound: float | None = None,
                 validate: bool = True):
        if validate:
            if bound is None:
                raise ValueError("a bound (nu - d)/kappa is required to validate r")
            if not 0 < r < bound:
                raise ValueError(f"majorant exponent r = {r} outside (0, {bound})")
        elif not r > 0:
            raise ValueError("majorant exponent must be positive")
        self.source = source
        self.r = float(r)
        self.bound = bound
        self.grid = source.grid
        self.values = _majorant_values(source, self.r, self.grid.nodes())
        self.values.setflags(write=False)

    @classmethod
    def default(cls, source: DensityField, nu: float, d: int, kappa: int) -> "MajorantField":
        """Majorant with ``r = 0.9 (nu - d) / kappa``."""
        b = majorant_bound(nu, d, kappa)
        return cls(source, 0.9 * b, b)

    def __call__(self, x):
        return majorant(self.source, self.r, x)

    @property
    def tol_disc(self) -> float:
        """Discretisation slack of the slow-variation inequality on sampled pairs.

        The maximum over grid nodes misses the continuum supremum by at most the change
        of ``h(t) (1 + |x - t|/h(t))^(-r)`` over half a grid diagonal.
        """
        eps = 0.5 * self.grid.spacing * math.sqrt(self.grid.d)
        hmin = max(float(self.source.values.min()), 1e-300)
        hmax = float(self.source.values.max())
        return hmax * (1 - (1 + eps / hmin) ** (-self.r))

    def slow_variation_violation(self, x, y) -> np.ndarray:
        """``H(y)(1 + |x - y|/H(y))^(-r) - H(x)`` for paired samples; should stay below ``tol_disc``."""
        hx, hy = self(x), self(y)
        x = np.asarray(x, float).reshape(hx.size, -1)
        y = np.asarray(y, float).reshape(hy.size, -1)
        dist = np.linalg.norm(x - y, axis=1)
        return hy * (1 + dist / hy) ** (-self.r) - hx

    def to_csv(self, path=None) -> str:
        return _grid_csv(self.grid, self.values, "H", path)
