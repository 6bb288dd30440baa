"""Tensor-product Gauss-Legendre panel rules and small fitting helpers."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule: panels of side ``panel`` with ``order`` nodes per axis."""

    panel: float
    order: int = 4

    def __post_init__(self):
        if not self.panel > 0:
            raise ValueError(f"panel size must be positive, got {self.panel}")
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return QuadratureSpec(self.panel / factor, self.order)


@lru_cache(maxsize=64)
def _gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def panel_rule_1d(lo: float, hi: float, spec: QuadratureSpec):
    """Nodes and weights of the composite rule on ``[lo, hi]``."""
    npan = max(1, int(np.ceil((hi - lo) / spec.panel - 1e-9)))
    width = (hi - lo) / npan
    x, w = _gauss_legendre(spec.order)
    starts = lo + width * np.arange(npan)
    nodes = (starts[:, None] + width * x[None, :]).ravel()
    weights = np.tile(width * w, npan)
    return nodes, weights


def box_rule(lo, hi, spec: QuadratureSpec):
    """Tensor composite rule on the axis-aligned box ``[lo, hi]``.

    Returns
    -------
    nodes : ndarray, shape (Q, d)
    weights : ndarray, shape (Q,)
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    rules = [panel_rule_1d(a, b, spec) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return nodes, weights


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``; nan when undefined."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ok = (xs > 0) & (ys > 0) & np.isfinite(ys)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(xs[ok]), np.log(ys[ok]), 1)[0])
