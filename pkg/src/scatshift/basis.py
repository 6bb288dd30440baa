"""Basis functions, their generating operators and a registry of analytic test functions.

A basis function ``phi`` is either a surface spline (fundamental solution of the
iterated Laplacian, up to the constant ``c``) or the univariate truncated power
``t_+^(kappa-1)``.  The operator ``T`` attached to ``phi`` is normalised so that

    f(x) = integral T f(t) phi(x - t) dt

holds for every compactly supported ``f`` of class ``C^kappa``.  For surface
splines this means ``T = (G / c) Delta^m`` where ``G`` is the constant of the
true fundamental solution (see :func:`fundamental_constant`); for the truncated
power ``T = D^kappa / ((kappa - 1)! c)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import sympy as sp

from .quadrature import QuadratureSpec, box_rule

SURFACE_SPLINE = "surface-spline"
TRUNCATED_POWER = "truncated-power"


class ConvergenceError(RuntimeError):
    """A refinement ladder failed to drive a residual towards zero."""


def fundamental_constant(d: int, m: int) -> float:
    """Constant ``G`` with ``Delta^m (G |x|^(2m-d) [log|x|]) = delta`` in ``R^d``."""
    if 2 * m <= d:
        raise ValueError(f"surface spline needs 2m > d, got m={m}, d={d}")
    if d % 2 == 0:
        k = m - d // 2
        return (-1) ** (d // 2 + 1) / (
            2 ** (2 * m - 1) * math.pi ** (d / 2) * math.factorial(m - 1) * math.factorial(k)
        )
    return (-1) ** m * math.gamma(d / 2 - m) / (4**m * math.pi ** (d / 2) * math.gamma(m))


def as_points(x, d: int) -> np.ndarray:
    """Coerce ``x`` to an array of shape ``(..., d)``."""
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise ValueError(f"expected points with {d} coordinates, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class BasisFunction:
    """The kernel ``phi`` together with its dimension ``d`` and operator order ``kappa``."""

    kind: str
    d: int
    kappa: int
    m: Optional[int] = None
    c: float = 1.0

    def __post_init__(self):
        if self.kind == SURFACE_SPLINE:
            if self.m is None or self.m < 1:
                raise ValueError("surface spline needs a positive Laplacian iterate count m")
            if 2 * self.m <= self.d:
                raise ValueError(
                    f"surface spline needs 2m > d for local integrability (m={self.m}, d={self.d})"
                )
            if self.kappa != 2 * self.m:
                raise ValueError("surface spline has kappa = 2m")
        elif self.kind == TRUNCATED_POWER:
            if self.d != 1:
                raise ValueError("truncated power is univariate (d = 1)")
            if self.kappa < 1:
                raise ValueError("truncated power needs kappa >= 1")
        else:
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if not (np.isfinite(self.c) and self.c != 0):
            raise ValueError("normalisation constant must be finite and nonzero")

    @classmethod
    def surface_spline(cls, d: int, m: int, c: float | str = 1.0) -> "BasisFunction":
        """Surface spline ``c |x|^(2m-d) [log|x|]``; ``c="fundamental"`` makes ``T = Delta^m``."""
        if c == "fundamental":
            c = fundamental_constant(d, m)
        return cls(SURFACE_SPLINE, d, 2 * m, m, float(c))

    @classmethod
    def thin_plate(cls) -> "BasisFunction":
        return cls.surface_spline(2, 2)

    @classmethod
    def truncated_power(cls, kappa: int, c: float = 1.0) -> "BasisFunction":
        return cls(TRUNCATED_POWER, 1, kappa, None, float(c))

    @property
    def degree(self) -> int:
        """Homogeneity degree ``kappa - d``."""
        return self.kappa - self.d

    @property
    def log_branch(self) -> bool:
        return self.kind == SURFACE_SPLINE and self.degree % 2 == 0

    @property
    def operator_scale(self) -> float:
        """Factor ``s`` with ``T = s * Delta^m`` (or ``s * D^kappa``)."""
        if self.kind == SURFACE_SPLINE:
            return fundamental_constant(self.d, self.m) / self.c
        return 1.0 / (math.factorial(self.kappa - 1) * self.c)

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        p = self.degree
        if not self.log_branch:
            return self.c * r**p
        out = np.zeros_like(r)
        nz = r > 0
        out[nz] = self.c * r[nz] ** p * np.log(r[nz])
        return out

    def __call__(self, x):
        return eval_basis(self, x)

    def describe(self) -> dict:
        return {"kind": self.kind, "d": self.d, "kappa": self.kappa, "m": self.m, "c": self.c}


def eval_basis(phi: BasisFunction, x):
    """Evaluate ``phi`` at points ``x`` (shape ``(..., d)``; scalars allowed when d = 1)."""
    if phi.kind == TRUNCATED_POWER:
        x = np.asarray(x, dtype=float)
        if x.ndim > 0 and x.shape[-1] == 1:
            x = x[..., 0]
        if phi.kappa == 1:
            return phi.c * (x >= 0).astype(float)
        return phi.c * np.maximum(x, 0.0) ** (phi.kappa - 1)
    pts = as_points(x, phi.d)
    return phi.radial(np.sqrt(np.sum(pts * pts, axis=-1)))


def scaled_difference(phi: BasisFunction, lam: float, y):
    """Return ``phi(lam*y) - lam^(kappa-d) phi(y)``: zero, or the polynomial log-term."""
    if not phi.log_branch:
        return np.zeros(np.shape(eval_basis(phi, y)))
    pts = as_points(y, phi.d)
    r = np.sqrt(np.sum(pts * pts, axis=-1))
    return phi.c * lam**phi.degree * r**phi.degree * np.log(lam)


# ---------------------------------------------------------------------------
# analytic test functions


@dataclass(frozen=True)
class AnalyticTestFunction:
    """Closed-form ``f`` together with ``T f`` for a given basis function."""

    name: str
    d: int
    lo: np.ndarray
    hi: np.ndarray
    f: Callable = field(repr=False)
    Tf: Optional[Callable] = field(default=None, repr=False)
    smooth: bool = True

    def __call__(self, x):
        return self.f(as_points(x, self.d))

    @property
    def support(self):
        return self.lo, self.hi

    def has_T(self) -> bool:
        return self.Tf is not None


_SPEC_RE = re.compile(r"^\s*([A-Za-z_][\w\-]*)\s*(?::(.*))?$")


def parse_function_name(spec: str):
    """Split ``"cusp:alpha=0.6,center=0.5"`` into ``("cusp", {"alpha": 0.6, ...})``."""
    m = _SPEC_RE.match(spec)
    if not m:
        raise ValueError(f"malformed test-function name {spec!r}")
    name, rest = m.group(1), m.group(2)
    params = {}
    if rest:
        for item in rest.split(","):
            if not item.strip():
                continue
            if "=" not in item:
                raise ValueError(f"malformed parameter {item!r} in {spec!r}")
            k, v = item.split("=", 1)
            params[k.strip()] = float(v)
    return name, params


def _bump_expr(X, center, radius, sharp=1.0):
    rho2 = sum((xi - center) ** 2 for xi in X) / radius**2
    return sp.exp(sp.nsimplify(sharp) * (1 - 1 / (1 - rho2))), rho2


def _bump(X, center=0.5, radius=0.45, sharp=1.0):
    expr, rho2 = _bump_expr(X, center, radius, sharp)
    inside = lambda P: np.sum((P - center) ** 2, axis=-1) < radius**2 * (1 - 1e-12)
    return expr, inside, (center - radius, center + radius), True


def _cosbump(X, center=0.5, radius=0.45, power=4):
    expr = sp.Integer(1)
    for xi in X:
        expr = expr * ((1 + sp.cos(sp.pi * (xi - center) / radius)) / 2) ** int(power)
    inside = lambda P: np.all(np.abs(P - center) < radius, axis=-1)
    return expr, inside, (center - radius, center + radius), True


def _cusp(X, alpha=0.6, x0=0.5, center=0.5, radius=0.45):
    bump, rho2 = _bump_expr(X, center, radius)
    dist = sp.sqrt(sum((xi - x0) ** 2 for xi in X))
    expr = dist**alpha * bump
    inside = lambda P: np.sum((P - center) ** 2, axis=-1) < radius**2 * (1 - 1e-12)
    return expr, inside, (center - radius, center + radius), False


def _twobump(X, left=0.25, right=0.75, radius=0.2):
    e1, _ = _bump_expr(X, left, radius)
    e2, _ = _bump_expr(X, right, radius)
    x = X[0]
    expr = sp.Piecewise((e1, x < (left + right) / 2), (e2, True))

    def inside(P):
        d1 = np.sum((P - left) ** 2, axis=-1) < radius**2 * (1 - 1e-12)
        d2 = np.sum((P - right) ** 2, axis=-1) < radius**2 * (1 - 1e-12)
        return d1 | d2

    lo = min(left, right) - radius
    hi = max(left, right) + radius
    return expr, inside, (lo, hi), True


def _zero(X):
    return sp.Integer(0), (lambda P: np.zeros(P.shape[:-1], dtype=bool)), (0.0, 1.0), True


REGISTRY = {
    "bump": _bump,
    "cosbump": _cosbump,
    "cusp": _cusp,
    "twobump": _twobump,
    "zero": _zero,
}


def _apply_operator_sym(expr, X, phi: BasisFunction):
    if phi.kind == TRUNCATED_POWER:
        out = sp.diff(expr, X[0], phi.kappa)
    else:
        out = expr
        for _ in range(phi.m):
            out = sum(sp.diff(out, xi, 2) for xi in X)
    return out


def _masked(fn, inside, d):
    def call(P):
        P = as_points(P, d)
        shape = P.shape[:-1]
        flat = P.reshape(-1, d)
        out = np.zeros(flat.shape[0])
        ok = inside(flat)
        if np.any(ok):
            vals = fn(*[flat[ok, i] for i in range(d)])
            out[ok] = np.broadcast_to(vals, (int(ok.sum()),))
        return out.reshape(shape)

    return call


def from_expression(name, expr, X, inside, box, phi: BasisFunction, smooth=True):
    """Wrap a sympy expression as an :class:`AnalyticTestFunction` for ``phi``."""
    d = len(X)
    lo = np.full(d, box[0], dtype=float)
    hi = np.full(d, box[1], dtype=float)
    f = _masked(sp.lambdify(X, expr, modules="numpy", cse=True), inside, d)
    Tf = None
    if smooth:
        texpr = phi.operator_scale * _apply_operator_sym(expr, X, phi)
        Tf = _masked(sp.lambdify(X, texpr, modules="numpy", cse=True), inside, d)
    return AnalyticTestFunction(name, d, lo, hi, f, Tf, smooth)


@lru_cache(maxsize=128)
def _cached(spec: str, phi: BasisFunction) -> AnalyticTestFunction:
    name, params = parse_function_name(spec)
    if name not in REGISTRY:
        raise KeyError(f"unknown test function {name!r}; known: {sorted(REGISTRY)}")
    X = sp.symbols(" ".join(f"x{i}" for i in range(phi.d)), real=True)
    X = (X,) if phi.d == 1 else tuple(X)
    try:
        expr, inside, box, smooth = REGISTRY[name](X, **params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {name!r}: {params}") from exc
    return from_expression(spec, expr, X, inside, box, phi, smooth)


def get_test_function(spec: str, phi: BasisFunction) -> AnalyticTestFunction:
    """Look up a registry function by name string, e.g. ``"bump"`` or ``"cusp:alpha=0.6"``."""
    return _cached(spec.strip(), phi)


def apply_T(phi: BasisFunction, f: AnalyticTestFunction, t):
    """Evaluate ``T f`` at ``t`` from the registry's closed form."""
    if f.Tf is None:
        raise ValueError(f"{f.name} is not of class C^kappa; T f is unavailable")
    return f.Tf(as_points(t, phi.d))


def representation_integral(phi: BasisFunction, f: AnalyticTestFunction, x, quad: QuadratureSpec):
    """``integral T f(t) phi(x - t) dt`` by the composite rule over the support of ``f``."""
    pts = as_points(x, phi.d)
    nodes, w = box_rule(f.lo, f.hi, quad)
    tf = apply_T(phi, f, nodes)
    keep = tf != 0
    nodes, wt = nodes[keep], (w * tf)[keep]
    flat = pts.reshape(-1, phi.d)
    out = np.empty(flat.shape[0])
    step = max(1, (1 << 21) // max(1, nodes.shape[0]))
    for i0 in range(0, flat.shape[0], step):
        blk = flat[i0:i0 + step]
        out[i0:i0 + step] = eval_basis(phi, blk[:, None, :] - nodes[None, :, :]) @ wt
    return out.reshape(pts.shape[:-1])


def verify_representation(phi: BasisFunction, f: AnalyticTestFunction, x, quad: QuadratureSpec):
    """Residual ``|f(x) - integral T f(t) phi(x - t) dt|`` under ``quad``."""
    return np.abs(f(x) - representation_integral(phi, f, x, quad))


def representation_ladder(phi, f, x, quad: QuadratureSpec, levels: int = 4, floor: float = 1e-13):
    """Run :func:`verify_representation` under successive panel halvings.

    Returns the list of max residuals.  Raises :class:`ConvergenceError` if the
    residual does not decrease overall (residuals already at ``floor`` count as converged).
    """
    res = []
    q = quad
    for _ in range(levels):
        res.append(float(np.max(verify_representation(phi, f, x, q))))
        q = q.refined(2)
    scale = max(1.0, float(np.max(np.abs(f(x)))))
    if res[-1] > floor * scale and not res[-1] < res[0]:
        raise ConvergenceError(f"representation residual did not decrease: {res}")
    return res
