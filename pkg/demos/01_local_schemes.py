"""Local polynomial reproduction on scattered centers.

Walks through the building blocks of the linear scheme: a scattered center set,
the reproducing functional at a point, its density radius h(t), and the decay of
the error kernel E(x, t) away from t.

Run: python3 demos/01_local_schemes.py
"""

from __future__ import annotations

import numpy as np

from scatshift.basis import BasisFunction
from scatshift.centers import CenterSet, Grid, MajorantField
from scatshift.reproduction import (
    ReproductionConfig, build_functional, density_field, divided_difference_scheme, error_kernel_eval,
)

# %% A univariate truncated power with kappa = 2 and 40 random centers
phi = BasisFunction.truncated_power(2)
cs = CenterSet.random(40, 0.0, 1.0, seed=1)
print("centers:", len(cs), "mean spacing:", round(cs.mean_spacing(), 4))

# %% The divided-difference scheme at t uses kappa neighbouring knots
lam = divided_difference_scheme(cs, 0.5, phi.kappa)
print("support:", lam.support.ravel().round(4), "weights:", lam.coeffs.round(3), "h(t):", round(lam.h, 4))

# %% E(x, t) vanishes outside the knot hull and is O(h^(kappa-1)) inside
x = 0.5 + lam.h * np.array([-50, -3, -1, -0.5, 0.0, 0.5, 1, 3, 50])
E = error_kernel_eval(lam, phi, x[:, None])
for xi, ei in zip(x, E):
    print(f"  (x - t)/h = {(xi - 0.5) / lam.h:+7.2f}   |E| / h = {abs(ei) / lam.h:.3e}")

# %% Density and its slowly varying majorant over a grid
grid = Grid.covering(0.1, 0.9, 1 / 512)
df = density_field(cs, phi, None, grid)
H = MajorantField.default(df, nu=2, d=1, kappa=phi.kappa)
nodes = grid.nodes()
print("h range:", df.values.min().round(4), df.values.max().round(4))
print("H dominates h everywhere:", bool(np.all(H(nodes) >= df.values)), " exponent r =", H.r)

# %% Thin-plate spline in 2D: least-norm functional reproducing cubics
tp = BasisFunction.thin_plate()
cfg = ReproductionConfig.for_basis(tp, nu=3, r_extra=7)
pts = CenterSet.jittered(-1, 1, 0.1, 0.3, seed=2, d=2)
lam2 = build_functional(pts, [0.03, -0.1], cfg)
print("thin-plate functional: support", len(lam2.coeffs), "norm", round(lam2.norm, 3),
      "residual", f"{lam2.reproduction_residual():.1e}")
