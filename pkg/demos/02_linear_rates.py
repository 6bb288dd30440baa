"""Quasi-interpolation and its convergence rate.

Builds F = sum a(xi) phi(. - xi) from T f for a smooth bump, measures the error
under refinement, and shows that a two-density center set gives small errors
where the centers are dense.

Run: python3 demos/02_linear_rates.py
"""

from __future__ import annotations

import numpy as np

from scatshift.basis import BasisFunction, get_test_function
from scatshift.centers import CenterSet
from scatshift.quadrature import QuadratureSpec
from scatshift.quasilinear import assemble, refinement_study

phi = BasisFunction.truncated_power(2)
f = get_test_function("bump", phi)

# %% One approximant
cs = CenterSet.uniform(-0.25, 1.25, 1 / 64)
F = assemble(f, cs, None, QuadratureSpec(1 / 64, 8), phi)
x = np.linspace(0, 1, 2001)[:, None]
print("centers used:", len(F), " sup error:", f"{np.max(np.abs(f(x).ravel() - F(x))):.3e}")

# %% Refinement: the error decays like h^kappa
rep = refinement_study(f, [2.0**-k for k in range(4, 9)], phi, None, -0.25, 1.25, x,
                       p=2.0, cell=1 / 2000)
print(rep.to_csv())
print("fitted slope:", round(rep.slope, 3), "expected:", rep.reference_slope)

# %% Two densities: fine on the left half, four times coarser on the right
g = get_test_function("twobump", phi)
cs2 = CenterSet.two_density(-0.25, 1.25, 1 / 256, 1 / 64, 0.5)
F2 = assemble(g, cs2, None, QuadratureSpec(cs2.mean_spacing(), 8), phi)
err = np.abs(g(x).ravel() - F2(x))
left, right = err[x[:, 0] < 0.5].max(), err[x[:, 0] > 0.5].max()
print(f"left {left:.2e}  right {right:.2e}  ratio {left / right:.4f}  (1/4)^2 = {1 / 16:.4f}")
