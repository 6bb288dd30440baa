"""Compactly supported wavelets, maximal functions and smoothness norms.

Decomposes a cusp, reconstructs it, evaluates the wavelet maximal function and
the Triebel-Lizorkin quasi-norm, and splits the expansion by a density field.

Run: python3 demos/03_wavelets.py
"""

from __future__ import annotations

import numpy as np

from scatshift.basis import BasisFunction, get_test_function
from scatshift.centers import DensityField, Grid
from scatshift.wavelets import (
    DyadicSamples, WaveletSystem, decompose, maximal_function, reconstruct, split_by_density, tl_norm,
)

phi = BasisFunction.truncated_power(2)
sys = WaveletSystem.for_basis(phi, j0=3)
print(sys.describe())

# %% Analysis and synthesis are exact inverses
f = get_test_function("cusp", phi)
samples = DyadicSamples.from_function(f, 10, 0.0, 1.0)
exp = decompose(samples, sys)
back = reconstruct(exp)
start = int(samples.offset[0] - back.offset[0])
print("reconstruction error:", np.max(np.abs(back.values[start:start + samples.values.size] - samples.values)))

# %% Coefficients are large only near the cusp at x = 1/2
j, k, e, v = exp.flat(include_coarse=False)
for level in range(3, 10, 2):
    sel = j == level
    top = k[sel][np.argmax(np.abs(v[sel]))][0] / 2**level
    print(f"level {level}: largest |f_v| = {np.abs(v[sel]).max():.2e} at x ~ {top:.3f}")

# %% Maximal function and quasi-norm
x = np.linspace(0.3, 0.7, 5)
print("M_{s,q}(x) for s=1, q=2:", maximal_function(exp, 1.0, 2.0, x).round(3))
print("F^1_{2,2} quasi-norm:", round(tl_norm(exp, 1.0, 2.0, 2.0)[0], 4))

# %% Split against a density: wavelets finer than h go to the remainder
df = DensityField.constant(Grid.covering(-2, 3, 1 / 256), 1 / 64)
plus, minus = split_by_density(exp, df)
print("kept:", plus.flat()[3].size, " remainder:", minus.flat()[3].size, " total:", exp.flat()[3].size)
