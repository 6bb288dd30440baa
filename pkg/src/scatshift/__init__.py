"""Approximation by scattered shifts of a basis function.

Modules
-------
basis
    Surface splines, truncated powers and analytic test functions with ``T f``.
centers
    Center sets, density fields and majorants.
reproduction
    Local polynomial-reproducing functionals and the error kernel.
quasilinear
    Quasi-interpolants, weighted norms and Schur diagnostics.
wavelets
    Daubechies systems, coefficients, maximal functions and the density split.
nterm
    Budgeted N-term approximation driven by wavelet coefficients.
"""

from __future__ import annotations

from .basis import BasisFunction, get_test_function
from .centers import CenterSet, DensityField, Grid, MajorantField
from .nterm import NTermConfig, allocate, nterm_approximate, sigma_study
from .quasilinear import ScatteredApproximant, approximate_low_smoothness, assemble
from .reproduction import ReproductionConfig, build_functional, build_functionals
from .wavelets import WaveletExpansion, WaveletSystem, decompose, reconstruct

__all__ = [
    "BasisFunction", "get_test_function", "CenterSet", "DensityField", "Grid", "MajorantField",
    "NTermConfig", "allocate", "nterm_approximate", "sigma_study", "ScatteredApproximant",
    "approximate_low_smoothness", "assemble", "ReproductionConfig", "build_functional",
    "build_functionals", "WaveletExpansion", "WaveletSystem", "decompose", "reconstruct",
]

__version__ = "0.1.0"
