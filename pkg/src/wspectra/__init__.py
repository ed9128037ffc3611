"""Numerical laboratory for Willmore second-variation spectra, weighted
annulus inequalities, and neck-region diagnostics."""

__version__ = "0.1.0"

from .kernels import BACKEND

__all__ = ["BACKEND", "__version__"]
