"""Numerical laboratory for the periodic cubic Schrödinger flow, its
conserved functionals, and the attached 2x2 spectral problem."""

from .field import Grid, PeriodicField, make_field
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["Grid", "PeriodicField", "make_field", "KERNEL_BACKEND", "__version__"]
