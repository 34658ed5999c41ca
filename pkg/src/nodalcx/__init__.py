"""Numerical construction of a nonnegative Helmholtz-type solution whose
interior nodal set consists of two analytic curves."""
from __future__ import annotations

__version__ = "0.1.0"
