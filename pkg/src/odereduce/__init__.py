"""Reduction, substitution and exactness solvers for second-order ODEs, with numeric checks."""

__version__ = "0.1.0"
