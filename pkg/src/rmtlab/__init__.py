"""Numerical laboratory for the smallest singular value of square random matrices
with i.i.d. mean-zero, unit-variance (possibly heavy-tailed) entries."""

__version__ = "0.1.0"
