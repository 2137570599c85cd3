"""Sparse random-interaction quantum battery simulator, desk scale (N <= 14)."""

__version__ = "0.1.0"
