"""Numerical laboratory for eigenvalue statistics of random Schrödinger operators on regular graphs."""

__version__ = "0.1.0"
