"""Numerical laboratory for power concavity of p-Laplacian Dirichlet problems."""

__version__ = "0.1.0"
