"""Numerical laboratory for Schrodinger operators with rough periodic potentials."""
__version__ = "0.1.0"
