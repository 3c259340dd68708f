"""Galton-Watson trees, their spine decomposition and the uniform measure on the boundary."""

__version__ = "0.1.0"
