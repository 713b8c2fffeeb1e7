"""Spectral and finite-difference laboratory for wave propagators on
anti-de Sitter backgrounds with generalized Robin boundary conditions."""

from . import boundary, errors, frobenius, geometry, spectrum

__all__ = ["boundary", "errors", "frobenius", "geometry", "spectrum"]
__version__ = "0.1.0"
