"""Spectral Difference on triangles with APK polynomials and modal filtering."""

__version__ = "0.1.0"
