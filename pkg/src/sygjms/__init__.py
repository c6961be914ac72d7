"""Singular Yamabe scattering, extrinsic GJMS operators and renormalized volume
on separable model geometries."""

__version__ = "0.1.0"
