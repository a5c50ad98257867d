"""Inverse-optimal ISS/IOS controller synthesis for homogeneous systems."""

__version__ = "0.1.0"
