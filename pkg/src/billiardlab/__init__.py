"""Numerical laboratory for billiard-type dynamical systems."""

__version__ = "0.1.0"
