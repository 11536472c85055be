"""Numerical laboratory for the cut-off of spherical Brownian motion"""

__version__ = "0.1.0"
