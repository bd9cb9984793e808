"""Weakly supervised shadow removal with spherical feature alignment, in plain NumPy."""

__version__ = "0.1.0"
