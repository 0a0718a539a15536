"""Numerical toolkit for amplified geodesic restriction bounds on arithmetic surfaces."""

__version__ = "0.1.0"
