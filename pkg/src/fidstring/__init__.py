"""Fiducial distributions restricted to a parametric curve in the plane."""

__version__ = "0.1.0"
