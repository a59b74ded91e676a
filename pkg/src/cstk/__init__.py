"""Numerical toolkit for classical SU(2) Chern-Simons gauge theory on flat tori."""

__version__ = "0.1.0"
