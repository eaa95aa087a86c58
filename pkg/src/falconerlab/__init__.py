"""Numerical experiments on k-point configuration sets, group energies and tube incidences."""

__version__ = "0.1.0"
