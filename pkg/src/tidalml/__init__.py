"""Tidal-breathing lung simulation, synthetic cohorts and disease classifiers."""

__version__ = "0.1.0"
