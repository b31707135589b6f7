"""Finite-element spectra and universal eigenvalue-inequality checks for
weighted divergence-form elliptic operators on curved domains."""

__version__ = "0.1.0"
