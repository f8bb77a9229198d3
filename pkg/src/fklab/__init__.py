"""Numerical Aubry-Mather toolkit: periodic minimizers, orderings, gaps and bump perturbations."""

__version__ = "0.1.0"
