"""Exact analysis of constant perturbations of complex vector fields on the torus."""

__version__ = "0.1.0"
