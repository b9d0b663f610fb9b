"""Quantize-and-forward simulation and cut-set analysis for layered Gaussian relay networks."""

__version__ = "0.1.0"
