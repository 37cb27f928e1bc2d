"""Computational experiments on genus-2 translation surfaces."""

__version__ = "0.1.0"
