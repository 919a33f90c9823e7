"""Numerical machinery for double-tower bubble solutions of -Δu + V(|y|)u = u^p."""

__version__ = "0.1.0"
