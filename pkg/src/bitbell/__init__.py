"""Bitwise CHSH quantities for a two-mode squeezed vacuum."""

__version__ = "0.1.0"
