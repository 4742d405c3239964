"""Desk-scale simulator of a ring-cavity magneto-electric anisotropy measurement."""

__version__ = "0.1.0"
