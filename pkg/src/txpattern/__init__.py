"""Suspicious-pattern detection on transaction graphs with per-pattern graph autoencoders."""

__version__ = "0.1.0"
