"""Quantum divergences, channel divergences and chain-rule checks."""

__version__ = "0.1.0"
