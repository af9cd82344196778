"""Crash detection and market-conditioned mutual-information networks."""

__version__ = "0.1.0"
