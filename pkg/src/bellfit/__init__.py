"""Quantum versus local-hidden-variable analysis of polarization-correlation data."""

__version__ = "0.1.0"
