"""Spectral toolkit for magnetic Schrodinger operators with a step field."""

__version__ = "0.1.0"
