"""Sparse scale simulation random variables for differential abundance."""

__version__ = "0.1.0"
