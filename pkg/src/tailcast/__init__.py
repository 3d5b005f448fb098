"""Tail analysis of timestamped magnitudes."""

__version__ = "0.1.0"
