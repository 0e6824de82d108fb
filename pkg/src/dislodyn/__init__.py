"""Nonlocal phase-field dislocation dynamics and its particle limit."""

__version__ = "0.1.0"
