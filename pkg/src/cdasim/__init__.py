"""Seed-reproducible agent-based continuous double auction simulator."""

__version__ = "0.1.0"
