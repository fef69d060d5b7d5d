"""Adaptive parallel discrete-event simulation with migratable entities."""

__version__ = "0.1.0"
