"""Offline exporter producing the data artifacts the nerfusion toolkit consumes."""

__version__ = "0.1.0"
