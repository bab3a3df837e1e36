"""Supremum-location laws of stationary processes: validation, construction, exact laws, simulation."""

__version__ = "0.1.0"
