"""Exact simulation of the adiabatic preparation of toric-code order on small tori."""

__version__ = "0.1.0"
