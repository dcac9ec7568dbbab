"""Satellite-aware interference nulling for terrestrial base stations sharing upper mid-band spectrum."""

__version__ = "0.1.0"
