"""Soil characterization: resistivity, salinity models, an LM-trained salinity
network, suitability decisions and a keyed telemetry channel service."""

__version__ = "0.1.0"
