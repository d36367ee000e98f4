"""Segmented ion-trap voltage compiler and virtual single-ion frequency probe."""

__version__ = "0.1.0"
