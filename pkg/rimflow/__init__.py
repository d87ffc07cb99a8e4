"""Pseudospectral laboratory for the capillary rimming-flow thin-film equation."""

__version__ = "0.1.0"
