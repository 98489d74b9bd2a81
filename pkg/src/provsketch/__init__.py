"""Provenance graph sketches for unsupervised host compromise detection."""

__version__ = "0.1.0"
