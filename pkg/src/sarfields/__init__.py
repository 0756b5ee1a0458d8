"""Dual-polarization SAR field analytics: processing, catalog, and bundling service."""

__version__ = "0.1.0"
