"""Backbone feature exporter: images in, engine-ready tensor files out."""

__version__ = "0.1.0"
