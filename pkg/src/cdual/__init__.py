"""Metric c-convex analysis on finite spaces."""

__version__ = "0.1.0"
