"""Collective fraud detection on heterogeneous information networks via downsized meta-paths."""

__version__ = "0.1.0"
