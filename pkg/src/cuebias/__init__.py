"""Voronoi style-transfer augmentation and shape/texture bias evaluation toolkit."""

__version__ = "0.1.0"
