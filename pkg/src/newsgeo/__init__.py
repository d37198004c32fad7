"""Retrieval-augmented geocoding of toponyms in news articles."""

from newsgeo.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
