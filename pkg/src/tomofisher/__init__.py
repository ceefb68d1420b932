"""Top-level package for tomofisher."""

__version__ = "1.0.0"
