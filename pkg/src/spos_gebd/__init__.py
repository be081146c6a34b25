"""Event boundary detection over structured local context windows."""

__version__ = "0.1.0"
