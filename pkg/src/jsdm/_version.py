"""Package version, importable without touching the package root."""

__version__ = "0.1.0"
