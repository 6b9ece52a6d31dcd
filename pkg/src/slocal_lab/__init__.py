"""Executable laboratory for sequential-local and local graph algorithms."""

__version__ = "0.1.0"
