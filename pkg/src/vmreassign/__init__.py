"""Trace-driven VM placement simulator with a role pre-assignment intensifier."""

__version__ = "0.1.0"
