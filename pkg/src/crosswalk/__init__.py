"""Deterministic pedestrian / autonomous-vehicle intersection crossing simulator."""

__version__ = "0.1.0"

PROTOCOL_VERSION = 1
