"""Discrete-event system-level simulator for 5G NR UE power saving."""

__version__ = "0.1.0"
