"""Ancilla-assisted quantum state tomography for weakly coupled spin registers."""

__version__ = "0.1.0"
