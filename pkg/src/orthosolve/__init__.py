"""Retraction-free first-order solver for nonsmooth problems with orthonormal columns."""

__version__ = "0.1.0"
