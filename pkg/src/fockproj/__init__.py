"""Truncated-Fock simulator for projective squeezing, LCU post-selection,
quasi-probability error suppression, and CV circuit knitting."""

__version__ = "0.1.0"

from . import (analytics, channels, errors, fock, gates, knitting, lcu,
               projectors, serialize, vqed)

__all__ = [
    "__version__",
    "analytics",
    "channels",
    "errors",
    "fock",
    "gates",
    "knitting",
    "lcu",
    "projectors",
    "serialize",
    "vqed",
]
