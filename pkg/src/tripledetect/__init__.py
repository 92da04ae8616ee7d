"""Audit, repair and simulation of a three-detector which-slit construction.

A particle with spin 7/2 passes a double slit after Stern-Gerlach style
selection and routing.  Three spin detectors (T, Y, W) are meant to reveal
three mutually incompatible spatial properties (E, G, L) of the prepared
entangled state.  The package rebuilds the printed construction, checks
every condition numerically, repairs what does not hold, and solves the
general detector-to-property problem.
"""
from __future__ import annotations

__version__ = "0.1.0"
