"""Numerics for the Hitchin-cscK system in symplectic coordinates on the 2-torus and on toric surfaces."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
