"""Kerr parametric oscillator simulations.

Thin wrapper around the C++ library; see ``help(kpo._core)`` for signatures.
"""

from ._core import *  # noqa: F401,F403
from ._core import KpoError, SystemParams

__all__ = [name for name in dir() if not name.startswith("_")]
