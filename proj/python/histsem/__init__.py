"""Diachronic semantic change toolkit (C++ core)."""

from ._histsem import *  # noqa: F401,F403
from ._histsem import __version__  # noqa: F401
