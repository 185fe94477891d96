"""Hybrid min/max-SOC estimator for series battery packs (C++ core)."""

from ._minsoc import *  # noqa: F401,F403
from ._minsoc import __doc__  # noqa: F401
