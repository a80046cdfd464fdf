"""Evolving surface finite elements with linearly implicit BDF time stepping."""

from ._evolvefem import *  # noqa: F401,F403
from ._evolvefem import ConfigError, InputError, IoError, SolverError

__version__ = "0.1.0"
