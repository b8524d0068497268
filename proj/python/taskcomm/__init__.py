"""Analog encoder design for multi-user, multi-task estimation over a noisy
scalar broadcast channel."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
