"""Stackelberg incentive game coupled to a federated training simulator."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
