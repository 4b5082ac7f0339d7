"""Mean-field portfolio trading and intraday covariance tools."""

from ._mfgp import *  # noqa: F401,F403
from ._mfgp import __version__  # noqa: F401
