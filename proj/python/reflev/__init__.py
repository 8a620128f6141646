"""Loss rates of doubly reflected Levy processes with a periodic lower barrier."""

from ._reflev import *  # noqa: F401,F403
from ._reflev import __doc__  # noqa: F401

__version__ = "0.1.0"
