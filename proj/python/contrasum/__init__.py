from ._contrasum import *  # noqa: F401,F403
from ._contrasum import __version__  # noqa: F401
