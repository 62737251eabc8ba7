"""Python bindings for the adaptcm C++ library."""

from ._adaptcm import *  # noqa: F401,F403
from ._adaptcm import __all__  # noqa: F401
