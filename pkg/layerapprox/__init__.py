"""Function approximation on [-1, 1]^n with shallow, cascade and layer networks."""

from .helpers import getVersion

__version__ = getVersion()
