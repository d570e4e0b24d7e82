"""Eigenfunctions of -d^2/dx^2 + V and weighted Plancherel estimates for Grushin kernels."""

from ._core import *  # noqa: F401,F403
from ._core import GrushinLabError, __version__  # noqa: F401
