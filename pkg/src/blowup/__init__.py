"""Stability of ODE blowup for the focusing wave equation u_tt - Δu = |u|^{p-1} u in three dimensions."""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0+unknown"
