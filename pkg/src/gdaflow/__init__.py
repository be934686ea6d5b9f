"""Gradient descent-ascent flows by minimizing-maximizing movements."""

from . import core, hilbert, wasserstein, saddle, scheme, diagnostics  # noqa: F401  (registers backends)

__version__ = "0.1.0"
