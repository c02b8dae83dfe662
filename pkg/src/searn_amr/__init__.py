"""Greedy AMR parsing trained with SEARN."""

from .learner import FORMAT_VERSION

__version__ = "0.1.0"
__all__ = ["FORMAT_VERSION", "__version__"]
