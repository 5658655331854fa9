"""Privacy-enhanced invertible Bloom filters for thresholded genome comparison."""

from .ibf import (
    DEFAULT_PRIME,
    Cell,
    DecodeResult,
    Ibf,
    IbfParams,
    Membership,
    list_items,
    make_params,
    privacy_threshold,
    subtract,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PRIME",
    "Cell",
    "DecodeResult",
    "Ibf",
    "IbfParams",
    "Membership",
    "list_items",
    "make_params",
    "privacy_threshold",
    "subtract",
]
