"""Online auto-associative memory built on chain-structured threshold-linear networks."""

from .network import CstlnParams, Network, SupportSet, build_network

__version__ = "0.1.0"

__all__ = ["CstlnParams", "Network", "SupportSet", "build_network", "__version__"]
