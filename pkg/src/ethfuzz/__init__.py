"""Trace-oracle fuzzing of EVM smart contracts."""

from ._kernels import BACKEND, keccak256

__version__ = "0.1.0"

__all__ = ["BACKEND", "keccak256", "__version__"]
