"""Hot-kernel backend selection.

The compiled ``_speedups`` extension is used when it was built; otherwise the
pure-Python versions are loaded. Set ``ETHFUZZ_PURE_PYTHON=1`` to force the
fallback.
"""

import os

from . import _pure

try:
    if os.environ.get("ETHFUZZ_PURE_PYTHON"):
        raise ImportError("pure-python backend forced")
    from . import _speedups as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pure
    BACKEND = "python"

keccak256 = _impl.keccak256
valid_jumpdests = _impl.valid_jumpdests
instruction_starts = _impl.instruction_starts

__all__ = ["BACKEND", "keccak256", "valid_jumpdests", "instruction_starts"]
