"""Kernel backend selection.

The compiled Cython extension is preferred; the pure-numpy implementation is
the fallback. Set ``SPSIM_PURE_PYTHON=1`` to force the fallback (useful for
parity testing and on systems without a compiler). ``BACKEND`` reports which
implementation is active.
"""

import os

from . import _py

if os.environ.get("SPSIM_PURE_PYTHON") == "1":
    _impl = _py
    BACKEND = "python"
else:
    try:
        from . import _ext as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _py
        BACKEND = "python"

coincidence_histogram = _impl.coincidence_histogram
min_separation_filter = _impl.min_separation_filter
greedy_pairs = _impl.greedy_pairs

__all__ = [
    "BACKEND",
    "coincidence_histogram",
    "greedy_pairs",
    "min_separation_filter",
]
