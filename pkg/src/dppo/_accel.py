"""Kernel dispatch between numba-compiled loops and plain numpy.

Set ``DPPO_NUMBA=0`` to force the numpy fallback (useful for debugging and
for the kernel benchmark). Both paths perform the same floating point
operations in the same order; they agree bit-for-bit except where a libm
transcendental (sin/cos) rounds differently in the last place. Within one
path every run is bit-reproducible.
"""
from __future__ import annotations

import os

_flag = os.environ.get("DPPO_NUMBA", "1").strip().lower()
WANT_NUMBA = _flag not in ("0", "false", "no", "off")

try:
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False
    _njit = None

USE_NUMBA = WANT_NUMBA and HAS_NUMBA


def kernel(fallback):
    """Pair a loop kernel with its numpy fallback.

    Usage::

        @kernel(numpy_version)
        def loop_version(...): ...

    Returns the compiled loop version when numba is enabled, otherwise the
    numpy version. Both stay reachable as ``.jit`` / ``.py`` attributes on
    the returned callable for benchmarking and cross-checks.
    """

    def wrap(loop_impl):
        compiled = _njit(cache=False)(loop_impl) if HAS_NUMBA else loop_impl
        chosen = compiled if USE_NUMBA else fallback
        chosen.jit = compiled
        chosen.py = fallback
        return chosen

    return wrap
