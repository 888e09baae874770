"""Kernel dispatch: compiled ``_ckernels`` when importable, else ``_pykernels``.

Set ``EXTPOS_PURE_PYTHON=1`` to force the fallback. ``BACKEND`` names the active one.
"""
import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("EXTPOS_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"


def backends():
    """Mapping of every importable backend name to its module."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def simulate(A, B, C, x0, U, impl=None):
    impl = impl or _impl
    return impl.simulate(_c(A), _c(B), _c(C), _c(x0), _c(U))


def run_feedback(A, B, C, K, x0, seed_u, z_ss, u_ss, steps, n, impl=None):
    impl = impl or _impl
    return impl.run_feedback(
        _c(A), _c(B), _c(C), _c(K), _c(x0), _c(seed_u), _c(z_ss), _c(u_ss), int(steps), int(n)
    )


def markov(A, B, C, count, impl=None):
    impl = impl or _impl
    return impl.markov(_c(A), _c(B), _c(C), int(count))
