"""Backend selection for the hot numeric kernels.

numba kernels are used when numba imports cleanly, unless the environment
variable ``SHUFFLEDP_DISABLE_NUMBA`` is set to a non-empty value other than
``0``.  The choice is made once at import time.
"""
import os

import numpy as np

from . import _kernels_numpy

_NAMES = (
    "hockey_stick_logspace",
    "smoothness_bad_mass",
    "reachable_totals",
    "faithful_bin_totals",
    "truncating_estimates",
    "convolve",
)


def _numba_requested():
    flag = os.environ.get("SHUFFLEDP_DISABLE_NUMBA", "")
    return flag in ("", "0")


def load_backend(name):
    """Return the kernel module for ``"numba"`` or ``"numpy"``."""
    if name == "numpy":
        return _kernels_numpy
    if name == "numba":
        from . import _kernels_numba

        return _kernels_numba
    raise ValueError(f"unknown kernel backend {name!r}")


BACKEND = "numpy"
_impl = _kernels_numpy
if _numba_requested():
    try:
        _impl = load_backend("numba")
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass


def hockey_stick_logspace(logp, logq, eps):
    return float(_impl.hockey_stick_logspace(
        np.ascontiguousarray(logp, dtype=np.float64),
        np.ascontiguousarray(logq, dtype=np.float64),
        float(eps),
    ))


def smoothness_bad_mass(logp, eps, shift, tol=1e-12):
    return float(_impl.smoothness_bad_mass(
        np.ascontiguousarray(logp, dtype=np.float64), float(eps), int(shift), float(tol)
    ))


def reachable_totals(allowed, n):
    return _impl.reachable_totals(np.ascontiguousarray(allowed, dtype=np.int64), int(n))


def faithful_bin_totals(rows, zmask):
    return _impl.faithful_bin_totals(
        np.ascontiguousarray(rows, dtype=np.int64), np.ascontiguousarray(zmask, dtype=np.bool_)
    )


def truncating_estimates(totals, n, p):
    return _impl.truncating_estimates(
        np.ascontiguousarray(totals, dtype=np.int64), int(n), float(p)
    )


def convolve(a, b):
    return _impl.convolve(
        np.ascontiguousarray(a, dtype=np.float64), np.ascontiguousarray(b, dtype=np.float64)
    )
