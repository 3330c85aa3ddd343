"""Pure-numpy implementations of the numeric kernels.

Every function here has a loop-based twin in ``_kernels_numba`` with the same
signature and the same results up to floating point summation order.
"""
import numpy as np


def hockey_stick_logspace(logp, logq, eps):
    """Sum of max(P - e^eps Q, 0) over aligned log-mass arrays."""
    logp = np.asarray(logp, dtype=np.float64)
    logq = np.asarray(logq, dtype=np.float64)
    scaled = logq + eps
    mask = logp > scaled
    if not mask.any():
        return 0.0
    lp = logp[mask]
    diff = scaled[mask] - lp
    # exp(lp) * (1 - exp(diff)), with diff = -inf where Q has no mass
    return float(np.sum(np.exp(lp) * -np.expm1(diff)))


def smoothness_bad_mass(logp, eps, shift, tol):
    """Mass of Y with P(Y) / P(Y + shift) >= e^(|shift| eps).

    ``logp`` is indexed from the start of the support; positions outside
    the array have zero mass.  A zero denominator under a positive
    numerator counts as an infinite ratio.  ``tol`` widens the comparison
    in the conservative direction.
    """
    logp = np.asarray(logp, dtype=np.float64)
    size = logp.shape[0]
    shifted = np.full(size, -np.inf)
    if shift > 0:
        if shift < size:
            shifted[: size - shift] = logp[shift:]
    elif -shift < size:
        shifted[-shift:] = logp[: size + shift]
    live = logp > -np.inf
    threshold = abs(shift) * eps
    bad = live & ((shifted == -np.inf) | (logp - shifted >= threshold - tol))
    return float(np.sum(np.exp(logp[bad])))


def reachable_totals(allowed, n):
    """Boolean table of sums reachable by adding ``n`` values from ``allowed``."""
    allowed = np.asarray(allowed, dtype=np.int64)
    top = int(allowed.max()) * n if allowed.size else 0
    reach = np.zeros(top + 1, dtype=np.bool_)
    reach[0] = True
    for _ in range(n):
        nxt = np.zeros_like(reach)
        for v in allowed:
            if v == 0:
                nxt |= reach
            else:
                nxt[v:] |= reach[:-v]
        reach = nxt
    return reach


def faithful_bin_totals(rows, zmask):
    """Per-bin message totals from per-user data bins and padding draws.

    ``rows`` holds 1-indexed bins, ``zmask`` is an (n, d) boolean matrix of
    the users' Bernoulli padding bits.
    """
    d = zmask.shape[1]
    totals = zmask.sum(axis=0, dtype=np.int64)
    totals += np.bincount(np.asarray(rows, dtype=np.int64) - 1, minlength=d)[:d]
    return totals


def truncating_estimates(totals, n, p):
    """Apply the truncating binary-sum estimator to every bin total."""
    c = np.asarray(totals, dtype=np.float64) / n
    return np.where(c > 1.0, c - p, 0.0)


def convolve(a, b):
    return np.convolve(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))
