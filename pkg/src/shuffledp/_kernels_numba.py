"""numba-compiled kernels; see ``_kernels_numpy`` for the reference versions."""
import math

import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True)


@njit(**_OPTS)
def hockey_stick_logspace(logp, logq, eps):
    total = 0.0
    for i in range(logp.shape[0]):
        lp = logp[i]
        scaled = logq[i] + eps
        if lp > scaled:
            total += math.exp(lp) * -math.expm1(scaled - lp)
    return total


@njit(**_OPTS)
def smoothness_bad_mass(logp, eps, shift, tol):
    size = logp.shape[0]
    threshold = abs(shift) * eps
    mass = 0.0
    for i in range(size):
        lp = logp[i]
        if lp == -np.inf:
            continue
        j = i + shift
        if j < 0 or j >= size or logp[j] == -np.inf:
            mass += math.exp(lp)
        elif lp - logp[j] >= threshold - tol:
            mass += math.exp(lp)
    return mass


@njit(**_OPTS)
def reachable_totals(allowed, n):
    top = 0
    for v in allowed:
        if v > top:
            top = v
    top *= n
    reach = np.zeros(top + 1, dtype=np.bool_)
    reach[0] = True
    for _ in range(n):
        nxt = np.zeros(top + 1, dtype=np.bool_)
        for s in range(top + 1):
            if reach[s]:
                for v in allowed:
                    if s + v <= top:
                        nxt[s + v] = True
        reach = nxt
    return reach


@njit(**_OPTS)
def faithful_bin_totals(rows, zmask):
    n, d = zmask.shape
    totals = np.zeros(d, dtype=np.int64)
    for i in range(n):
        totals[rows[i] - 1] += 1
        for j in range(d):
            if zmask[i, j]:
                totals[j] += 1
    return totals


@njit(**_OPTS)
def truncating_estimates(totals, n, p):
    out = np.zeros(totals.shape[0])
    for j in range(totals.shape[0]):
        c = totals[j] / n
        if c > 1.0:
            out[j] = c - p
    return out


@njit(**_OPTS)
def convolve(a, b):
    out = np.zeros(a.shape[0] + b.shape[0] - 1)
    for i in range(a.shape[0]):
        if a[i] == 0.0:
            continue
        for j in range(b.shape[0]):
            out[i + j] += a[i] * b[j]
    return out
