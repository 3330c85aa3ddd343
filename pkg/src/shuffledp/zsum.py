"""Two-message binary-sum protocol with a truncating analyzer.

Each user with bit ``x`` sends ``x + z`` copies of the message ``1`` where
``z ~ Ber(p)``.  The analyzer only needs the message count: with
``c = count / n`` it outputs ``c - p`` when ``c > 1`` and ``0`` otherwise, so
an all-zero input is always reported as exactly zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .core import (
    Dataset,
    InvalidParamsError,
    MalformedTranscriptError,
    ProtocolParams,
    as_multiset,
)


def compute_p(params: ProtocolParams) -> float:
    """Bernoulli padding probability ``1 - 50 ln(2/delta) / (epsilon^2 n)``."""
    params.check()
    return 1.0 - 50.0 / (params.epsilon**2 * params.n) * math.log(2.0 / params.delta)


@dataclass(frozen=True)
class ZsumParams:
    """Protocol parameters together with the padding probability.

    Use :meth:`from_params` for the protocol's own ``p``.  Constructing the
    class directly with an arbitrary ``p`` is meant for small-``n`` exact
    checks, where the user-count bound cannot hold.
    """

    base: ProtocolParams
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise InvalidParamsError(f"padding probability p={self.p} outside [0, 1]")

    @classmethod
    def from_params(cls, params: ProtocolParams) -> "ZsumParams":
        return cls(params, compute_p(params))

    @property
    def n(self) -> int:
        return self.base.n


def zsum_randomize(x: int, zp: ZsumParams, rng: np.random.Generator | None = None,
                   z: int | None = None) -> tuple:
    """Message vector of one user; ``z`` forces the padding bit."""
    if x not in (0, 1):
        raise ValueError(f"binary-sum input must be 0 or 1, got {x!r}")
    if z is None:
        z = int(rng.random() < zp.p)
    return (1,) * (x + z)


def zsum_analyze(total: int, zp: ZsumParams) -> float:
    """Estimate the normalized sum from the total number of messages."""
    n = zp.n
    if total < 0 or total > 2 * n:
        raise MalformedTranscriptError(f"message count {total} outside [0, 2n={2 * n}]")
    c = total / n
    return c - zp.p if c > 1.0 else 0.0


def zsum_analyze_messages(messages, zp: ZsumParams) -> float:
    """Analyzer over shuffled messages (multiset or permuted tuple)."""
    ms = as_multiset(messages)
    extra = [v for v in ms.values() if v != 1]
    if extra:
        raise MalformedTranscriptError(f"unexpected message values {extra}")
    return zsum_analyze(ms.total, zp)


def zsum_alpha(params: ProtocolParams, beta: float) -> float:
    """Error bound holding with probability at least ``1 - beta``."""
    eps, delta, n = params.epsilon, params.delta, params.n
    if beta < delta**25:
        raise InvalidParamsError(f"beta={beta} below delta^25={delta**25:.3e}")
    if beta > 1 or beta <= 0:
        raise InvalidParamsError(f"beta={beta} outside (0, 1]")
    log_d = math.log(2.0 / delta)
    return 50.0 / (eps**2 * n) * log_d + math.sqrt(200.0 * log_d * math.log(2.0 / beta)) / (eps * n)


def zsum_randomizer(zp: ZsumParams):
    """Randomizer callable for :func:`shuffledp.core.execute_shuffled`."""
    return lambda x, rng: zsum_randomize(x, zp, rng)


def zsum_analyzer(zp: ZsumParams):
    return lambda messages: zsum_analyze_messages(messages, zp)


def zsum_run(dataset: Dataset, zp: ZsumParams, rng: np.random.Generator,
             trials: int = 1, mode: str = "faithful") -> np.ndarray:
    """Vectorized repeated executions on a fixed binary dataset.

    ``faithful`` draws every user's padding bit; ``aggregate`` draws the
    total padding directly from ``Bin(n, p)``.  Both give identically
    distributed outputs.
    """
    n = zp.n
    if dataset.n != n:
        raise InvalidParamsError(f"dataset has {dataset.n} rows but n={n}")
    data_sum = int(dataset.rows.sum())
    if mode == "faithful":
        padding = np.empty(trials, dtype=np.int64)
        chunk = max(1, 2_000_000 // max(n, 1))
        for start in range(0, trials, chunk):
            stop = min(trials, start + chunk)
            padding[start:stop] = (rng.random((stop - start, n)) < zp.p).sum(axis=1)
    elif mode == "aggregate":
        padding = rng.binomial(n, zp.p, size=trials)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    c = (data_sum + padding) / n
    return np.where(c > 1.0, c - zp.p, 0.0)


def total_count_pmf(data_sum: int, zp: ZsumParams) -> np.ndarray:
    """Exact law of the message count, indexed 0..2n (``data_sum + Bin(n, p)``)."""
    n = zp.n
    out = np.zeros(2 * n + 1)
    out[data_sum: data_sum + n + 1] = binom.pmf(np.arange(n + 1), n, zp.p)
    return out

