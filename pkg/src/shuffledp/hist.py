"""Histogram protocol built from one binary-sum instance per bin.

A user holding ``x`` in [d] runs the binary-sum randomizer on every
indicator bit ``1[x == j]`` and tags the resulting messages with ``j``.  The
analyzer splits the shuffled messages by tag and applies the truncating
binary-sum estimator to each bin.  Bins nobody holds never exceed ``n``
messages, so they are reported as exactly zero and the simultaneous error
does not depend on ``d``.

Besides the faithful per-user execution there is an aggregate mode drawing
each bin total as ``count_j + Bin(n, p)`` directly, and a k-ary randomized
response baseline for the local model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .core import (
    Dataset,
    InvalidParamsError,
    MalformedTranscriptError,
    ProtocolParams,
    as_multiset,
)
from .zsum import ZsumParams, zsum_analyze

FAITHFUL_BUDGET = 10**7


@dataclass(frozen=True)
class HistParams:
    d: int
    zsum: ZsumParams

    def __post_init__(self):
        if self.d < 1:
            raise InvalidParamsError(f"domain size d={self.d} must be positive")

    @classmethod
    def from_params(cls, params: ProtocolParams, d: int) -> "HistParams":
        return cls(d, ZsumParams.from_params(params))

    @property
    def n(self) -> int:
        return self.zsum.n

    @property
    def p(self) -> float:
        return self.zsum.p

    def guarantee(self) -> tuple[float, float]:
        """(epsilon, delta) of the whole protocol, by two-fold composition."""
        base = self.zsum.base
        return 2 * base.epsilon, 2 * base.delta


@dataclass(frozen=True)
class HistogramEstimate:
    """Length-``d`` estimate vector stored sparsely; absent bins are 0."""

    d: int
    values: Mapping = field(default_factory=dict)

    def __getitem__(self, j) -> float:
        if not 1 <= j <= self.d:
            raise IndexError(f"bin {j} outside [1, {self.d}]")
        return self.values.get(j, 0.0)

    def nonzero(self) -> dict:
        return {j: v for j, v in self.values.items() if v != 0.0}

    def dense(self) -> np.ndarray:
        out = np.zeros(self.d)
        for j, v in self.values.items():
            out[j - 1] = v
        return out

    @classmethod
    def from_dense(cls, values: Sequence[float]) -> "HistogramEstimate":
        arr = np.asarray(values, dtype=np.float64)
        idx = np.flatnonzero(arr)
        return cls(arr.shape[0], dict(zip((idx + 1).tolist(), arr[idx].tolist())))


@dataclass(frozen=True)
class TrueHistogram:
    d: int
    frequencies: Mapping = field(default_factory=dict)

    def __getitem__(self, j) -> float:
        if not 1 <= j <= self.d:
            raise IndexError(f"bin {j} outside [1, {self.d}]")
        return self.frequencies.get(j, 0.0)

    def dense(self) -> np.ndarray:
        out = np.zeros(self.d)
        for j, v in self.frequencies.items():
            out[j - 1] = v
        return out


def true_histogram(dataset: Dataset) -> TrueHistogram:
    n = dataset.n
    return TrueHistogram(dataset.d, {j: c / n for j, c in dataset.bin_counts().items()})


def per_query_error(est: HistogramEstimate, truth: TrueHistogram, j) -> float:
    _same_domain(est, truth)
    return abs(est[j] - truth[j])


def simultaneous_error(est: HistogramEstimate, truth: TrueHistogram) -> float:
    _same_domain(est, truth)
    bins = set(est.values) | set(truth.frequencies)
    return max((abs(est[j] - truth[j]) for j in bins), default=0.0)


def _same_domain(est, truth):
    if est.d != truth.d:
        raise ValueError(f"dimension mismatch: estimate d={est.d}, truth d={truth.d}")


# -- faithful protocol -------------------------------------------------------

def hist_randomize(x: int, hp: HistParams, rng: np.random.Generator | None = None,
                   z: Sequence[int] | None = None) -> tuple:
    """Message vector of one user; ``z`` forces the d padding bits."""
    d = hp.d
    if not 1 <= x <= d:
        raise ValueError(f"input {x!r} outside [1, {d}]")
    if z is None:
        z = rng.random(d) < hp.p
    elif len(z) != d:
        raise ValueError(f"need {d} padding bits, got {len(z)}")
    out = []
    for j in range(1, d + 1):
        out.extend([j] * (int(x == j) + int(z[j - 1])))
    return tuple(out)


def hist_analyze(shuffled, hp: HistParams) -> HistogramEstimate:
    """Per-bin truncating estimates from shuffled tagged messages."""
    ms = as_multiset(shuffled)
    values = {}
    for j, count in ms.items:
        if not (isinstance(j, (int, np.integer)) and 1 <= j <= hp.d):
            raise MalformedTranscriptError(f"message value {j!r} outside [1, {hp.d}]")
        est = zsum_analyze(count, hp.zsum)
        if est != 0.0:
            values[j] = est
    return HistogramEstimate(hp.d, values)


def hist_randomizer(hp: HistParams):
    return lambda x, rng: hist_randomize(x, hp, rng)


def hist_analyzer(hp: HistParams):
    return lambda messages: hist_analyze(messages, hp)


def hist_randomizer_law(hp: HistParams) -> dict:
    """Exact law of each input's message vector; enumerates 2^d padding patterns."""
    if hp.d > 12:
        raise ValueError("randomizer law enumeration limited to d <= 12")
    p = hp.p
    law = {}
    for x in range(1, hp.d + 1):
        dist: dict = {}
        for z in product((0, 1), repeat=hp.d):
            prob = math.prod(p if b else 1.0 - p for b in z)
            if prob == 0.0:
                continue
            vec = hist_randomize(x, hp, z=z)
            dist[vec] = dist.get(vec, 0.0) + prob
        law[x] = dist
    return law


def faithful_totals(dataset: Dataset, hp: HistParams, rng: np.random.Generator) -> np.ndarray:
    """Per-bin message counts from materialized per-user padding draws."""
    if dataset.n != hp.n or dataset.d != hp.d:
        raise InvalidParamsError("dataset does not match histogram parameters")
    if hp.n * hp.d > FAITHFUL_BUDGET:
        raise InvalidParamsError(
            f"faithful mode needs n*d <= {FAITHFUL_BUDGET}, got {hp.n * hp.d}; use aggregate mode"
        )
    zmask = rng.random((hp.n, hp.d)) < hp.p
    return kernels.faithful_bin_totals(dataset.rows, zmask)


def faithful_simulate(dataset: Dataset, hp: HistParams, rng: np.random.Generator,
                      trials: int = 1) -> np.ndarray:
    """Dense ``(trials, d)`` estimates from faithful executions."""
    out = np.empty((trials, hp.d))
    for t in range(trials):
        out[t] = kernels.truncating_estimates(faithful_totals(dataset, hp, rng), hp.n, hp.p)
    return out


# -- aggregate mode ------------------------------------------------------------

def _count_map(true_counts, d: int) -> dict:
    if isinstance(true_counts, Mapping):
        counts = {int(j): int(c) for j, c in true_counts.items() if c}
        for j in counts:
            if not 1 <= j <= d:
                raise InvalidParamsError(f"bin {j} outside [1, {d}]")
        return counts
    arr = np.asarray(true_counts, dtype=np.int64)
    if arr.shape != (d,):
        raise InvalidParamsError(f"dense counts need length d={d}, got shape {arr.shape}")
    idx = np.flatnonzero(arr)
    return dict(zip((idx + 1).tolist(), arr[idx].tolist()))


def aggregate_simulate(true_counts, hp: HistParams, rng: np.random.Generator, *,
                       zero_rng: np.random.Generator | None = None) -> HistogramEstimate:
    """One execution drawn from the exact law of the per-bin message totals.

    Occupied bins are sampled in increasing bin order from ``rng``, so two
    domains sharing the same occupied bins and seed give identical
    estimates there.  Empty bins can never exceed ``n`` messages, so their
    estimate is exactly 0; pass ``zero_rng`` to draw and analyze them anyway
    (cost O(d)).
    """
    n, p, d = hp.n, hp.p, hp.d
    counts = _count_map(true_counts, d)
    if any(c < 0 for c in counts.values()) or sum(counts.values()) != n:
        raise InvalidParamsError(f"bin counts must be nonnegative and sum to n={n}")
    bins = sorted(counts)
    occupied = np.fromiter((counts[j] for j in bins), dtype=np.int64, count=len(bins))
    totals = occupied + rng.binomial(n, p, size=len(bins))
    est = kernels.truncating_estimates(totals, n, p)
    values = {j: float(v) for j, v in zip(bins, est) if v != 0.0}
    if zero_rng is not None:
        empty = d - len(bins)
        if empty > 0:
            zero_est = kernels.truncating_estimates(zero_rng.binomial(n, p, size=empty), n, p)
            hits = np.flatnonzero(zero_est)
            if hits.size:
                occupied_idx = np.asarray(bins, dtype=np.int64) - 1
                empty_bins = np.setdiff1d(np.arange(d), occupied_idx) + 1
                for k in hits:
                    values[int(empty_bins[k])] = float(zero_est[k])
    return HistogramEstimate(d, values)


def aggregate_totals(dataset: Dataset, hp: HistParams, rng: np.random.Generator) -> np.ndarray:
    """Dense per-bin totals ``count_j + Bin(n, p)``."""
    counts = np.bincount(dataset.rows.astype(np.int64) - 1, minlength=hp.d)[: hp.d]
    return counts + rng.binomial(hp.n, hp.p, size=hp.d)


def hist_execute(dataset: Dataset, hp: HistParams, rng: np.random.Generator,
                 mode: str = "aggregate") -> HistogramEstimate:
    if mode == "faithful":
        totals = faithful_totals(dataset, hp, rng)
        return HistogramEstimate.from_dense(kernels.truncating_estimates(totals, hp.n, hp.p))
    if mode == "aggregate":
        return aggregate_simulate(dataset.bin_counts(), hp, rng)
    raise ValueError(f"unknown mode {mode!r}")


# -- local baseline ------------------------------------------------------------

def _rr_keep(eps: float, d: int) -> float:
    return 1.0 if d == 1 else math.exp(eps) / (math.exp(eps) + d - 1)


def local_rr_randomize(x: int, eps: float, d: int, rng: np.random.Generator) -> int:
    """k-ary randomized response: keep ``x`` w.p. e^eps/(e^eps + d - 1)."""
    if eps <= 0:
        raise InvalidParamsError("randomized response needs epsilon > 0")
    if not 1 <= x <= d:
        raise ValueError(f"input {x!r} outside [1, {d}]")
    if d == 1 or rng.random() < _rr_keep(eps, d):
        return x
    other = int(rng.integers(1, d))
    return other if other < x else other + 1


def local_rr_randomize_batch(rows, eps: float, d: int, rng: np.random.Generator) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    if eps <= 0:
        raise InvalidParamsError("randomized response needs epsilon > 0")
    if d == 1:
        return rows.copy()
    keep = rng.random(rows.shape[0]) < _rr_keep(eps, d)
    other = rng.integers(1, d, size=rows.shape[0])
    other = np.where(other < rows, other, other + 1)
    return np.where(keep, rows, other)


def local_rr_invert(counts, eps: float, n: int) -> np.ndarray:
    """Unbiased frequency estimates from per-value response counts."""
    counts = np.asarray(counts, dtype=np.float64)
    d = counts.shape[0]
    if d == 1:
        return counts / n
    keep = _rr_keep(eps, d)
    flip = (1.0 - keep) / (d - 1)
    return (counts / n - flip) / (keep - flip)


def local_rr_estimates(messages, eps: float, d: int, n: int | None = None) -> np.ndarray:
    messages = np.asarray(messages, dtype=np.int64)
    n = messages.shape[0] if n is None else n
    return local_rr_invert(np.bincount(messages - 1, minlength=d)[:d], eps, n)


def local_rr_analyze(messages, eps: float, d: int, n: int | None = None) -> HistogramEstimate:
    return HistogramEstimate.from_dense(local_rr_estimates(messages, eps, d, n))


def local_rr_expected_counts(freqs: Sequence[float], eps: float, n: int) -> np.ndarray:
    """Expected response counts for a true frequency vector."""
    f = np.asarray(freqs, dtype=np.float64)
    d = f.shape[0]
    if d == 1:
        return f * n
    keep = _rr_keep(eps, d)
    flip = (1.0 - keep) / (d - 1)
    return n * (flip + (keep - flip) * f)
