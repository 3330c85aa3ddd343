"""Distributional problems solved through private support identification.

Samples come from the uniform distribution on an unknown ``h``-element
support.  Running the histogram protocol and keeping every bin estimated at
``(t + 1) / n`` or more recovers the support with probability 99/100 once
each element appears at least ``2t + 1`` times and every estimate is within
``t / n``.  Pointer chasing and multi-party pointer jumping reduce to this
with ``h = 2`` and ``h`` levels respectively; their rows are encoded as
integers of an enormous code space, so the data domain ``d`` is far larger
than ``n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import binom

from .core import Dataset, InvalidParamsError, ProtocolParams
from .hist import HistParams, aggregate_simulate, hist_execute
from .zsum import zsum_alpha

TARGET_FAILURE = 1.0 / 200


class RecoveryError(RuntimeError):
    """Support recovery returned a set that cannot be decoded into an instance."""


# -- support identification ---------------------------------------------------

@dataclass(frozen=True)
class SupportInstance:
    d: int
    support: frozenset

    def __post_init__(self):
        object.__setattr__(self, "support", frozenset(self.support))
        if not self.support or any(not 1 <= v <= self.d for v in self.support):
            raise ValueError("support must be a nonempty subset of [d]")

    @property
    def h(self) -> int:
        return len(self.support)

    def codes(self) -> list[int]:
        return sorted(self.support)

    @property
    def code_space(self) -> int:
        return self.d


def sample_instance(instance, count: int, rng: np.random.Generator) -> Dataset:
    """``count`` i.i.d. uniform draws from the instance's (encoded) support."""
    codes = instance.codes()
    picks = rng.integers(len(codes), size=count)
    rows = [codes[i] for i in picks.tolist()]
    if instance.code_space < 2**62:
        return Dataset(np.asarray(rows, dtype=np.int64), instance.code_space)
    return Dataset(np.array(rows, dtype=object), instance.code_space)


def default_threshold(params: ProtocolParams, h: int) -> int:
    """``t`` with every one of ``h`` occupied bins within ``t / n`` w.p. 199/200.

    ``n * zsum_alpha`` does not depend on ``n``, and only the ``h`` occupied
    bins can be wrong, so a per-bin failure rate of ``1 / (200 h)`` suffices.
    """
    alpha = zsum_alpha(params, TARGET_FAILURE / h)
    return math.ceil(params.n * alpha - 1e-9)


def required_samples(h: int, t: int) -> int:
    """Least ``n`` with ``h * Pr[Bin(n, 1/h) <= 2t] <= 1/200``.

    By a union bound every support element then appears at least ``2t + 1``
    times with probability at least 199/200.
    """
    if h < 1 or t < 0:
        raise ValueError("need h >= 1 and t >= 0")
    limit = TARGET_FAILURE / h

    def ok(n):
        return binom.cdf(2 * t, n, 1.0 / h) <= limit

    lo = 2 * t + 1
    if ok(lo):
        return lo
    hi = lo * 2
    while not ok(hi):
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def support_sample_size(epsilon: float, delta: float, h: int) -> tuple[int, int]:
    """(n, t) for support identification; n also meets the protocol's user bound."""
    probe = ProtocolParams(epsilon, delta, 10**9)
    t = default_threshold(probe, h)
    n = max(required_samples(h, t), math.ceil(probe.min_users()))
    return n, t


def solve_support(samples: Dataset, params: ProtocolParams, t: int,
                  rng: np.random.Generator, mode: str = "aggregate") -> set:
    """Bins whose histogram estimate is at least ``(t + 1) / n``."""
    hp = HistParams.from_params(params, samples.d)
    if mode == "aggregate":
        est = aggregate_simulate(samples.bin_counts(), hp, rng)
    else:
        est = hist_execute(samples, hp, rng, mode=mode)
    return select_support(est, params.n, t)


def select_support(est, n: int, t: int) -> set:
    """Bins estimated at ``(t + 1) / n`` or more (inclusive)."""
    cut = (t + 1) / n
    return {j for j, v in est.values.items() if v >= cut}


# -- pointer chasing ------------------------------------------------------------

def perm_rank(perm: Sequence[int]) -> int:
    """Lexicographic rank (0-based) of a permutation of 1..l."""
    ell = len(perm)
    remaining = list(range(1, ell + 1))
    rank = 0
    for i, v in enumerate(perm):
        pos = remaining.index(v)
        rank += pos * math.factorial(ell - 1 - i)
        remaining.pop(pos)
    return rank


def perm_unrank(rank: int, ell: int) -> tuple:
    remaining = list(range(1, ell + 1))
    out = []
    for i in range(ell):
        f = math.factorial(ell - 1 - i)
        pos, rank = divmod(rank, f)
        out.append(remaining.pop(pos))
    return tuple(out)


def _check_perm(perm, ell):
    if sorted(perm) != list(range(1, ell + 1)):
        raise ValueError(f"{perm} is not a permutation of 1..{ell}")


@dataclass(frozen=True)
class PCInstance:
    ell: int
    a: tuple
    b: tuple
    k: int = 2

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(self.a))
        object.__setattr__(self, "b", tuple(self.b))
        _check_perm(self.a, self.ell)
        _check_perm(self.b, self.ell)
        if self.k < 1:
            raise ValueError("k must be positive")

    @property
    def code_space(self) -> int:
        return 2 * math.factorial(self.ell)

    def encode(self, tag: int, perm) -> int:
        return (tag - 1) * math.factorial(self.ell) + perm_rank(perm) + 1

    def decode(self, code: int) -> tuple[int, tuple]:
        tag, rank = divmod(code - 1, math.factorial(self.ell))
        return tag + 1, perm_unrank(rank, self.ell)

    def codes(self) -> list[int]:
        return [self.encode(1, self.a), self.encode(2, self.b)]

    def answer(self) -> int:
        return chase_pointer(self.a, self.b, self.k)

    @classmethod
    def random(cls, ell: int, k: int, rng: np.random.Generator) -> "PCInstance":
        a = tuple((rng.permutation(ell) + 1).tolist())
        b = tuple((rng.permutation(ell) + 1).tolist())
        return cls(ell, a, b, k)


def chase_pointer(a: Sequence[int], b: Sequence[int], k: int) -> int:
    """k-th term of ``a_1, b_{a_1}, a_{b_{a_1}}, ...`` (1-indexed permutations)."""
    if k < 1:
        raise ValueError("k must be positive")
    value = a[0]
    for step in range(1, k):
        value = (b if step % 2 else a)[value - 1]
    return value


def solve_pc(samples: Dataset, params: ProtocolParams, instance: PCInstance, t: int,
             rng: np.random.Generator) -> int:
    """Recover the two permutations privately, then chase pointers.

    Only the instance's shape (``ell``, ``k``) is used, never its contents.
    """
    found = solve_support(samples, params, t, rng)
    if len(found) != 2:
        raise RecoveryError(f"recovered {len(found)} rows instead of 2")
    rows = dict(instance.decode(code) for code in found)
    if set(rows) != {1, 2}:
        raise RecoveryError(f"recovered tags {sorted(rows)} instead of [1, 2]")
    return chase_pointer(rows[1], rows[2], instance.k)


# -- multi-party pointer jumping ------------------------------------------------

@dataclass(frozen=True)
class MPJInstance:
    """Labels of a complete ``s``-ary tree; level ``i`` has ``s^(i-1)`` nodes."""

    s: int
    h: int
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(tuple(z) for z in self.labels))
        if self.s < 1 or self.h < 1 or len(self.labels) != self.h:
            raise ValueError("need s, h >= 1 and one label vector per level")
        for i, z in enumerate(self.labels, start=1):
            if len(z) != self.s ** (i - 1):
                raise ValueError(f"level {i} needs {self.s ** (i - 1)} labels, got {len(z)}")
            if any(not 0 <= v < self.s for v in z):
                raise ValueError(f"level {i} labels must lie in 0..{self.s - 1}")

    def _level_offset(self, level: int) -> int:
        return sum(self.s ** (self.s ** (i - 1)) for i in range(1, level))

    @property
    def code_space(self) -> int:
        return self._level_offset(self.h + 1)

    def encode(self, level: int, z: Sequence[int]) -> int:
        value = 0
        for v in z:
            value = value * self.s + v
        return self._level_offset(level) + value + 1

    def decode(self, code: int) -> tuple[int, tuple]:
        for level in range(1, self.h + 1):
            width = self.s ** (self.s ** (level - 1))
            start = self._level_offset(level)
            if code <= start + width:
                value = code - start - 1
                digits = []
                for _ in range(self.s ** (level - 1)):
                    value, r = divmod(value, self.s)
                    digits.append(r)
                return level, tuple(reversed(digits))
        raise ValueError(f"code {code} outside the code space")

    def codes(self) -> list[int]:
        return [self.encode(i, z) for i, z in enumerate(self.labels, start=1)]

    def answer(self) -> tuple:
        return chase_path(self.labels, self.s)

    @classmethod
    def random(cls, s: int, h: int, rng: np.random.Generator) -> "MPJInstance":
        return cls(s, h, tuple(tuple(rng.integers(s, size=s ** (i - 1)).tolist())
                               for i in range(1, h + 1)))


def chase_path(labels: Sequence[Sequence[int]], s: int) -> tuple:
    """Labels met along the root-leaf path.

    Nodes are 1-indexed within a level; a label ``v`` moves to child ``v + 1``
    of the current node.
    """
    node = 1
    path = []
    for z in labels:
        v = z[node - 1]
        path.append(v)
        node = (node - 1) * s + v + 1
    return tuple(path)


def solve_mpj(samples: Dataset, params: ProtocolParams, instance: MPJInstance, t: int,
              rng: np.random.Generator) -> tuple:
    """Recover every level's labels privately, order them by level, chase."""
    found = solve_support(samples, params, t, rng)
    if len(found) != instance.h:
        raise RecoveryError(f"recovered {len(found)} rows instead of {instance.h}")
    rows = dict(instance.decode(code) for code in found)
    if sorted(rows) != list(range(1, instance.h + 1)):
        raise RecoveryError(f"recovered levels {sorted(rows)}")
    return chase_path([rows[i] for i in range(1, instance.h + 1)], instance.s)


def success_rate(solver, answer, runs: int) -> int:
    """Count runs where ``solver(run)`` returns ``answer``; recovery errors count as failures."""
    wins = 0
    for r in range(runs):
        try:
            if solver(r) == answer:
                wins += 1
        except RecoveryError:
            pass
    return wins


def check_delta_for_support(delta: float, h: int):
    if not delta < (1.0 / (200 * h)) ** (1.0 / 25):
        raise InvalidParamsError(f"delta={delta} must be below (1/(200h))^(1/25) for h={h}")
