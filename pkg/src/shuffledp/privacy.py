"""Exact privacy verification for the binary-sum and histogram protocols.

The shuffled binary-sum protocol is equivalent, by post-processing, to
releasing ``-sum(x) + Bin(n, 1 - p)``.  Its tight delta at a given epsilon is
the hockey-stick divergence between that law and its unit shift, computed
here in log space.  The smoothness route bounds the same quantity through
the probability-ratio tail of the binomial noise.  A brute-force verifier
enumerates shuffled output laws of tiny protocols directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Mapping

import mpmath
import numpy as np
from scipy.stats import binom

from . import kernels
from .core import InvalidParamsError, ProtocolParams

MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Pmf:
    """Distribution over the integers ``offset, offset + 1, ...`` in log space."""

    offset: int
    logmass: np.ndarray

    def __post_init__(self):
        logmass = np.asarray(self.logmass, dtype=np.float64)
        if logmass.ndim != 1 or logmass.size == 0:
            raise ValueError("logmass must be a non-empty vector")
        if np.isnan(logmass).any() or (logmass > 1e-12).any():
            raise ValueError("log masses must be finite or -inf and at most 0")
        total = float(np.exp(logmass).sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {total!r}, not 1")
        object.__setattr__(self, "logmass", logmass)

    @classmethod
    def from_probs(cls, probs, offset: int = 0) -> "Pmf":
        probs = np.asarray(probs, dtype=np.float64)
        if (probs < 0).any():
            raise ValueError("negative probability mass")
        with np.errstate(divide="ignore"):
            return cls(offset, np.log(probs))

    @classmethod
    def point(cls, value: int) -> "Pmf":
        return cls(value, np.zeros(1))

    @property
    def size(self) -> int:
        return int(self.logmass.shape[0])

    @property
    def support(self) -> range:
        return range(self.offset, self.offset + self.size)

    def probs(self) -> np.ndarray:
        return np.exp(self.logmass)

    def prob(self, y: int) -> float:
        i = y - self.offset
        return float(np.exp(self.logmass[i])) if 0 <= i < self.size else 0.0

    def shift(self, k: int) -> "Pmf":
        return Pmf(self.offset + k, self.logmass)

    def as_dict(self) -> dict:
        return {y: float(m) for y, m in zip(self.support, self.probs()) if m > 0}


def align(P: Pmf, Q: Pmf) -> tuple[np.ndarray, np.ndarray, int]:
    """Both log-mass vectors padded with -inf onto their joint support."""
    lo = min(P.offset, Q.offset)
    hi = max(P.offset + P.size, Q.offset + Q.size)
    out = []
    for D in (P, Q):
        arr = np.full(hi - lo, -np.inf)
        arr[D.offset - lo: D.offset - lo + D.size] = D.logmass
        out.append(arr)
    return out[0], out[1], lo


def binomial_pmf(n: int, q: float) -> Pmf:
    """``Bin(n, q)`` in log space."""
    if n < 0 or not 0.0 <= q <= 1.0:
        raise ValueError(f"invalid binomial parameters n={n}, q={q}")
    if q == 0.0:
        return Pmf.point(0)
    if q == 1.0:
        return Pmf.point(n)
    k = np.arange(n + 1)
    mass = binom.pmf(k, n, q)
    # log-gamma sums lose ~1e-10 of total mass at n ~ 1e5; the direct pmf does not.
    # logpmf is only used where the mass underflows.
    with np.errstate(divide="ignore"):
        logmass = np.where(mass > 0, np.log(mass), binom.logpmf(k, n, q))
    return Pmf(0, logmass)


def hockey_stick(P: Pmf, Q: Pmf, epsilon: float) -> float:
    """Tight delta for the ordered pair: ``sum_y max(P(y) - e^eps Q(y), 0)``."""
    logp, logq, _ = align(P, Q)
    return min(1.0, max(0.0, kernels.hockey_stick_logspace(logp, logq, epsilon)))


@dataclass(frozen=True)
class PrivacyReport:
    epsilon_target: float
    delta_target: float
    delta_achieved: float
    direction: str
    method: str

    @property
    def passed(self) -> bool:
        return self.delta_achieved <= self.delta_target


def noise_rate(params: ProtocolParams) -> float:
    """``1 - p``, the success rate of the negated binomial noise."""
    params.check()
    return 50.0 * math.log(2.0 / params.delta) / (params.epsilon**2 * params.n)


def shifted_binomial_delta(n: int, q: float, epsilon: float) -> tuple[float, str]:
    """Worst-direction hockey-stick delta between ``Bin(n, q)`` and its unit shift.

    Neighboring binary datasets change the sum by one, and the divergence is
    shift invariant, so comparing the noise with itself shifted by one
    covers every neighboring pair.
    """
    noise = binomial_pmf(n, q)
    moved = noise.shift(-1)
    forward = hockey_stick(noise, moved, epsilon)
    backward = hockey_stick(moved, noise, epsilon)
    if forward >= backward:
        return forward, "x vs x'"
    return backward, "x' vs x"


def shifted_binomial_delta_mp(n: int, q: float, epsilon: float, dps: int = 34) -> float:
    """Extended-precision twin of :func:`shifted_binomial_delta` (mpmath)."""
    with mpmath.workdps(dps):
        q, eps = mpmath.mpf(q), mpmath.mpf(epsilon)
        if q == 0 or q == 1:
            return 1.0
        ln_q, ln_1q = mpmath.log(q), mpmath.log1p(-q)
        lg = [mpmath.loggamma(k + 1) for k in range(n + 1)]
        masses = [mpmath.exp(lg[n] - lg[k] - lg[n - k] + k * ln_q + (n - k) * ln_1q)
                  for k in range(n + 1)]
        scale = mpmath.exp(eps)

        def mass(y):
            return masses[y] if 0 <= y <= n else mpmath.mpf(0)

        best = mpmath.mpf(0)
        for step in (1, -1):
            total = mpmath.mpf(0)
            for y in range(-1, n + 2):
                gap = mass(y) - scale * mass(y + step)
                if gap > 0:
                    total += gap
            best = max(best, total)
        return float(min(best, 1))


def zsum_privacy_delta(params: ProtocolParams, epsilon_target: float | None = None, *,
                       precision: str = "double") -> PrivacyReport:
    """Exact delta of the shuffled binary-sum protocol at ``epsilon_target``."""
    eps = params.epsilon if epsilon_target is None else epsilon_target
    q = noise_rate(params)
    if precision == "double":
        delta, direction = shifted_binomial_delta(params.n, q, eps)
    elif precision == "high":
        delta, direction = shifted_binomial_delta_mp(params.n, q, eps), "max"
    else:
        raise ValueError(f"unknown precision {precision!r}")
    return PrivacyReport(eps, params.delta, delta, direction, "exact-divergence")


def smoothness_min_delta(D: Pmf, epsilon: float, k: int) -> float:
    """Smallest delta for which ``D`` is (epsilon, delta, k)-smooth.

    Shifts ``k'`` range over ``[-k, k]`` without 0.  Y is bad for ``k'`` when
    ``P(Y) / P(Y + k') >= e^(|k'| epsilon)``, counting a zero denominator as
    an infinite ratio.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    worst = 0.0
    for shift in range(-k, k + 1):
        if shift:
            worst = max(worst, kernels.smoothness_bad_mass(D.logmass, epsilon, shift))
    return min(1.0, worst)


def binomial_smoothness_bound(n: int, gamma: float, alpha: float, k: int = 1) -> tuple[float, float]:
    """Smoothness parameters guaranteed for ``Bin(n, gamma)`` at shift radius ``k``.

    Returns ``(ln((1+alpha)/(1-alpha)), exp(-a^2 g n/8) + exp(-a^2 g n/(8+2a)))``
    unclamped.  At ``alpha == 0`` the bound is vacuous (delta = 2), holds for
    any distribution, and the shift-radius condition is not checked.
    """
    if not 0.0 <= gamma <= 0.5:
        raise InvalidParamsError(f"gamma={gamma} outside [0, 1/2]")
    if not 0.0 <= alpha < 1.0:
        raise InvalidParamsError(f"alpha={alpha} outside [0, 1)")
    if alpha > 0 and k > alpha * gamma * n / 2:
        raise InvalidParamsError(f"k={k} exceeds alpha*gamma*n/2={alpha * gamma * n / 2:.4g}")
    eps = math.log((1 + alpha) / (1 - alpha))
    x = alpha**2 * gamma * n
    return eps, math.exp(-x / 8) + math.exp(-x / (8 + 2 * alpha))


@dataclass(frozen=True)
class MnegCheck:
    """Both verification routes for the negated binomial release."""

    params: ProtocolParams
    gamma: float
    alpha: float
    bound_epsilon: float
    bound_delta: float
    smooth: PrivacyReport
    exact: PrivacyReport

    @property
    def smoothness_passed(self) -> bool:
        return (self.smooth.delta_achieved <= min(1.0, self.bound_delta)
                and self.bound_delta <= self.params.delta)

    @property
    def passed(self) -> bool:
        return self.smoothness_passed and self.exact.passed


def mneg_privacy_check(params: ProtocolParams) -> MnegCheck:
    gamma = noise_rate(params)
    eps = params.epsilon
    alpha = math.tanh(eps / 2)  # (e^eps - 1) / (e^eps + 1)
    bound_eps, bound_delta = binomial_smoothness_bound(params.n, gamma, alpha, 1)
    smooth_delta = smoothness_min_delta(binomial_pmf(params.n, gamma), eps, 1)
    smooth = PrivacyReport(eps, params.delta, smooth_delta, "both", "smoothness-bound")
    return MnegCheck(params, gamma, alpha, bound_eps, bound_delta, smooth,
                     zsum_privacy_delta(params, eps))


# -- brute force over tiny shuffled protocols ---------------------------------

def _normalize_law(randomizer_law) -> tuple[list, list, dict]:
    """Inputs, message alphabet and per-input count-vector laws."""
    inputs = sorted(randomizer_law)
    alphabet = sorted({m for x in inputs for vec in randomizer_law[x] for m in vec})
    index = {m: i for i, m in enumerate(alphabet)}
    per_input = {}
    for x in inputs:
        dist: dict = {}
        total = 0.0
        for vec, prob in randomizer_law[x].items():
            if prob < 0:
                raise ValueError("negative probability in randomizer law")
            if prob == 0:
                continue
            counts = [0] * len(alphabet)
            for m in vec:
                counts[index[m]] += 1
            key = tuple(counts)
            dist[key] = dist.get(key, 0.0) + prob
            total += prob
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"law for input {x!r} sums to {total}")
        per_input[x] = dist
    return inputs, alphabet, per_input


def convolve_laws(a: Mapping, b: Mapping) -> dict:
    """Law of the sum of independent count vectors."""
    out: dict = {}
    for ka, pa in a.items():
        for kb, pb in b.items():
            key = tuple(i + j for i, j in zip(ka, kb))
            out[key] = out.get(key, 0.0) + pa * pb
    return out


class ShuffledLaws:
    """Exact shuffled output laws, keyed by how many users hold each input.

    Outputs are count vectors over the sorted message alphabet, which is the
    full information a uniformly permuted message vector carries.
    """

    def __init__(self, randomizer_law, budget: int = 2_000_000):
        self.inputs, self.alphabet, self.per_input = _normalize_law(randomizer_law)
        self.budget = budget
        self._law = lru_cache(maxsize=None)(self._compute)

    def law(self, input_counts) -> dict:
        return self._law(tuple(input_counts))

    def _compute(self, counts: tuple) -> dict:
        if sum(counts) == 0:
            return {(0,) * len(self.alphabet): 1.0}
        a = next(i for i, c in enumerate(counts) if c)
        rest = list(counts)
        rest[a] -= 1
        prev = self._law(tuple(rest))
        step = self.per_input[self.inputs[a]]
        if len(prev) * len(step) > self.budget:
            raise EnumerationBudgetError(f"state space {len(prev) * len(step)} over budget")
        return convolve_laws(prev, step)


class EnumerationBudgetError(RuntimeError):
    pass


def dict_hockey_stick(P: Mapping, Q: Mapping, epsilon: float) -> float:
    scale = math.exp(epsilon)
    return math.fsum(max(P.get(y, 0.0) - scale * Q.get(y, 0.0), 0.0)
                     for y in set(P) | set(Q))


def compositions(n: int, parts: int):
    """All tuples of ``parts`` nonnegative integers summing to ``n``."""
    for head in product(range(n + 1), repeat=parts - 1):
        s = sum(head)
        if s <= n:
            yield head + (n - s,)


def neighbor_pairs(n: int, parts: int):
    """Input-count vectors of every neighboring dataset pair, both orders."""
    for c in compositions(n, parts):
        for a in range(parts):
            if c[a] == 0:
                continue
            for b in range(parts):
                if b != a:
                    other = list(c)
                    other[a] -= 1
                    other[b] += 1
                    yield c, tuple(other)


def brute_force_shuffled_dp(randomizer_law, n: int, epsilon: float, *,
                            max_users: int = 8) -> float:
    """Worst-case delta at ``epsilon`` of ``S o R`` over all neighboring datasets.

    Datasets are reduced to per-input counts since the shuffled output law
    is invariant to reordering the users.
    """
    if n > max_users:
        raise EnumerationBudgetError(f"n={n} exceeds the enumeration limit {max_users}")
    laws = ShuffledLaws(randomizer_law)
    worst = 0.0
    for c, other in neighbor_pairs(n, len(laws.inputs)):
        worst = max(worst, dict_hockey_stick(laws.law(c), laws.law(other), epsilon))
    return min(1.0, worst)
