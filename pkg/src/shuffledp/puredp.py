"""Pure differential privacy and single-message shuffled protocols.

A single-message shuffled protocol can be run locally: the analyzer
permutes the messages itself before running the shuffled analyzer.  Two
multi-message randomizers show why this does not extend further:
``r_infinity`` sends ``(x, 1 - x)``, so its shuffled output never depends on
the data although each message vector reveals ``x``; ``r_gap`` sends four
bits and can never send exactly two ones on input 1, which only the
shuffled sum over at least two users hides.
"""
from __future__ import annotations

import math
from collections.abc import Mapping as MappingABC
from dataclasses import dataclass
from itertools import permutations, product
from typing import Callable, Iterable, Mapping

import numpy as np

from . import kernels
from .core import make_rng
from .privacy import ShuffledLaws, MASS_TOL, Pmf, neighbor_pairs


class MultiMessageError(ValueError):
    """Raised when a randomizer is required to send exactly one message."""


class FiniteRandomizerLaw(MappingABC):
    """Explicit law of a randomizer: input -> {message vector: probability}."""

    def __init__(self, laws: Mapping):
        self.laws = {x: {tuple(v): float(p) for v, p in dist.items() if p > 0}
                     for x, dist in laws.items()}
        for x, dist in self.laws.items():
            total = math.fsum(dist.values())
            if abs(total - 1.0) > MASS_TOL:
                raise ValueError(f"law for input {x!r} sums to {total}")

    def __getitem__(self, x):
        return self.laws[x]

    def __iter__(self):
        return iter(self.laws)

    def __len__(self):
        return len(self.laws)

    def is_single_message(self) -> bool:
        return all(len(v) == 1 for dist in self.laws.values() for v in dist)

    def sample(self, x, rng: np.random.Generator) -> tuple:
        vectors = list(self.laws[x])
        probs = np.fromiter(self.laws[x].values(), dtype=np.float64)
        return vectors[int(rng.choice(len(vectors), p=probs / probs.sum()))]

    def count_law(self, x, message=1) -> dict:
        """Law of how many times ``message`` appears in the output for input ``x``."""
        out: dict = {}
        for vec, p in self.laws[x].items():
            k = vec.count(message)
            out[k] = out.get(k, 0.0) + p
        return out

    def randomizer(self):
        return self.sample


def r_infinity(x: int) -> tuple:
    if x not in (0, 1):
        raise ValueError("input must be a bit")
    return (x, 1 - x)


def r_infinity_law() -> FiniteRandomizerLaw:
    return FiniteRandomizerLaw({x: {r_infinity(x): 1.0} for x in (0, 1)})


def r_gap_support(x: int) -> list[tuple]:
    """Four-bit outputs allowed on input ``x``; input 1 excludes bit-sum 2."""
    if x not in (0, 1):
        raise ValueError("input must be a bit")
    every = list(product((0, 1), repeat=4))
    return every if x == 0 else [v for v in every if sum(v) != 2]


def r_gap(x: int, rng: np.random.Generator) -> tuple:
    """Uniform draw from :func:`r_gap_support`."""
    support = r_gap_support(x)
    return support[int(rng.integers(len(support)))]


def r_gap_law() -> FiniteRandomizerLaw:
    return FiniteRandomizerLaw({x: {v: 1.0 / len(r_gap_support(x)) for v in r_gap_support(x)}
                                for x in (0, 1)})


def pre_shuffle_law(law: Mapping, x) -> dict:
    """Law of one user's message vector after the user permutes it uniformly."""
    out: dict = {}
    for vec, p in law[x].items():
        perms = list(permutations(vec))
        for perm in perms:
            out[perm] = out.get(perm, 0.0) + p / len(perms)
    return out


def count_support_reachability(values: Iterable[int], n: int) -> set[int]:
    """Totals reachable as a sum of ``n`` numbers drawn from ``values``."""
    values = sorted(set(int(v) for v in values))
    if n < 1:
        raise ValueError("n must be at least 1")
    if not values:
        return set()
    if values[0] < 0:
        raise ValueError("per-user counts must be nonnegative")
    reach = kernels.reachable_totals(np.asarray(values, dtype=np.int64), n)
    return set(np.flatnonzero(reach).tolist())


def max_ratio_witness(P, Q) -> tuple[float, object]:
    """Largest ``|ln(P(y)/Q(y))|`` over the joint support and the outcome attaining it."""
    P, Q = _as_dict(P), _as_dict(Q)
    best, where = 0.0, None
    for y in sorted(set(P) | set(Q), key=repr):
        a, b = P.get(y, 0.0), Q.get(y, 0.0)
        if a == 0.0 and b == 0.0:
            continue
        if a == 0.0 or b == 0.0:
            return math.inf, y
        r = abs(math.log(a) - math.log(b))
        if r > best or where is None:
            best, where = r, y
    return best, where


def pure_dp_max_ratio(P, Q) -> float:
    return max_ratio_witness(P, Q)[0]


def _as_dict(D) -> dict:
    if isinstance(D, Pmf):
        return D.as_dict()
    return {k: v for k, v in D.items() if v > 0}


def shuffled_count_pmf(law: FiniteRandomizerLaw, rows: Iterable, message=1) -> Pmf:
    """Law of the number of ``message`` copies reaching the analyzer."""
    acc = np.ones(1)
    for x in rows:
        per_user = law.count_law(x, message)
        vec = np.zeros(max(per_user) + 1)
        for k, p in per_user.items():
            vec[k] = p
        acc = kernels.convolve(acc, vec)
    return Pmf.from_probs(acc / acc.sum())


def shuffled_pure_dp_level(law: Mapping, n: int) -> float:
    """Max log-ratio of shuffled output laws over all neighboring datasets."""
    laws = ShuffledLaws(law)
    return max((pure_dp_max_ratio(laws.law(c), laws.law(o))
                for c, o in neighbor_pairs(n, len(laws.inputs))), default=0.0)


def randomizer_pure_dp_level(law: Mapping) -> float:
    """Pure-DP level of a single user's message vector (no shuffling)."""
    inputs = list(law)
    return max((pure_dp_max_ratio(law[a], law[b]) for a in inputs for b in inputs if a != b),
               default=0.0)


def product_event_ratio(law: Mapping, x, x_other, message_set, n: int) -> float:
    """Probability ratio of every message landing in ``message_set``.

    Compares the all-``x`` dataset with the one where the first user holds
    ``x_other`` instead; the shuffle cannot change this event.
    """
    inside = lambda a: math.fsum(p for v, p in law[a].items() if v[0] in message_set)  # noqa: E731
    pa, pb = inside(x), inside(x_other)
    num = pa**n
    den = pb * pa ** (n - 1)
    if den == 0.0:
        return math.inf if num > 0 else 0.0
    return math.log(num / den)


@dataclass
class LocalSimulation:
    """Local protocol reproducing a single-message shuffled protocol.

    The local analyzer applies a uniformly random permutation to the ordered
    messages and then runs the shuffled analyzer.
    """

    randomizer: Callable
    shuffled_analyzer: Callable
    rng: np.random.Generator

    def analyzer(self, messages) -> object:
        flat = _flatten_single(messages)
        order = self.rng.permutation(len(flat))
        return self.shuffled_analyzer(tuple(flat[i] for i in order))

    def __call__(self, messages):
        return self.analyzer(messages)

    def output_law(self, messages) -> dict:
        """Exact analyzer output law for fixed ordered messages."""
        flat = _flatten_single(messages)
        perms = list(permutations(range(len(flat))))
        out: dict = {}
        for perm in perms:
            y = self.shuffled_analyzer(tuple(flat[i] for i in perm))
            out[y] = out.get(y, 0.0) + 1.0 / len(perms)
        return out


def _flatten_single(messages) -> list:
    flat = []
    for m in messages:
        if isinstance(m, tuple):
            if len(m) != 1:
                raise MultiMessageError(f"user sent {len(m)} messages")
            flat.append(m[0])
        else:
            flat.append(m)
    return flat


def simulate_local_from_shuffled(randomizer, analyzer, rng=None, *, law: Mapping | None = None,
                                 probe_inputs: Iterable = (), probe_draws: int = 64) -> LocalSimulation:
    """Wrap a single-message shuffled protocol as a local one.

    ``randomizer`` may be a :class:`FiniteRandomizerLaw`, which is then
    inspected directly.  Otherwise it is sampled ``probe_draws`` times on each
    of ``probe_inputs`` and rejected if any draw is not exactly one message.
    """
    rng = make_rng(rng)
    if isinstance(randomizer, FiniteRandomizerLaw):
        law = randomizer if law is None else law
        randomizer = randomizer.sample
    if law is not None:
        bad = [(x, v) for x in law for v in law[x] if len(v) != 1]
        if bad:
            x, v = bad[0]
            raise MultiMessageError(f"input {x!r} can produce {len(v)} messages {v}")
    probe_rng = np.random.default_rng(0)
    for x in probe_inputs:
        for _ in range(probe_draws):
            out = randomizer(x, probe_rng)
            if isinstance(out, tuple) and len(out) != 1:
                raise MultiMessageError(f"input {x!r} produced {len(out)} messages")
    return LocalSimulation(randomizer, analyzer, rng)


def exact_shuffled_output_law(law: Mapping, analyzer: Callable, rows) -> dict:
    """Output law of ``A(S(R(x)))`` by enumerating messages and permutations."""
    return _enumerate_outputs(law, rows, lambda msgs: _uniform_permutations(analyzer, msgs))


def exact_local_output_law(law: Mapping, sim: LocalSimulation, rows) -> dict:
    """Output law of the local simulation by enumerating messages and its analyzer."""
    return _enumerate_outputs(law, rows, sim.output_law)


def _uniform_permutations(analyzer, vectors) -> dict:
    flat = [m for v in vectors for m in v]
    perms = list(permutations(flat))
    out: dict = {}
    for perm in perms:
        y = analyzer(perm)
        out[y] = out.get(y, 0.0) + 1.0 / len(perms)
    return out


def _enumerate_outputs(law, rows, output_law) -> dict:
    rows = list(rows)
    out: dict = {}
    for combo in product(*(list(law[x].items()) for x in rows)):
        weight = math.prod(p for _, p in combo)
        vectors = tuple(v for v, _ in combo)
        for y, q in output_law(vectors).items():
            out[y] = out.get(y, 0.0) + weight * q
    return out


def total_variation(P: Mapping, Q: Mapping) -> float:
    return 0.5 * math.fsum(abs(P.get(y, 0.0) - Q.get(y, 0.0)) for y in set(P) | set(Q))
