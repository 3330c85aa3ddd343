"""Protocol plumbing: parameters, datasets, messages, shuffler and executors.

A randomizer is any callable ``randomizer(x, rng) -> tuple`` returning that
user's message vector.  An analyzer is a callable taking the shuffler's
output, which is a :class:`MessageMultiset` by default or an explicitly
permuted ``tuple`` in fidelity mode.  Every analyzer in this package accepts
both forms.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence, Union

import numpy as np

MessageVector = tuple
Randomizer = Callable[[Any, np.random.Generator], Any]
Analyzer = Callable[[Any], Any]


class InvalidParamsError(ValueError):
    """Raised when protocol parameters violate their constraints."""


class MalformedTranscriptError(ValueError):
    """Raised when an analyzer receives messages no honest run can produce."""


@dataclass(frozen=True)
class ProtocolParams:
    epsilon: float
    delta: float
    n: int

    def min_users(self) -> float:
        """Smallest n allowed for this (epsilon, delta)."""
        return 100.0 / self.epsilon**2 * math.log(2.0 / self.delta)

    def check(self) -> "ProtocolParams":
        problems = validate_params(self)
        if problems:
            raise InvalidParamsError("; ".join(problems))
        return self


def validate_params(params: ProtocolParams) -> list[str]:
    """Return the list of violated parameter constraints (empty when valid)."""
    problems = []
    eps, delta, n = params.epsilon, params.delta, params.n
    eps_ok = isinstance(eps, (int, float)) and math.isfinite(eps) and 0 < eps <= 1
    delta_ok = isinstance(delta, (int, float)) and math.isfinite(delta) and 0 < delta <= 1
    if not eps_ok:
        problems.append(f"epsilon={eps!r} outside (0, 1]")
    if not delta_ok:
        problems.append(f"delta={delta!r} outside (0, 1]")
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        problems.append(f"n={n!r} is not a positive integer")
    elif eps_ok and delta_ok:
        bound = params.min_users()
        if n < bound:
            problems.append(f"n={n} below (100/epsilon^2) ln(2/delta) = {bound:.4f}")
    return problems


@dataclass(frozen=True)
class Dataset:
    """Rows of user data.

    With ``binary=True`` the universe is {0, 1}; otherwise it is [d] =
    {1, ..., d}.  Rows are kept as a numpy array; when ``d`` exceeds the
    int64 range the array has object dtype holding Python ints.
    """

    rows: np.ndarray
    d: int
    binary: bool = False

    def __post_init__(self):
        rows = self.rows
        if not isinstance(rows, np.ndarray):
            try:
                rows = np.asarray(rows, dtype=np.int64)
            except OverflowError:
                rows = np.array(list(rows), dtype=object)
            object.__setattr__(self, "rows", rows)
        if rows.ndim != 1:
            raise ValueError("dataset rows must be one-dimensional")
        if self.binary:
            if rows.size and not np.isin(rows, (0, 1)).all():
                raise ValueError("binary dataset rows must be 0 or 1")
        elif rows.size and (rows.min() < 1 or rows.max() > self.d):
            raise ValueError(f"histogram rows must lie in [1, {self.d}]")

    @classmethod
    def bits(cls, rows: Iterable[int]) -> "Dataset":
        return cls(np.asarray(list(rows), dtype=np.int64), d=2, binary=True)

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    def bin_counts(self) -> dict:
        """Counts of each value present in the data."""
        return dict(Counter(self.rows.tolist()))


@dataclass(frozen=True)
class MessageMultiset:
    """Order-free view of the shuffler output, stored as sorted (value, count) pairs."""

    items: tuple = field(default=())

    @classmethod
    def from_counts(cls, counts: Mapping[int, int]) -> "MessageMultiset":
        for value, c in counts.items():
            if c < 0:
                raise ValueError(f"negative count {c} for message {value}")
        return cls(tuple(sorted((v, int(c)) for v, c in counts.items() if c > 0)))

    @classmethod
    def from_messages(cls, messages: Iterable[int]) -> "MessageMultiset":
        return cls.from_counts(Counter(messages))

    @property
    def counts(self) -> dict:
        return dict(self.items)

    @property
    def total(self) -> int:
        return sum(c for _, c in self.items)

    def count(self, value) -> int:
        return self.counts.get(value, 0)

    def values(self) -> list:
        return [v for v, _ in self.items]

    def expand(self) -> tuple:
        """Messages in sorted order."""
        return tuple(v for v, c in self.items for _ in range(c))


def as_multiset(messages: Union[MessageMultiset, Sequence[int]]) -> MessageMultiset:
    if isinstance(messages, MessageMultiset):
        return messages
    return MessageMultiset.from_messages(messages)


def shuffle(vectors: Iterable[Sequence[int]], rng: np.random.Generator | None = None,
            *, permute: bool = False):
    """Concatenate all users' message vectors and shuffle them.

    Returns the canonical :class:`MessageMultiset`, or with ``permute=True``
    a tuple holding a uniformly random permutation of the concatenation.
    """
    if not permute:
        counter: Counter = Counter()
        for vec in vectors:
            counter.update(vec)
        return MessageMultiset.from_counts(counter)
    if rng is None:
        raise ValueError("permuted shuffling needs a random generator")
    flat = [m for vec in vectors for m in vec]
    order = rng.permutation(len(flat))
    return tuple(flat[i] for i in order)


def _check_run(dataset: Dataset, params: ProtocolParams, validate: bool):
    if validate:
        params.check()
    if dataset.n != params.n:
        raise InvalidParamsError(f"dataset has {dataset.n} rows but params.n={params.n}")


def execute_shuffled(randomizer: Randomizer, analyzer: Analyzer, dataset: Dataset,
                     params: ProtocolParams, rng: np.random.Generator, *,
                     permute: bool = False, validate: bool = True):
    """Run ``A(S(R(x_1), ..., R(x_n)))``."""
    _check_run(dataset, params, validate)
    vectors = [randomizer(x, rng) for x in dataset.rows.tolist()]
    return analyzer(shuffle(vectors, rng, permute=permute))


def execute_local(randomizer: Randomizer, analyzer: Analyzer, dataset: Dataset,
                  params: ProtocolParams, rng: np.random.Generator, *,
                  validate: bool = True):
    """Run ``A(R(x_1), ..., R(x_n))`` with message order preserved."""
    _check_run(dataset, params, validate)
    outputs = tuple(randomizer(x, rng) for x in dataset.rows.tolist())
    return analyzer(outputs)


def make_rng(seed=None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
