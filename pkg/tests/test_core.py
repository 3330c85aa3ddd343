import math
from collections import Counter

import numpy as np
import pytest

from shuffledp.core import (
    Dataset,
    InvalidParamsError,
    MessageMultiset,
    ProtocolParams,
    execute_local,
    execute_shuffled,
    shuffle,
    validate_params,
)
from shuffledp.hist import HistParams, hist_analyzer, hist_randomizer, local_rr_analyze, local_rr_randomize
from shuffledp.zsum import ZsumParams, zsum_analyzer, zsum_randomize, zsum_randomizer


def test_shuffle_union():
    assert shuffle([(1, 1), (2,), ()]).counts == {1: 2, 2: 1}
    assert shuffle([(), (), ()]) == MessageMultiset()


def test_shuffle_permuted_mode_is_uniform():
    rng = np.random.default_rng(3)
    draws = Counter(shuffle([(1,), (2,)], rng, permute=True) for _ in range(10_000))
    assert set(draws) == {(1, 2), (2, 1)}
    assert abs(draws[(1, 2)] / 10_000 - 0.5) <= 0.02


def test_shuffle_permuted_needs_rng():
    with pytest.raises(ValueError):
        shuffle([(1,)], permute=True)


def test_multiset_views():
    ms = MessageMultiset.from_messages([3, 1, 3])
    assert ms.items == ((1, 1), (3, 2))
    assert ms.total == 3
    assert ms.count(3) == 2 and ms.count(7) == 0
    assert ms.expand() == (1, 3, 3)
    with pytest.raises(ValueError):
        MessageMultiset.from_counts({1: -1})


def test_validate_params():
    # 100 ln 20 = 299.573... <= 1000
    assert validate_params(ProtocolParams(1.0, 0.1, 1000)) == []
    assert ProtocolParams(1.0, 0.1, 1000).min_users() == pytest.approx(299.5732273553991, rel=1e-14)
    problems = validate_params(ProtocolParams(1.0, 0.1, 100))
    assert len(problems) == 1 and "below" in problems[0]
    problems = validate_params(ProtocolParams(0.0, 0.1, 1000))
    assert any("epsilon" in p for p in problems)
    assert validate_params(ProtocolParams(1.0, 0.1, 300)) == []
    assert validate_params(ProtocolParams(1.0, 0.1, 299)) != []


@pytest.mark.parametrize("bad", [(1.5, 0.1, 1000), (1.0, 0.0, 1000), (1.0, 1.5, 1000),
                                 (1.0, 0.1, 0), (1.0, 0.1, 10.5), (float("nan"), 0.1, 1000)])
def test_validate_rejects(bad):
    assert validate_params(ProtocolParams(*bad))
    with pytest.raises(InvalidParamsError):
        ProtocolParams(*bad).check()


def test_dataset_checks_universe():
    with pytest.raises(ValueError):
        Dataset.bits([0, 2])
    with pytest.raises(ValueError):
        Dataset([0, 1], d=3)
    with pytest.raises(ValueError):
        Dataset([1, 4], d=3)
    big = Dataset([2**70, 1], d=2**71)
    assert big.rows.dtype == object and big.n == 2
    assert Dataset([1, 1, 3], d=3).bin_counts() == {1: 2, 3: 1}


def test_execute_shuffled_zsum_zero_input():
    params = ProtocolParams(1.0, 0.1, 1000)
    zp = ZsumParams.from_params(params)
    data = Dataset.bits([0] * 1000)
    for seed in range(5):
        out = execute_shuffled(zsum_randomizer(zp), zsum_analyzer(zp), data, params,
                               np.random.default_rng(seed))
        assert out == 0.0


def test_execute_shuffled_identity_analyzer_forced_draws():
    zp = ZsumParams(ProtocolParams(1.0, 0.1, 2), p=0.5)
    forced = {1: 1, 0: 0}
    out = execute_shuffled(lambda x, rng: zsum_randomize(x, zp, z=forced[x]), lambda m: m,
                           Dataset.bits([1, 0]), zp.base, None, validate=False)
    assert out.counts == {1: 2}


def test_execute_shuffled_hist_one_user_shape():
    hp = HistParams(2, ZsumParams(ProtocolParams(1.0, 0.1, 1), p=0.6))
    est = execute_shuffled(hist_randomizer(hp), hist_analyzer(hp), Dataset([2], d=2), hp.zsum.base,
                           np.random.default_rng(0), validate=False)
    assert est.dense().shape == (2,)


def test_execute_local_rr_shape_and_identity():
    params = ProtocolParams(1.0, 0.1, 3)
    est = execute_local(lambda x, rng: local_rr_randomize(x, 1.0, 2, rng),
                        lambda msgs: local_rr_analyze(msgs, 1.0, 2), Dataset([1, 2, 2], d=2),
                        params, np.random.default_rng(0), validate=False)
    assert est.dense().shape == (2,)
    out = execute_local(lambda x, rng: x, lambda msgs: msgs, Dataset([3, 1, 2], d=3), params,
                        None, validate=False)
    assert out == (3, 1, 2)


def test_execute_checks_row_count_and_params():
    params = ProtocolParams(1.0, 0.1, 1000)
    zp = ZsumParams.from_params(params)
    with pytest.raises(InvalidParamsError):
        execute_shuffled(zsum_randomizer(zp), zsum_analyzer(zp), Dataset.bits([0] * 10), params,
                         np.random.default_rng(0))
    with pytest.raises(InvalidParamsError):
        execute_shuffled(zsum_randomizer(zp), zsum_analyzer(zp), Dataset.bits([0] * 10),
                         ProtocolParams(1.0, 0.1, 10), np.random.default_rng(0))
