import numpy as np
import pytest
from scipy import stats

from shuffledp.core import Dataset, InvalidParamsError, MalformedTranscriptError, MessageMultiset, ProtocolParams
from shuffledp.hist import (
    HistogramEstimate,
    HistParams,
    TrueHistogram,
    aggregate_simulate,
    faithful_simulate,
    hist_analyze,
    hist_execute,
    hist_randomize,
    local_rr_analyze,
    local_rr_expected_counts,
    local_rr_invert,
    local_rr_randomize,
    local_rr_randomize_batch,
    per_query_error,
    simultaneous_error,
    true_histogram,
)
from shuffledp.zsum import ZsumParams

P_1_01_1000 = 0.8502133863223004
PARAMS = ProtocolParams(1.0, 0.1, 1000)


def hp_for(d, params=PARAMS):
    return HistParams.from_params(params, d)


def test_guarantee_doubles():
    assert hp_for(5).guarantee() == (2.0, 0.2)
    with pytest.raises(InvalidParamsError):
        hp_for(0)


def test_randomize_forced():
    hp = hp_for(3)
    assert MessageMultiset.from_messages(hist_randomize(2, hp, z=(0, 1, 0))).counts == {2: 2}
    assert MessageMultiset.from_messages(hist_randomize(1, hp, z=(0, 0, 0))).counts == {1: 1}
    with pytest.raises(ValueError):
        hist_randomize(4, hp, z=(0, 0, 0))
    with pytest.raises(ValueError):
        hist_randomize(1, hp, z=(0, 0))


def test_randomize_length_d2():
    hp = hp_for(2)
    rng = np.random.default_rng(0)
    assert all(len(hist_randomize(x, hp, rng)) <= 3 for x in (1, 2) for _ in range(200))


def test_analyze():
    hp = hp_for(3)
    assert hist_analyze(MessageMultiset.from_counts({1: 2, 2: 1, 3: 3}), hp).dense().tolist() == [0, 0, 0]
    est = hist_analyze(MessageMultiset.from_counts({1: 1100}), hp_for(2))
    assert est[1] == pytest.approx(1.1 - P_1_01_1000, abs=1e-12)
    assert est[2] == 0.0
    assert hist_analyze(MessageMultiset(), hp).dense().tolist() == [0, 0, 0]
    with pytest.raises(MalformedTranscriptError):
        hist_analyze([4], hp)


def test_aggregate_zero_bins_and_validation():
    hp = hp_for(2)
    rng = np.random.default_rng(5)
    for _ in range(200):
        est = aggregate_simulate({1: 1000}, hp, rng, zero_rng=rng)
        assert est[2] == 0.0
    with pytest.raises(InvalidParamsError):
        aggregate_simulate({1: 999}, hp, rng)
    with pytest.raises(InvalidParamsError):
        aggregate_simulate({3: 1000}, hp, rng)
    assert aggregate_simulate([1000, 0], hp, rng)[2] == 0.0


def test_aggregate_matches_faithful_d1():
    params = ProtocolParams(1.0, 0.1, 500)
    hp = hp_for(1, params)
    data = Dataset([1] * 500, d=1)
    faithful = faithful_simulate(data, hp, np.random.default_rng(1), trials=10_000)[:, 0]
    rng = np.random.default_rng(2)
    agg = np.array([aggregate_simulate({1: 500}, hp, rng)[1] for _ in range(10_000)])
    assert stats.ks_2samp(faithful, agg).pvalue > 1e-3


def test_matched_seeds_identical_across_domains():
    counts = {1: 500, 2: 300, 3: 200}
    a = aggregate_simulate(counts, hp_for(10), np.random.default_rng(9))
    b = aggregate_simulate(counts, hp_for(10**6), np.random.default_rng(9))
    assert a.values == b.values


def test_hist_execute_modes():
    data = Dataset([1] * 600 + [2] * 400, d=4)
    for mode in ("faithful", "aggregate"):
        est = hist_execute(data, hp_for(4), np.random.default_rng(0), mode=mode)
        assert est[3] == est[4] == 0.0
        assert abs(est[1] - 0.6) < 0.1
    with pytest.raises(ValueError):
        hist_execute(data, hp_for(4), np.random.default_rng(0), mode="bogus")


def test_faithful_budget():
    params = ProtocolParams(1.0, 0.1, 1000)
    data = Dataset([1] * 1000, d=20_000)
    with pytest.raises(InvalidParamsError):
        hist_execute(data, hp_for(20_000, params), np.random.default_rng(0), mode="faithful")


def test_true_histogram():
    assert true_histogram(Dataset([1, 1, 2], d=3)).dense() == pytest.approx([2 / 3, 1 / 3, 0])
    assert true_histogram(Dataset([5], d=5)).dense().tolist() == [0, 0, 0, 0, 1]
    assert true_histogram(Dataset(range(1, 9), d=8)).dense().tolist() == [1 / 8] * 8


def test_errors():
    est = HistogramEstimate.from_dense([0.25, 0.0])
    truth = TrueHistogram(2, {1: 0.2})
    assert simultaneous_error(est, truth) == pytest.approx(0.05)
    assert simultaneous_error(HistogramEstimate.from_dense([0.2, 0]), truth) == 0.0
    est = HistogramEstimate.from_dense([0.0, 0.1])
    assert per_query_error(est, TrueHistogram(2, {1: 0.3, 2: 0.1}), 1) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        simultaneous_error(est, TrueHistogram(3, {}))


def test_rr_inversion_exact():
    freqs = np.array([0.5, 0.25, 0.25, 0.0])
    counts = local_rr_expected_counts(freqs, 1.0, 1000)
    assert local_rr_invert(counts, 1.0, 1000) == pytest.approx(freqs, abs=1e-12)


def test_rr_noiseless_limit():
    rng = np.random.default_rng(0)
    msgs = [local_rr_randomize(x, 50.0, 2, rng) for x in [1] * 30 + [2] * 10]
    assert local_rr_analyze(msgs, 50.0, 2).dense() == pytest.approx([0.75, 0.25], abs=1e-9)


def test_rr_batch_never_keeps_wrong_value():
    rng = np.random.default_rng(0)
    rows = np.array([1, 2, 3] * 1000)
    out = local_rr_randomize_batch(rows, 1.0, 3, rng)
    assert set(np.unique(out)) <= {1, 2, 3}
    keep = np.mean(out == rows)
    assert abs(keep - np.e / (np.e + 2)) < 0.03


def test_rr_worse_than_shuffled_at_d1024():
    n, d = 1000, 1024
    counts = {1: 500, 2: 300, 3: 200}
    truth = TrueHistogram(d, {j: c / n for j, c in counts.items()})
    rows = np.repeat([1, 2, 3], [500, 300, 200])
    rng = np.random.default_rng(4)
    shuffled = [simultaneous_error(aggregate_simulate(counts, hp_for(d), rng), truth) for _ in range(50)]
    local = [simultaneous_error(local_rr_analyze(local_rr_randomize_batch(rows, 1.0, d, rng), 1.0, d), truth)
             for _ in range(50)]
    assert np.median(local) > np.median(shuffled)


def test_d1_near_exact():
    hp = HistParams(1, ZsumParams.from_params(PARAMS))
    est = aggregate_simulate({1: 1000}, hp, np.random.default_rng(0))
    assert abs(est[1] - 1.0) < 0.05
