import math

import numpy as np
import pytest
from scipy import stats

from shuffledp.core import Dataset, InvalidParamsError, MalformedTranscriptError, ProtocolParams
from shuffledp.zsum import (
    ZsumParams,
    compute_p,
    total_count_pmf,
    zsum_alpha,
    zsum_analyze,
    zsum_analyze_messages,
    zsum_randomize,
    zsum_run,
)

# 50-digit mpmath evaluations of the padding rate and error bound.
P_1_01_1000 = 0.8502133863223004
P_05_001_3000 = 0.6467788422301309
ALPHA_1_01_1000_005 = 0.19679915505537737
ALPHA_1_01_10000_005 = 0.019679915505537737

PARAMS = ProtocolParams(1.0, 0.1, 1000)
ZP = ZsumParams.from_params(PARAMS)


def test_compute_p():
    assert compute_p(PARAMS) == pytest.approx(P_1_01_1000, rel=1e-15)
    assert compute_p(ProtocolParams(0.5, 0.01, 3000)) == pytest.approx(P_05_001_3000, rel=1e-14)
    with pytest.raises(InvalidParamsError):
        compute_p(ProtocolParams(1.0, 2.0, 1000))


def test_p_stays_in_upper_half():
    for eps, delta in [(1.0, 0.1), (0.3, 1e-6), (1.0, 1.0)]:
        n = math.ceil(ProtocolParams(eps, delta, 1).min_users())
        assert 0.5 <= compute_p(ProtocolParams(eps, delta, n)) < 1


def test_randomize_forced():
    assert zsum_randomize(0, ZP, z=0) == ()
    assert zsum_randomize(1, ZP, z=1) == (1, 1)
    assert zsum_randomize(1, ZP, z=0) == (1,)
    with pytest.raises(ValueError):
        zsum_randomize(2, ZP, z=0)


def test_randomize_mean_count():
    rng = np.random.default_rng(11)
    mean = np.mean([len(zsum_randomize(0, ZP, rng)) for _ in range(100_000)])
    assert abs(mean - P_1_01_1000) <= 0.004


def test_analyze():
    assert zsum_analyze(1100, ZP) == pytest.approx(1.1 - P_1_01_1000, abs=1e-12)
    assert zsum_analyze(1000, ZP) == 0.0
    assert zsum_analyze(0, ZP) == 0.0
    with pytest.raises(MalformedTranscriptError):
        zsum_analyze(2001, ZP)
    with pytest.raises(MalformedTranscriptError):
        zsum_analyze_messages([1, 2], ZP)
    assert zsum_analyze_messages((1,) * 1100, ZP) == zsum_analyze(1100, ZP)


def test_alpha():
    assert zsum_alpha(PARAMS, 0.05) == pytest.approx(ALPHA_1_01_1000_005, rel=1e-14)
    assert zsum_alpha(ProtocolParams(1.0, 0.1, 10_000), 0.05) == pytest.approx(ALPHA_1_01_10000_005,
                                                                              rel=1e-14)
    assert zsum_alpha(PARAMS, 0.1**25) > 0
    with pytest.raises(InvalidParamsError):
        zsum_alpha(PARAMS, 0.1**25 / 2)
    with pytest.raises(InvalidParamsError):
        zsum_alpha(PARAMS, 1.5)


def test_zero_input_is_exact():
    out = zsum_run(Dataset.bits([0] * 1000), ZP, np.random.default_rng(0), trials=500)
    assert (out == 0.0).all()


def test_modes_agree_in_distribution():
    data = Dataset.bits([1] * 500 + [0] * 500)
    a = zsum_run(data, ZP, np.random.default_rng(1), trials=4000, mode="faithful")
    b = zsum_run(data, ZP, np.random.default_rng(2), trials=4000, mode="aggregate")
    assert stats.ks_2samp(a, b).pvalue > 1e-3
    with pytest.raises(ValueError):
        zsum_run(data, ZP, np.random.default_rng(0), mode="other")


def test_total_count_pmf():
    pmf = total_count_pmf(300, ZP)
    assert pmf.shape == (2001,)
    assert pmf[:300].sum() == 0 and pmf[1301:].sum() == 0
    assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.dot(np.arange(2001), pmf) == pytest.approx(300 + 1000 * ZP.p, rel=1e-12)


def test_explicit_p_bounds():
    with pytest.raises(InvalidParamsError):
        ZsumParams(PARAMS, p=1.2)
