import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from shuffledp.core import InvalidParamsError, ProtocolParams
from shuffledp.privacy import (
    EnumerationBudgetError,
    Pmf,
    binomial_pmf,
    binomial_smoothness_bound,
    brute_force_shuffled_dp,
    compositions,
    hockey_stick,
    mneg_privacy_check,
    neighbor_pairs,
    shifted_binomial_delta,
    shifted_binomial_delta_mp,
    smoothness_min_delta,
    zsum_privacy_delta,
)
from shuffledp.puredp import r_infinity_law

# mpmath (50 digits) values
GAMMA_1000 = 0.14978661367769955        # 50 ln 20 / 1000
ALPHA_S = 0.4621171572600098            # (e - 1) / (e + 1)
BOUND_DELTA_1000 = 0.04610046603462210  # exp(-x/8) + exp(-x/(8 + 2a)), x = a^2 g n
DELTA_1000_EPS1 = 1.5271405806977815e-20
DELTA_1000_EPS0 = 0.035322085507485388
PARAMS = ProtocolParams(1.0, 0.1, 1000)


def smoothness_oracle(probs, eps_ratio, k):
    """Exhaustive bad-set enumeration with exact fractions; eps_ratio = e^eps."""
    support = range(len(probs))
    mass = lambda y: probs[y] if 0 <= y < len(probs) else Fraction(0)  # noqa: E731
    worst = Fraction(0)
    for kp in [s for s in range(-k, k + 1) if s]:
        bad = sum((mass(y) for y in support
                   if mass(y + kp) == 0 or mass(y) / mass(y + kp) >= eps_ratio ** abs(kp)), Fraction(0))
        worst = max(worst, bad)
    return worst


def test_binomial_pmf():
    assert binomial_pmf(2, 0.5).probs() == pytest.approx([0.25, 0.5, 0.25], abs=1e-15)
    assert binomial_pmf(4, 0.5).probs() == pytest.approx(np.array([1, 4, 6, 4, 1]) / 16, abs=1e-15)
    assert abs(binomial_pmf(1000, 0.1497866).probs().sum() - 1) <= 1e-12
    assert binomial_pmf(5, 0.0).as_dict() == {0: 1.0}
    assert binomial_pmf(5, 1.0).as_dict() == {5: 1.0}
    with pytest.raises(ValueError):
        binomial_pmf(3, 1.5)


def test_pmf_validation():
    with pytest.raises(ValueError):
        Pmf.from_probs([0.5, 0.4])
    with pytest.raises(ValueError):
        Pmf.from_probs([1.5, -0.5])
    P = Pmf.from_probs([0.5, 0.5], offset=3)
    assert list(P.support) == [3, 4] and P.prob(2) == 0.0 and P.shift(-3).prob(0) == 0.5


def test_hockey_stick_hand_values():
    P = binomial_pmf(2, 0.5)
    Q = P.shift(1)
    assert hockey_stick(P, Q, 0.0) == pytest.approx(0.5, abs=1e-15)
    assert hockey_stick(P, Q, math.log(2)) == pytest.approx(0.25, abs=1e-15)
    for eps in (0.0, 0.3, 2.0):
        assert hockey_stick(P, P, eps) == 0.0


def test_zsum_privacy_delta():
    rep = zsum_privacy_delta(PARAMS, 1.0)
    assert rep.passed and rep.method == "exact-divergence"
    assert rep.delta_achieved == pytest.approx(DELTA_1000_EPS1, rel=1e-6)
    zero = zsum_privacy_delta(PARAMS, 0.0)
    assert zero.delta_achieved == pytest.approx(DELTA_1000_EPS0, rel=1e-10)
    assert zero.delta_achieved >= (1 - GAMMA_1000) ** 1000 > 0


def test_high_precision_agrees():
    rep = zsum_privacy_delta(PARAMS, 0.0, precision="high")
    assert rep.delta_achieved == pytest.approx(DELTA_1000_EPS0, rel=1e-12)
    assert shifted_binomial_delta_mp(40, 0.3, 0.5) == pytest.approx(shifted_binomial_delta(40, 0.3, 0.5)[0],
                                                                   rel=1e-12)


def test_degenerate_noise_gives_full_delta():
    for q in (0.0, 1.0):
        for eps in (0.0, 1.0, 10.0):
            assert shifted_binomial_delta(50, q, eps)[0] == 1.0


def test_smoothness_hand_values():
    D = binomial_pmf(4, 0.5)
    assert smoothness_min_delta(D, math.log(3), 1) == pytest.approx(0.3125, abs=1e-15)
    assert smoothness_min_delta(D, math.log(5), 1) == pytest.approx(1 / 16, abs=1e-15)
    assert smoothness_min_delta(Pmf.point(0), 0.7, 1) == 1.0
    with pytest.raises(ValueError):
        smoothness_min_delta(D, 1.0, 0)


@pytest.mark.parametrize("n,num,den", [(4, 1, 2), (6, 1, 3), (9, 2, 5)])
@pytest.mark.parametrize("ratio,k", [(Fraction(3), 1), (Fraction(2), 2), (Fraction(3, 2), 1)])
def test_smoothness_matches_fraction_oracle(n, num, den, ratio, k):
    q = Fraction(num, den)
    probs = [math.comb(n, y) * q**y * (1 - q) ** (n - y) for y in range(n + 1)]
    expected = float(smoothness_oracle(probs, ratio, k))
    got = smoothness_min_delta(binomial_pmf(n, num / den), math.log(ratio), k)
    assert got == pytest.approx(expected, abs=1e-12)


def test_smoothness_bound_values():
    eps, delta = binomial_smoothness_bound(1000, GAMMA_1000, ALPHA_S)
    assert eps == pytest.approx(1.0, abs=1e-14)
    assert delta == pytest.approx(BOUND_DELTA_1000, rel=1e-12)
    assert binomial_smoothness_bound(10, 0.2, 0.0) == (0.0, 2.0)
    with pytest.raises(InvalidParamsError):
        binomial_smoothness_bound(10, 0.2, 0.5, k=2)
    with pytest.raises(InvalidParamsError):
        binomial_smoothness_bound(10, 0.7, 0.5)


@pytest.mark.parametrize("n", [300, 1000])
def test_mneg_both_routes(n):
    check = mneg_privacy_check(ProtocolParams(1.0, 0.1, n))
    assert check.smoothness_passed and check.exact.passed and check.passed
    assert check.exact.delta_achieved <= check.smooth.delta_achieved <= check.bound_delta


def test_brute_force_matches_analytic():
    p = 0.7
    law = {0: {(): 1 - p, (1,): p}, 1: {(1,): 1 - p, (1, 1): p}}
    for n in (1, 2, 4, 8):
        assert brute_force_shuffled_dp(law, n, 1.0) == pytest.approx(shifted_binomial_delta(n, p, 1.0)[0],
                                                                    abs=1e-12)
    with pytest.raises(EnumerationBudgetError):
        brute_force_shuffled_dp(law, 9, 1.0)


def test_brute_force_other_laws():
    assert brute_force_shuffled_dp(r_infinity_law(), 4, 0.0) == 0.0
    identity = {0: {(0,): 1.0}, 1: {(1,): 1.0}}
    assert brute_force_shuffled_dp(identity, 2, 5.0) == 1.0


def test_compositions_and_neighbors():
    assert sorted(compositions(2, 2)) == [(0, 2), (1, 1), (2, 0)]
    pairs = list(neighbor_pairs(2, 2))
    assert ((2, 0), (1, 1)) in pairs and ((1, 1), (2, 0)) in pairs
    assert all(sum(a) == sum(b) == 2 for a, b in pairs)
