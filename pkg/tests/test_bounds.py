import math

import numpy as np
import pytest
from scipy.special import ndtr

from eablock import bounds
from eablock.influence import expected_influence_mc
from eablock.instance import beta_critical


def test_half_normal_zero_delta_is_trivial():
    rep = bounds.half_normal_tail_check(10, 1.0, 0.0, 10_000, seed=1)
    assert rep.bound == 1.0 and rep.passed
    assert 0 <= rep.empirical <= 1


def test_half_normal_mean_n100():
    rep = bounds.half_normal_tail_check(100, 1.0, 0.1, 200_000, seed=2)
    assert bounds.half_normal_mean(100, 1.0) == pytest.approx(79.788, abs=1e-3)
    assert rep.extra["mean_ok"]
    assert abs(rep.extra["mean_empirical"] - 100 * math.sqrt(2 / math.pi)) <= 3 * rep.extra["mean_stderr"]


def test_half_normal_tail_n10():
    rep = bounds.half_normal_tail_check(10, 1.0, 0.5, 10**6, seed=3)
    assert rep.bound == pytest.approx(math.exp(-10 * 0.25 / math.pi))
    assert rep.bound == pytest.approx(0.4513, abs=1e-4)
    assert rep.passed


def test_half_normal_is_seed_deterministic():
    a = bounds.half_normal_tail_check(7, 2.0, 0.3, 20_000, seed=9)
    b = bounds.half_normal_tail_check(7, 2.0, 0.3, 20_000, seed=9)
    assert a.as_dict() == b.as_dict()


def test_half_normal_rejects_bad_input():
    with pytest.raises(ValueError):
        bounds.half_normal_tail_check(10, 1.0, 0.1, 100, seed=1)
    with pytest.raises(ValueError):
        bounds.half_normal_tail_check(0, 1.0, 0.1, 10_000, seed=1)


def test_phi_examples():
    assert ndtr(0.0) == 0.5
    assert ndtr(1.0) == pytest.approx(0.841345, abs=1e-6)
    assert 0.5 + 1 / math.sqrt(2 * math.pi) == pytest.approx(0.898942, abs=1e-6)
    rep = bounds.phi_bound_check([0.0])
    assert rep.min_margin == 0.0 and rep.passed
    rep = bounds.phi_bound_check(np.linspace(0, 10, 100_001))
    assert rep.passed and rep.argmin == 0.0


def test_phi_rejects_negative():
    with pytest.raises(ValueError):
        bounds.phi_bound_check([-0.1, 1.0])
    with pytest.raises(ValueError):
        bounds.phi_bound_check([])


def test_aggregate_tail_d50():
    rep = bounds.aggregate_tail_check(50.0, 0.5, 200_000, seed=4)
    assert rep.bound == pytest.approx(math.exp(-0.5**4 * 50 / (8 * math.pi)))
    assert rep.bound == pytest.approx(0.883, abs=1e-3)
    assert rep.passed and rep.extra["mean_ok"]


def test_aggregate_at_zero_beta():
    rep = bounds.aggregate_tail_check(50.0, 0.5, 10_000, seed=5, beta=0.0)
    assert rep.extra["mean_aggregate"] == 0.0
    # every draw sits exactly at the mean, which is below mean + eps/2
    assert rep.empirical == 0.0


def test_aggregate_mean_matches_influence_mc():
    d, eps = 50.0, 0.5
    beta = (1 - eps) * beta_critical(d)
    rep = bounds.aggregate_tail_check(d, eps, 200_000, seed=6)
    est = expected_influence_mc(beta, d, 200_000, seed=6)
    # both estimate d * E|tanh(beta J / 2)|; binomial degree has mean d exactly
    tol = 3 * math.hypot(rep.extra["mean_stderr"], est.scaled_stderr)
    assert abs(rep.extra["mean_aggregate"] - est.scaled) <= tol
    assert rep.extra["mean_aggregate"] <= 1 - eps + 3 * rep.extra["mean_stderr"]


def test_aggregate_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        bounds.aggregate_tail_check(50.0, 1.0, 10_000, seed=1)
