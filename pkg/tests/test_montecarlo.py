from fractions import Fraction as F

import numpy as np
import pytest
from scipy import stats

from gladiator import montecarlo
from gladiator.chains import Gladiator, JumpHop, Simple
from gladiator.errors import DomainError
from gladiator.exact import assemble_kernel, distribution_at_time, mixing_time_exact, worst_tv_at
from gladiator.measures import stationary_distribution
from gladiator.montecarlo import (SampleConfig, curve_to_csv, empirical_distribution,
                                  estimate_mixing_time, estimate_tv_curve, trajectory_endpoints)


def test_config_validation():
    with pytest.raises(DomainError):
        SampleConfig(trials=0)
    with pytest.raises(DomainError):
        SampleConfig(horizon=0)


def test_single_trial_is_point_mass():
    d = empirical_distribution(Gladiator((1, 2, 3)), (1, 2, 3), 5, 1, seed=3)
    assert sorted(d.as_array()) == [0, 0, 0, 0, 0, 1]


def test_same_seed_same_histogram():
    spec = JumpHop((1, 2, 1), (1, 3, 9))
    a = trajectory_endpoints(spec, "ABBC", 7, 5000, seed=42)
    b = trajectory_endpoints(spec, "ABBC", 7, 5000, seed=42)
    c = trajectory_endpoints(spec, "ABBC", 7, 5000, seed=43)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_results_independent_of_chunking(monkeypatch):
    spec = Gladiator((1, 2, 4))
    a = trajectory_endpoints(spec, (1, 2, 3), 4, 3000, seed=9)
    monkeypatch.setattr(montecarlo, "CHUNK", 7)
    b = trajectory_endpoints(spec, (1, 2, 3), 4, 3000, seed=9)
    assert np.array_equal(a, b)


def test_empirical_tv_matches_exact_gladiator_n4():
    spec = Gladiator((1, 2, 4, 8))
    k = assemble_kernel(spec, "float")
    pi = stationary_distribution(spec, "float")
    t = 4 * mixing_time_exact(k, pi).t_mix
    start = (1, 2, 3, 4)
    exact_tv = 0.5 * np.abs(distribution_at_time(k, start, t).as_array() - pi.as_array()).sum()
    trials = 100_000
    d = empirical_distribution(spec, start, t, trials, seed=1)
    est = 0.5 * np.abs(d.as_array() - pi.as_array()).sum()
    assert abs(est - exact_tv) <= 3 * np.sqrt(k.size / trials)


def test_tv_at_zero_is_one_minus_pi():
    spec = Gladiator((1, 2, 3))
    pi = stationary_distribution(spec, "float")
    (p,) = estimate_tv_curve(spec, (3, 2, 1), [0], 100, seed=0)
    assert p.tv == pytest.approx(1 - pi[(3, 2, 1)])
    assert p.stderr == pytest.approx(0, abs=1e-12)


def test_curve_statistically_non_increasing():
    for seed in range(3):
        spec = Gladiator((1, 2, 3, 5))
        curve = estimate_tv_curve(spec, (4, 3, 2, 1), range(0, 30, 3), 20_000, seed=seed)
        for a, b in zip(curve, curve[1:]):
            assert b.tv <= a.tv + 3 * max(a.stderr, b.stderr, 1e-3)
        assert curve_to_csv(curve).startswith("t,estimate,stderr\n")


def test_estimate_at_tmix_n5():
    spec = Gladiator((1, 2, 3, 5, 8))
    k = assemble_kernel(spec, "float")
    pi = stationary_distribution(spec, "float")
    rep = mixing_time_exact(k, pi)
    exact_worst, tvs = worst_tv_at(k, pi, rep.t_mix)
    start = k.states[int(np.argmax(tvs))]
    (p,) = estimate_tv_curve(spec, start, [rep.t_mix], 100_000, seed=5, pi=pi, kernel=k)
    assert abs(p.tv - exact_worst) <= 0.02


def test_estimate_mixing_n2():
    est = estimate_mixing_time(Gladiator((1, 2)), F(1, 4), SampleConfig(trials=10_000))
    assert est.t_estimate == 1 and not est.inconclusive


def test_short_horizon_is_inconclusive():
    est = estimate_mixing_time(Simple(5), F(1, 4), SampleConfig(trials=2000, horizon=4))
    assert est.inconclusive and est.t_estimate is None
    assert est.summary()["inconclusive"] is True


@pytest.mark.parametrize("spec", [Gladiator((1, 2, 3, 5)), Simple(4), JumpHop((1, 1, 1), (1, 2, 8)),
                                  Gladiator((1, 1, 2, 3, 5, 8))])
def test_estimate_within_factor_two(spec):
    k = assemble_kernel(spec, "float")
    exact = mixing_time_exact(k, stationary_distribution(spec, "float")).t_mix
    est = estimate_mixing_time(spec, F(1, 4), SampleConfig(trials=100_000, seed=2))
    assert not est.inconclusive
    assert exact / 2 <= est.t_estimate <= 2 * exact


def test_chi_square_unbiased():
    spec = Gladiator((1, 2, 3))
    pi = stationary_distribution(spec, "float").as_array()
    trials = 3000
    crit = stats.chi2.ppf(0.999, len(pi) - 1)
    passes = 0
    for seed in range(20):
        counts = trajectory_endpoints(spec, (3, 2, 1), 60, trials, seed=seed)
        chi = ((counts - trials * pi) ** 2 / (trials * pi)).sum()
        passes += chi < crit
    assert passes >= 19


def test_start_policies():
    spec = Gladiator((3, 1, 2))
    assert montecarlo.start_states(spec, "extremal") == [(2, 3, 1), (1, 3, 2)]
    assert montecarlo.start_states(spec, "2,1,3") == [(2, 1, 3)]
