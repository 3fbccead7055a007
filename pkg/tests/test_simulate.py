"""Simulator tests: determinism, conservation, policy equivalence, and
agreement with the analytic engine as oracle."""

import math
from dataclasses import replace

import pytest

from crankback import (
    NoSuccessError,
    Scenario,
    ScenarioError,
    SimConfig,
    ThresholdTable,
    decision_rule,
    return_profile_grid,
    simulate_attempts,
    simulate_baseline,
    simulate_profile,
    thresholds,
    waste_per_success,
)
from crankback.simulate import _block_rng


def test_config_validation():
    with pytest.raises(ScenarioError):
        SimConfig(trials=0)
    with pytest.raises(ScenarioError):
        SimConfig(trials=10, policy="greedy")
    with pytest.raises(ScenarioError):
        SimConfig(trials=10, policy="rest_time")  # t_tr missing
    with pytest.raises(ScenarioError):
        SimConfig(trials=10, policy="quantile", t_tr=5.0)
    with pytest.raises(ScenarioError):
        SimConfig(trials=10, seed="abc")


def test_counts_conservation(t16):
    for trials in (1, 1000, 65_536, 65_537, 200_000):
        rep = simulate_profile(t16, SimConfig(trials=trials, seed=11))
        assert sum(rep.counts) == trials
        assert rep.trials == trials
        # estimated probabilities are exact count ratios
        for c, p in zip(rep.counts, rep.profile.p_return + (rep.profile.p_success,)):
            assert p == c / trials


def test_determinism(t16):
    cfg = SimConfig(trials=150_000, seed=42)
    assert simulate_profile(t16, cfg) == simulate_profile(t16, cfg)


def test_determinism_across_workers(t16):
    cfg = SimConfig(trials=300_000, seed=7)
    r1 = simulate_profile(t16, cfg, workers=1)
    r3 = simulate_profile(t16, cfg, workers=3)
    r8 = simulate_profile(t16, cfg, workers=8)
    assert r1 == r3 == r8


def test_seed_changes_outcome(t16):
    cfg_a = SimConfig(trials=50_000, seed=1)
    cfg_b = SimConfig(trials=50_000, seed=2)
    assert simulate_profile(t16, cfg_a) != simulate_profile(t16, cfg_b)


def test_generous_budget_never_returns():
    s = Scenario(n=6, hop_mean=3.0, hop_var=1.0, deadline=1000.0, p_tr=0.9)
    rep = simulate_profile(s, SimConfig(trials=10_000, seed=5))
    assert rep.counts[-1] == 10_000
    assert all(c == 0 for c in rep.counts[:-1])
    assert rep.on_time_fraction == 1.0


def test_no_successes_on_time_fraction_none():
    s = Scenario(n=6, hop_mean=3.0, hop_var=1.0, deadline=5.0, p_tr=0.9)
    rep = simulate_profile(s, SimConfig(trials=1000, seed=5))
    assert rep.counts[-1] == 0
    assert rep.on_time_fraction is None


@pytest.mark.parametrize("deadline", [16.0, 15.0, 14.0])
def test_agreement_with_grid(benchmark_scenarios, deadline):
    s = benchmark_scenarios[deadline]
    rep = simulate_profile(s, SimConfig(trials=1_000_000, seed=0))
    grid = return_profile_grid(s)
    empirical = rep.profile.p_return + (rep.profile.p_success,)
    analytic = grid.p_return + (grid.p_success,)
    for emp, ana in zip(empirical, analytic):
        assert abs(emp - ana) <= 0.004


def test_policy_matches_decision_rule(t16):
    # replay the simulator's own draws through the scalar decision rule
    tbl = thresholds(t16)
    rep = simulate_profile(t16, SimConfig(trials=2000, seed=13))
    rng = _block_rng(13, 0)
    x = rng.normal(t16.hop_mean, math.sqrt(t16.hop_var), size=(1 << 16, t16.n))[:2000]
    counts = [0] * t16.n
    for row in x:
        t = 0.0
        outcome = 0
        for k in range(1, t16.n):
            t += row[k - 1]
            if decision_rule(k, t, t16, tbl) == "return":
                outcome = k
                break
        counts[outcome] += 1
    assert tuple(counts[1:]) + (counts[0],) == rep.counts


def test_ci_halfwidths(t16):
    rep = simulate_profile(t16, SimConfig(trials=1_000_000, seed=0))
    z99 = 2.5758293035489004
    for p, hw in zip(rep.profile.p_return + (rep.profile.p_success,), rep.ci_halfwidth):
        assert hw == pytest.approx(z99 * math.sqrt(p * (1 - p) / rep.trials), rel=1e-12)


# --- rest-time baseline -------------------------------------------------------


def test_baseline_requires_rest_time(t16):
    with pytest.raises(ScenarioError):
        simulate_baseline(t16, SimConfig(trials=100, seed=0))


def test_baseline_zero_rest_time_never_returns():
    s = Scenario(n=6, hop_mean=3.0, hop_var=1.0, deadline=30.0, p_tr=0.9)
    rep = simulate_baseline(s, SimConfig(trials=10_000, seed=3, policy="rest_time", t_tr=0.0))
    assert rep.counts[-1] == 10_000


def test_baseline_rest_time_above_deadline_returns_at_node_one():
    s = Scenario(n=6, hop_mean=3.0, hop_var=1.0, deadline=16.0, p_tr=0.9)
    rep = simulate_baseline(s, SimConfig(trials=10_000, seed=3, policy="rest_time", t_tr=30.0))
    assert rep.counts[0] == 10_000


def test_baseline_against_constant_threshold_grid():
    s = Scenario(n=6, hop_mean=3.0, hop_var=1.0, deadline=30.0, p_tr=0.9)
    cfg = SimConfig(trials=1_000_000, seed=21, policy="rest_time", t_tr=12.0)
    rep = simulate_baseline(s, cfg)
    oracle = return_profile_grid(s, threshold_table=ThresholdTable((12.0,) * 5, s.p_tr))
    assert abs(rep.profile.p_success - oracle.p_success) <= 0.004
    for emp, ana in zip(rep.profile.p_return, oracle.p_return):
        assert abs(emp - ana) <= 0.004


# --- attempt simulation ---------------------------------------------------------


def test_attempts_matches_retry_model(t16):
    s = replace(t16, hop_distance=1.0)
    emp = simulate_attempts(s, SimConfig(trials=100_000, seed=17))
    model = waste_per_success(return_profile_grid(s), 1.0)
    assert emp.successes == 100_000
    assert abs(emp.waste_per_success - model) / model <= 0.03
    assert emp.expected_total_distance == emp.waste_per_success + 1.0 * s.n


def test_attempts_deterministic(t16):
    cfg = SimConfig(trials=5000, seed=4)
    assert simulate_attempts(t16, cfg) == simulate_attempts(t16, cfg)


def test_attempts_near_certain_success():
    # generous budget and permissive threshold: no retries, no waste
    s = Scenario(n=6, hop_mean=3.0, hop_var=1.0, deadline=30.0, p_tr=1.0 - 1e-9,
                 hop_distance=2.0)
    rep = simulate_attempts(s, SimConfig(trials=1000, seed=9))
    assert rep.waste_per_success == 0.0
    assert rep.expected_total_distance == 2.0 * s.n
    assert rep.attempts_per_success == 1.0


def test_attempts_no_success_error():
    s = Scenario(n=6, hop_mean=3.0, hop_var=1.0, deadline=5.0, p_tr=0.9)
    with pytest.raises(NoSuccessError):
        simulate_attempts(s, SimConfig(trials=10, seed=2, attempt_cap=100_000))


def test_attempts_cap_truncates_at_last_success(t16):
    rep = simulate_attempts(t16, SimConfig(trials=10_000_000, seed=3, attempt_cap=10_000))
    assert rep.successes < 10_000_000
    assert rep.attempts <= 10_000
    # the stream ends on a success, so the rates stay consistent
    assert rep.p_success == rep.successes / rep.attempts


def test_attempts_requires_quantile(t16):
    with pytest.raises(ScenarioError):
        simulate_attempts(t16, SimConfig(trials=10, seed=0, policy="rest_time", t_tr=3.0))
