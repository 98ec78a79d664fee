import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dasep.configspace import Config, all_configs, index_of
from dasep.duality import MeasureParams, nu_vector
from dasep.generator import GeneratorParams
from dasep.simulate import (
    ConjectureParams,
    SimParams,
    TrajectoryState,
    exact_evolution,
    mc_duality_check,
    next_event,
    occupation_times,
    rate_table,
    run_trajectory,
    run_trials,
    step_ic_experiment,
    step_initial_condition,
    trial_rng,
)

P = GeneratorParams(0.5, 2)


def test_simparams_validation():
    with pytest.raises(ValueError):
        SimParams(1, 0.5, 2, 1.0)
    with pytest.raises(ValueError):
        SimParams(3, 0.5, 2, -1.0)
    with pytest.raises(ValueError):
        SimParams(3, 1.5, 2, 1.0)


def test_frozen_state():
    s = next_event(TrajectoryState(Config((0, 0, 0))), rate_table(P), trial_rng(0, 0), t_max=5.0)
    assert s.time == 5.0 and s.event_count == 0
    assert s.config == Config((0, 0, 0))


def test_single_particle_rate():
    q, n = P.q, P.n
    tab = rate_table(P)
    k = 4 * 1 + 0
    assert tab.count[k] == 1
    assert tab.targets[k, 0] == 1
    assert tab.total[k] == pytest.approx((q ** (1 - 2 * n) + q ** (2 * n - 1)) / q, rel=1e-15)
    s = next_event(TrajectoryState(Config((1, 0))), tab, trial_rng(1, 0))
    assert s.config == Config((0, 1))


def test_mean_holding_time():
    tab = rate_table(P)
    rng = trial_rng(7, 0)
    start = TrajectoryState(Config((1, 0)))
    times = np.array([next_event(start, tab, rng).time for _ in range(10_000)])
    rate = tab.total[4]
    se = times.std(ddof=1) / math.sqrt(times.size)
    assert abs(times.mean() - 1 / rate) <= 3 * se


def test_t_zero_returns_initial():
    sp = SimParams(4, 0.5, 2, 0.0)
    assert run_trajectory("3120", sp, 0) == Config.parse("3120")


def test_determinism():
    sp = SimParams(6, 0.3, 3, 2.0, master_seed=42)
    a = [run_trajectory("331000", sp, k) for k in range(5)]
    b = [run_trajectory("331000", sp, k) for k in reversed(range(5))][::-1]
    assert a == b
    assert np.array_equal(run_trials("331000", SimParams(6, 0.3, 3, 2.0, 5, 42)),
                          [index_of(c) for c in a])


@given(st.lists(st.integers(0, 3), min_size=2, max_size=8), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_conservation(sites, seed):
    c = Config(tuple(sites))
    out = run_trajectory(c, SimParams(c.L, 0.7, 2, 1.5, master_seed=seed), 0)
    assert out.counts() == c.counts()


def test_python_step_conserves():
    tab = rate_table(GeneratorParams(0.3, 3))
    rng = trial_rng(3, 0)
    s = TrajectoryState(Config.parse("3312"))
    for _ in range(500):
        s = next_event(s, tab, rng)
        assert s.config.counts() == (3, 3)


def test_exact_evolution_basics():
    v0 = exact_evolution("31", 2, P, 0.0)
    assert v0[index_of("31")] == 1.0 and v0.sum() == 1.0
    for L, c in ((2, "31"), (3, "120")):
        v = exact_evolution(c, L, P, 1.0)
        assert abs(v.sum() - 1.0) <= 1e-10
        assert v.min() >= -1e-15
    with pytest.raises(ValueError):
        exact_evolution("3100", 4, P, 1.0)


def test_mc_matches_exact_L2():
    sp = SimParams(2, 0.5, 2, 1.0, trials=100_000, master_seed=5)
    final = run_trials("31", sp)
    freq = np.bincount(final, minlength=16) / sp.trials
    exact = exact_evolution("31", 2, P, 1.0)
    se = np.sqrt(np.maximum(exact * (1 - exact), 1e-300) / sp.trials)
    mask = exact > 1e-9
    assert np.all(np.abs(freq - exact)[mask] <= 3 * se[mask])
    assert np.all(freq[~mask] == 0)


def test_mc_duality_empty_xi():
    sp = SimParams(3, 0.5, 2, 1.0, trials=200, master_seed=1)
    r = mc_duality_check("310", "000", sp, MeasureParams(10, 10))
    assert r.details["lhs"] == 1.0 and r.details["rhs"] == 1.0
    assert r.details["se_lhs"] == 0.0 and r.details["se_rhs"] == 0.0
    assert r.passed and r.details["oracle_pass"]


def test_mc_duality_L2():
    sp = SimParams(2, 0.5, 2, 1.0, trials=5000, master_seed=3)
    r = mc_duality_check("31", "13", sp, MeasureParams(10, 10))
    assert r.passed and r.details["oracle_pass"]


def test_stationary_measure_L2():
    # long-run occupation in the sector with one particle of each class
    n_events = 100_000
    times, blocks = occupation_times("30", P, n_events, seed=9)
    sector = [index_of(c) for c in all_configs(2) if c.counts() == (1, 1)]
    nu = nu_vector(2, MeasureParams(2.0, 3.0), P.q)[sector]
    # nu restricted to a fixed-count sector does not depend on alpha up to normalization
    target = nu / nu.sum()
    frac = times[sector] / times.sum()
    block_frac = blocks[:, sector] / blocks.sum(axis=1, keepdims=True)
    se = block_frac.std(axis=0, ddof=1) / math.sqrt(block_frac.shape[0])
    assert np.all(np.abs(frac - target) <= 3 * se)


def test_conjecture_params():
    cp = ConjectureParams(50, 200.0, 0.5, 2)
    assert cp.sigma == 0.25
    assert cp.c1 == pytest.approx(0.0, abs=1e-15)
    assert cp.c2 == pytest.approx(0.25 ** (-1 / 6) * 0.5 ** (2 / 3))
    assert cp.tau < 0 and cp.tau_abs == -cp.tau
    assert cp.tau_asep == pytest.approx(200.0 / (P.speed * 1.5))
    with pytest.raises(ValueError):
        ConjectureParams(300, 200.0, 0.5, 2)
    with pytest.raises(ValueError):
        cp.process_time("other")


def test_step_initial_condition():
    assert step_initial_condition(6) == Config.parse("333000")


def test_step_ic_t_zero():
    res = step_ic_experiment(20, P, 0.0, [1, 3], trials=2, seed=0)
    for m in (1, 3):
        for species in (1, 2):
            assert np.all(res.sample(species, m, rescaled=False) == m)
            assert np.all(np.isnan(res.sample(species, m)))


def test_step_ic_small_run():
    res = step_ic_experiment(120, P, 20.0, [5], trials=20, seed=4)
    assert not res.contaminated
    assert res.sample(1, 5).size == 20
    s = res.summary()
    assert set(s) == {"species1_m5", "species2_m5"}
    again = step_ic_experiment(120, P, 20.0, [5], trials=20, seed=4)
    assert again.rows == res.rows


def test_step_ic_contamination_flag():
    res = step_ic_experiment(30, P, 40.0, [2], trials=3, seed=0)
    assert res.contaminated == [0, 1, 2]
    assert res.rows == []
