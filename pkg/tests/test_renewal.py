import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from availbound import renewal
from availbound.model import ModelParams, Regime, SystemState
from availbound.rng import UniformStream, bit_generator, generator

M = ModelParams.pareto()
X10, X20 = SystemState(1, 0.0), SystemState(2, 0.0)


def test_first_interval_is_working_time():
    firsts = []
    for i in range(20_000):
        _, ev = renewal.simulate_trajectory(M, X10, 50.0, UniformStream(bit_generator(3, "first", i)))
        firsts.append(ev[0].switch_time)
    assert stats.kstest(firsts, M.work.cdf).pvalue > 0.01


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 2), st.floats(0, 10), st.floats(0.1, 200), st.integers(0, 10**6))
def test_events_alternate_and_increase(regime, elapsed, horizon, seed):
    start, ev = renewal.simulate_trajectory(M, SystemState(regime, elapsed), horizon,
                                            UniformStream(bit_generator(seed, "prop")))
    times = [e.switch_time for e in ev]
    assert all(a < b for a, b in zip(times, times[1:]))
    assert all(t <= horizon for t in times)
    regs = [start.regime] + [e.new_regime for e in ev]
    assert all(a != b for a, b in zip(regs, regs[1:]))


def test_trajectory_replays_kernel_path():
    grid = np.array([0.0, 0.3, 1.0, 7.0])
    curve = renewal.availability_curve(M, X10, grid, 300, seed=5)
    counts = np.zeros(grid.size, dtype=int)
    for n in range(300):
        start, ev = renewal.simulate_trajectory(M, X10, grid[-1], renewal.trajectory_stream(5, X10, n))
        counts += [renewal.regime_at(start, ev, t) == Regime.WORKING for t in grid]
    assert np.array_equal(counts, curve.counts)


def test_stationary_trajectory_replays_kernel_path():
    grid = np.array([0.0, 2.0])
    curve = renewal.stationary_start_curve(M, grid, 200, seed=6)
    counts = np.zeros(2, dtype=int)
    for n in range(200):
        start, ev = renewal.simulate_trajectory(M, None, 2.0, renewal.trajectory_stream(6, None, n))
        counts += [renewal.regime_at(start, ev, t) == Regime.WORKING for t in grid]
    assert np.array_equal(counts, curve.counts)


def test_mean_switches_renewal_rate(oracles):
    sw = renewal.switch_counts(M, X10, 200.0, 20_000, seed=8)
    se = sw.std() / math.sqrt(sw.size)
    # 300 cycles of two switches each
    assert abs(sw.mean() - oracles["mean_switches_T200"]) < 4 * se + 1.0


def test_start_values():
    assert renewal.availability_curve(M, X10, [0, 1], 500, seed=1).a_hat[0] == 1.0
    assert renewal.availability_curve(M, X20, [0, 1], 500, seed=1).a_hat[0] == 0.0


def test_curve_validation():
    with pytest.raises(ValueError):
        renewal.availability_curve(M, X10, [0, 1], 50, seed=1)
    with pytest.raises(ValueError):
        renewal.availability_curve(M, X10, [1, 0.5], 500, seed=1)


def test_limit_half():
    c = renewal.availability_curve(M, X10, [100.0], 50_000, seed=2)
    assert c.covers(0.5)[0]


def test_stationary_flat_and_sqrt_scaling():
    grid = np.linspace(0, 20, 21)
    small = renewal.stationary_start_curve(M, grid, 10_000, seed=3)
    big = renewal.stationary_start_curve(M, grid, 40_000, seed=3)
    assert np.mean(big.covers(0.5)) >= 0.95
    ratio = big.ci_half_width / small.ci_half_width
    assert np.all(np.abs(ratio - 0.5) < 0.1)


def test_ergodic_time_average():
    frac = renewal.time_average_availability(M, X10, 1e4, UniformStream(bit_generator(4, "ergodic")))
    assert abs(frac - 0.5) < 0.025


def test_cycle_lengths_match_convolution():
    a = renewal.cycle_lengths(M, 100_000, generator(1, "cycles-a"))
    # independent Monte Carlo of the convolution of the two laws
    g = generator(2, "cycles-b")
    u, v = g.random(100_000), g.random(100_000)
    b = (1 - u) ** -0.25 - 1 + (1 - v) ** -0.25 - 1
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_curve_outputs():
    c = renewal.availability_curve(M, X10, [0, 1, 2], 200, seed=1)
    lines = c.to_csv().splitlines()
    assert lines[0] == "t,a_hat,ci_lo,ci_hi" and len(lines) == 4
    d = c.to_dict()
    assert d["ci_method"] == "wilson" and len(d["a_hat"]) == 3
    assert np.all((c.ci_lo <= c.a_hat) & (c.a_hat <= c.ci_hi))


def test_threads_do_not_change_results():
    grid = np.linspace(0, 10, 11)
    a = renewal.availability_curve(M, X10, grid, 5000, seed=4, threads=1)
    b = renewal.availability_curve(M, X10, grid, 5000, seed=4, threads=4)
    assert np.array_equal(a.counts, b.counts)
