"""Event-driven Monte Carlo of the alternating process and availability curves.

Trajectory ``n`` of a curve draws from its own stream, so
``simulate_trajectory`` with ``trajectory_stream(seed, start, n)`` replays
exactly the path the block kernels used for that trajectory.
"""
from __future__ import annotations

import bisect
import csv
import io
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels, rng as rngmod
from .model import ModelParams, Regime, SystemState
from .stats import wilson_interval


@dataclass(frozen=True)
class TrajectoryEvent:
    switch_time: float
    new_regime: Regime


def start_label(x0: SystemState | None) -> str:
    return "stationary" if x0 is None else f"availability/{x0}"


def trajectory_stream(seed: int, x0: SystemState | None, index: int) -> rngmod.UniformStream:
    return rngmod.UniformStream(rngmod.bit_generator(seed, start_label(x0), index))


def simulate_trajectory(model: ModelParams, x0: SystemState | None, horizon: float,
                        rng) -> tuple[SystemState, list[TrajectoryEvent]]:
    """Switch events in ``[0, horizon]``.

    ``x0=None`` starts from a stationary draw.  The first period is the
    residual of the starting regime; later ones are full periods.  Returns
    the actual starting state and the events.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if x0 is None:
        x0 = model.equilibrium_sample(rng)
    else:
        model.check_state(x0)
    regime = int(x0.regime)
    end = model.law(regime).residual_inverse(x0.elapsed, rng.random())
    events = []
    while horizon >= end:
        regime = 3 - regime
        events.append(TrajectoryEvent(end, Regime(regime)))
        end = end + model.law(regime).residual_inverse(0.0, rng.random())
    return x0, events


def regime_at(start: SystemState, events: Sequence[TrajectoryEvent], t: float) -> Regime:
    """Regime at time ``t``; a switch at exactly ``t`` has already happened."""
    k = bisect.bisect_right([e.switch_time for e in events], t)
    return start.regime if k == 0 else events[k - 1].new_regime


@dataclass
class AvailabilityCurve:
    grid: np.ndarray
    counts: np.ndarray
    n_traj: int
    seed: int
    level: float = 0.99
    start: str = ""

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        self.ci_lo, self.ci_hi = wilson_interval(self.counts, self.n_traj, self.level)
        self.ci_lo = np.clip(self.ci_lo, 0.0, 1.0)
        self.ci_hi = np.clip(self.ci_hi, 0.0, 1.0)

    @property
    def a_hat(self) -> np.ndarray:
        return self.counts / self.n_traj

    @property
    def ci_half_width(self) -> np.ndarray:
        return 0.5 * (self.ci_hi - self.ci_lo)

    def covers(self, value: float) -> np.ndarray:
        return (self.ci_lo <= value) & (value <= self.ci_hi)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "a_hat", "ci_lo", "ci_hi"])
        for row in zip(self.grid, self.a_hat, self.ci_lo, self.ci_hi):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "start": self.start, "n_traj": self.n_traj, "seed": self.seed,
            "ci_level": self.level, "ci_method": "wilson",
            "grid": self.grid.tolist(), "a_hat": self.a_hat.tolist(),
            "ci_lo": self.ci_lo.tolist(), "ci_hi": self.ci_hi.tolist(),
            "ci_half_width": self.ci_half_width.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _run_curve(model, x0, grid, n_traj, seed, threads):
    grid = np.asarray(grid, dtype=float)
    if n_traj < 100:
        raise ValueError("n_traj must be at least 100")
    equilibrium = x0 is None
    regime = 1 if equilibrium else int(x0.regime)
    elapsed = 0.0 if equilibrium else float(x0.elapsed)
    name = start_label(x0)

    def block(start, count):
        return kernels.availability_block(
            model, rngmod.bit_generators(seed, name, start, count),
            np.full(count, regime, dtype=np.int_), np.full(count, elapsed), equilibrium, grid)

    parts = kernels.run_blocks(block, n_traj, threads)
    counts = np.sum([c for c, _ in parts], axis=0)
    switches = np.concatenate([s for _, s in parts])
    return counts, switches


def availability_curve(model: ModelParams, x0: SystemState, grid, n_traj: int, seed: int, *,
                       level: float = 0.99, threads: int | None = None) -> AvailabilityCurve:
    """Fraction of ``n_traj`` trajectories from ``x0`` that are working at each grid time."""
    model.check_state(x0)
    counts, _ = _run_curve(model, x0, grid, n_traj, seed, threads)
    return AvailabilityCurve(grid, counts, n_traj, seed, level, str(x0))


def stationary_start_curve(model: ModelParams, grid, n_traj: int, seed: int, *,
                           level: float = 0.99, threads: int | None = None) -> AvailabilityCurve:
    """As :func:`availability_curve` with each trajectory started from the stationary law."""
    counts, _ = _run_curve(model, None, grid, n_traj, seed, threads)
    return AvailabilityCurve(grid, counts, n_traj, seed, level, "stationary")


def switch_counts(model: ModelParams, x0: SystemState, horizon: float, n_traj: int,
                  seed: int, threads: int | None = None) -> np.ndarray:
    """Number of regime switches in ``[0, horizon]`` per trajectory."""
    _, switches = _run_curve(model, x0, [horizon], n_traj, seed, threads)
    return switches


def time_average_availability(model: ModelParams, x0: SystemState, horizon: float, rng) -> float:
    """Fraction of ``[0, horizon]`` spent working along one trajectory."""
    start, events = simulate_trajectory(model, x0, horizon, rng)
    up = 0.0
    last, regime = 0.0, int(start.regime)
    for e in events:
        if regime == 1:
            up += e.switch_time - last
        last, regime = e.switch_time, int(e.new_regime)
    if regime == 1:
        up += horizon - last
    return up / horizon


def cycle_lengths(model: ModelParams, n: int, rng) -> np.ndarray:
    """``n`` regeneration cycle lengths (working period plus repair period)."""
    return np.array([model.sample(1, rng) + model.sample(2, rng) for _ in range(n)])
