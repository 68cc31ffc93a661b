"""Paired process driving two copies of the alternating process until they merge.

Between consecutive switch times the pair evolves deterministically; at each
switch the next residual durations ``(theta1, theta2)`` are drawn by one of
three rules:

* states equal: one shared draw, the copies move together;
* both working with different elapsed times: one uniform feeds the
  min-density splice, so ``theta1 == theta2`` with probability
  ``kappa_{x,y} = int min(f^(x), f^(y))`` and both then jump to ``(2, 0)``;
* otherwise: independent residual draws.

The copy (or copies) attaining ``min(theta1, theta2)`` switches regime with
elapsed time reset to zero; the other ages by the same amount.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Iterator

import numpy as np
from scipy.optimize import brentq

from . import kernels, numerics, rng as rngmod
from .bounds import BoundParams, coupling_q, kappa as kappa_T
from .errors import CapExceeded, InversionFailed
from .model import ModelParams, SystemState
from .stats import wilson_interval

_U_MAX = 1.0 - 2.0 ** -53
DEFAULT_CAP = 10_000_000


@dataclass(frozen=True)
class PairedState:
    z1: SystemState
    z2: SystemState
    coupled: bool = False
    clock: float = 0.0


# ---------------------------------------------------------------- min-density kits


class ParetoKit:
    """Min-density splice for two Pareto residual laws (working regime).

    For elapsed times ``lo < hi`` the residual densities cross exactly once,
    at ``s*``: the older copy's density is the smaller one on ``[0, s*]`` and
    the younger copy's beyond.  With ``D(s) = S^hi(s) - S^lo(s)`` (difference
    of residual survivals) everything has a closed form except the two
    inversions of ``D``, which use :func:`numerics.invert_monotone`.

    ``_ckernels.splice_pair`` mirrors :meth:`draw`; keep them in step.
    """

    def __init__(self, K: float, x: float, y: float):
        self.K = float(K)
        self.x = float(x)
        self.y = float(y)
        self.lo = min(self.x, self.y)
        self.hi = max(self.x, self.y)
        if self.x == self.y:
            self.s_star = math.inf
            self.gap_max = 0.0
            self.kappa = 1.0
        else:
            d = math.log1p((self.hi - self.lo) / (1.0 + self.lo))
            e = math.expm1(self.K / (self.K + 1.0) * d)
            self.s_star = (1.0 + self.lo) * (math.expm1(d) - e) / e
            self.gap_max = self.gap(self.s_star)
            self.kappa = 1.0 - self.gap_max

    def _surv(self, x, s):
        return ((1.0 + x) / (1.0 + x + s)) ** self.K

    def _inv(self, x, u):
        return (1.0 + x) * (1.0 - u) ** (-1.0 / self.K) - (1.0 + x)

    def gap(self, s):
        """``S^hi(s) - S^lo(s)``; increases on ``[0, s*]`` and decreases after."""
        K, lo, hi = self.K, self.lo, self.hi
        return ((1.0 + hi) / (1.0 + hi + s)) ** K - ((1.0 + lo) / (1.0 + lo + s)) ** K

    def _pdf(self, x, s):
        return self.K / (1.0 + x + s) * self._surv(x, s)

    def _cdf(self, x, s):
        return 1.0 - self._surv(x, s)

    def phi(self, s):
        return np.minimum(self._pdf(self.x, s), self._pdf(self.y, s))

    def Phi(self, s):
        s = np.asarray(s, dtype=float)
        if self.x == self.y:
            return self._cdf(self.x, s)
        ss = self.s_star
        head = self._cdf(self.hi, np.minimum(s, ss))
        tail = np.where(s > ss, self._cdf(self.lo, s) - self._cdf(self.lo, ss), 0.0)
        return head + tail

    def Phi_hat(self, s):
        """``F^(x)(s) - Phi(s)`` (first argument is ``x``)."""
        return self._cdf(self.x, s) - self.Phi(s)

    def draw(self, u: float) -> tuple[float, float]:
        """Map one uniform to ``(theta_x, theta_y)``."""
        if self.x == self.y:
            t = self._inv(self.x, u)
            return t, t
        lo, hi, ss = self.lo, self.hi, self.s_star
        if u < self.kappa:
            f_hi = 1.0 - self._surv(hi, ss)
            if u < f_hi:
                t = self._inv(hi, u)
            else:
                target = u - f_hi + (1.0 - self._surv(lo, ss))
                t = self._inv(lo, min(target, _U_MAX))
            return t, t
        gap = self.gap
        t_lo = numerics.invert_monotone(gap, min(u - self.kappa, self.gap_max), 0.0, ss)
        t_hi = numerics.invert_monotone(lambda s: -gap(s), -(1.0 - u), ss, 2.0 * ss + 1.0)
        return (t_lo, t_hi) if self.x == lo else (t_hi, t_lo)


class GenericKit:
    """Min-density splice for an arbitrary working law with a density.

    Crossings of the two residual densities are located by a sign scan on a
    grid containing every table node (shifted by ``x`` and ``y``) refined
    tenfold, then polished with Brent's method.  Between crossings the
    minimum is one of the two densities, so ``Phi`` is a sum of residual-CDF
    increments.  Crossing pairs closer than the scan spacing can be missed.
    """

    def __init__(self, law, x: float, y: float):
        self.law = law
        self.x = float(x)
        self.y = float(y)
        if self.x == self.y:
            self.bounds = [0.0, math.inf]
            self.owner = [self.x]
        else:
            self.bounds, self.owner = self._segments()
        self.cum = [0.0]
        for (l, r), w in zip(zip(self.bounds[:-1], self.bounds[1:]), self.owner):
            self.cum.append(self.cum[-1] + self._F(w, r) - self._F(w, l))
        self.kappa = min(1.0, self.cum[-1])
        self._hat = {}
        for first, other in ((self.x, self.y), (self.y, self.x)):
            acc = [0.0]
            for (l, r), w in zip(zip(self.bounds[:-1], self.bounds[1:]), self.owner):
                inc = 0.0
                if w == other and first != other:
                    inc = (self._F(first, r) - self._F(first, l)) - (self._F(other, r) - self._F(other, l))
                acc.append(acc[-1] + max(inc, 0.0))
            self._hat[first] = acc

    def _F(self, x, s):
        if s == math.inf:
            return 1.0
        return float(self.law.residual_cdf(x, s))

    def _f(self, x, s):
        return float(self.law.residual_pdf(x, s))

    def _segments(self):
        x, y = self.x, self.y
        nodes = np.asarray(self.law.nodes or (0.0,), dtype=float)
        shifted = np.concatenate([nodes - x, nodes - y])
        end = max(float(nodes[-1]) - min(x, y), 0.0) + 1.0
        base = np.unique(np.concatenate([[0.0, end], shifted[(shifted > 0) & (shifted < end)]]))
        t = np.linspace(0.0, 1.0, 11)
        scan = np.unique((base[:-1, None] + np.diff(base)[:, None] * t).ravel())
        d = np.array([self._f(x, s) - self._f(y, s) for s in scan])
        roots = []
        for k in range(scan.size - 1):
            if d[k] == 0.0 and k > 0:
                roots.append(float(scan[k]))
            elif d[k] * d[k + 1] < 0:
                roots.append(brentq(lambda s: self._f(x, s) - self._f(y, s),
                                    scan[k], scan[k + 1], xtol=1e-14))
        bounds = [0.0] + sorted(set(roots)) + [math.inf]
        owner = []
        for l, r in zip(bounds[:-1], bounds[1:]):
            mid = l + 1.0 if r == math.inf else 0.5 * (l + r)
            owner.append(y if self._f(x, mid) > self._f(y, mid) else x)
        return bounds, owner

    def phi(self, s):
        return np.minimum(self.law.residual_pdf(self.x, s), self.law.residual_pdf(self.y, s))

    def _Phi_scalar(self, s):
        total = 0.0
        for (l, r), w in zip(zip(self.bounds[:-1], self.bounds[1:]), self.owner):
            if s <= l:
                break
            total += self._F(w, min(r, s)) - self._F(w, l)
        return total

    def Phi(self, s):
        if np.ndim(s):
            return np.array([self._Phi_scalar(float(v)) for v in np.ravel(s)]).reshape(np.shape(s))
        return self._Phi_scalar(float(s))

    def Phi_hat(self, s):
        return self.law.residual_cdf(self.x, s) - self.Phi(s)

    def _invert_common(self, u):
        k = int(np.searchsorted(self.cum, u, side="right")) - 1
        k = min(max(k, 0), len(self.owner) - 1)
        l, r = self.bounds[k], self.bounds[k + 1]
        w = self.owner[k]
        target = min(self._F(w, l) + (u - self.cum[k]), _U_MAX)
        t = self.law.residual_inverse(w, target)
        return min(max(t, l), r)

    def _invert_hat(self, first, other, v):
        acc = self._hat[first]
        k = int(np.searchsorted(acc, v, side="right")) - 1
        # skip flat segments and clamp rounding overshoot to the last rising one
        rising = [i for i in range(len(self.owner)) if acc[i + 1] > acc[i]]
        if not rising:
            raise InversionFailed("no rising segment in the residual splice")
        if k not in rising:
            later = [i for i in rising if i >= k]
            k = later[0] if later else rising[-1]
        l, r = self.bounds[k], self.bounds[k + 1]
        base = self._F(first, l) - self._F(other, l)

        def G(s):
            return self._F(first, s) - self._F(other, s) - base

        target = min(v - acc[k], acc[k + 1] - acc[k])
        if G(l) >= target:
            return l
        hi = r if r != math.inf else 2.0 * l + 1.0
        grown = 0
        while r == math.inf and G(hi) < target and grown < 200:
            hi = 2.0 * hi + 1.0
            grown += 1
        if G(hi) <= target:
            return hi
        return brentq(lambda s: G(s) - target, l, hi, xtol=1e-13, rtol=1e-14)

    def draw(self, u: float) -> tuple[float, float]:
        if u < self.kappa or self.x == self.y:
            t = self._invert_common(u)
            return t, t
        v = u - self.kappa
        return self._invert_hat(self.x, self.y, v), self._invert_hat(self.y, self.x, v)


def min_density_kit(model: ModelParams, x: float, y: float):
    """Evaluators ``phi``, ``Phi``, ``Phi_hat``, the scalar ``kappa`` and ``draw``."""
    if model.work.is_pareto:
        return ParetoKit(model.K1, x, y)
    return GenericKit(model.work, x, y)


def sample_coupled_pair(model: ModelParams, x: float, y: float, rng) -> tuple[float, float]:
    """One spliced draw: marginals ``F1^(x)`` and ``F1^(y)``, equal w.p. ``kappa_{x,y}``."""
    return min_density_kit(model, x, y).draw(rng.random())


def splice_draws(model: ModelParams, x: float, y: float, n: int, seed: int,
                 name: str = "splice") -> tuple[np.ndarray, np.ndarray]:
    """``n`` spliced pairs from one named stream."""
    return kernels.splice_block(model, x, y, rngmod.bit_generator(seed, f"{name}/{x!r}/{y!r}"), n)


# ---------------------------------------------------------------- paired dynamics


def _advance(model: ModelParams, m1: int, x1: float, m2: int, x2: float, rng):
    """One switch event; returns ``(m1, x1, m2, x2, theta)``.

    ``_ckernels.coupling_block`` mirrors this; keep them in step.
    """
    work, repair = model.work, model.repair
    if m1 == m2 and x1 == x2:
        law = work if m1 == 1 else repair
        theta = law.residual_inverse(x1, rng.random())
        return 3 - m1, 0.0, 3 - m1, 0.0, theta
    if m1 == 1 and m2 == 1:
        t1, t2 = min_density_kit(model, x1, x2).draw(rng.random())
    else:
        u1 = rng.random()
        u2 = rng.random()
        t1 = (work if m1 == 1 else repair).residual_inverse(x1, u1)
        t2 = (work if m2 == 1 else repair).residual_inverse(x2, u2)
    theta = t1 if t1 < t2 else t2
    if t1 == theta:
        m1, x1 = 3 - m1, 0.0
    else:
        x1 = x1 + theta
    if t2 == theta:
        m2, x2 = 3 - m2, 0.0
    else:
        x2 = x2 + theta
    return m1, x1, m2, x2, theta


def step_paired(model: ModelParams, state: PairedState, rng) -> PairedState:
    """Advance the pair to its next switch time."""
    m1, x1, m2, x2, theta = _advance(
        model, int(state.z1.regime), state.z1.elapsed, int(state.z2.regime), state.z2.elapsed, rng)
    z1, z2 = SystemState(m1, x1), SystemState(m2, x2)
    return PairedState(z1, z2, state.coupled or z1 == z2, state.clock + theta)


def paired_path(model: ModelParams, z0_1: SystemState, z0_2: SystemState,
                rng) -> Iterator[tuple[float, int, float, int, float]]:
    """Endless sequence of ``(clock, m1, x1, m2, x2)`` after each switch."""
    m1, x1 = int(z0_1.regime), z0_1.elapsed
    m2, x2 = int(z0_2.regime), z0_2.elapsed
    clock = 0.0
    while True:
        m1, x1, m2, x2, theta = _advance(model, m1, x1, m2, x2, rng)
        clock = clock + theta
        yield clock, m1, x1, m2, x2


def coupling_time(model: ModelParams, z0_1: SystemState, z0_2: SystemState, rng,
                  cap: int = DEFAULT_CAP) -> float:
    """First time the two copies coincide; 0 if they start equal."""
    if z0_1 == z0_2:
        return 0.0
    events = 0
    for clock, m1, x1, m2, x2 in paired_path(model, z0_1, z0_2, rng):
        events += 1
        if m1 == m2 and x1 == x2:
            return clock
        if events >= cap:
            raise CapExceeded(f"no coupling within {cap} events")
    raise AssertionError("unreachable")


# ---------------------------------------------------------------- statistics


@dataclass
class CouplingStats:
    alpha: float
    samples: np.ndarray
    events: np.ndarray
    level: float = 0.99
    seed: int | None = None
    bound: float | None = None
    meet_log: dict = field(default_factory=dict)

    @property
    def n_runs(self) -> int:
        return int(self.samples.size)

    @property
    def powered(self) -> np.ndarray:
        return (1.0 + self.samples) ** self.alpha

    @property
    def moment(self) -> float:
        return float(np.mean(self.powered))

    @property
    def moment_ci(self) -> tuple[float, float]:
        z = NormalDist().inv_cdf(0.5 + self.level / 2.0)
        vals = self.powered
        half = z * float(np.std(vals, ddof=1)) / math.sqrt(vals.size) if vals.size > 1 else math.inf
        return self.moment - half, self.moment + half

    def to_dict(self) -> dict:
        lo, hi = self.moment_ci
        return {
            "alpha": self.alpha,
            "n_runs": self.n_runs,
            "seed": self.seed,
            "ci_level": self.level,
            "moment": self.moment,
            "moment_ci": [lo, hi],
            "bound": self.bound,
            "moment_upper_ci_below_bound": None if self.bound is None else hi <= self.bound,
            "sigma_mean": float(np.mean(self.samples)),
            "sigma_quantiles": {str(q): float(np.quantile(self.samples, q))
                                for q in (0.5, 0.9, 0.99, 1.0)},
            "events_mean": float(np.mean(self.events)),
            "events_max": int(np.max(self.events)),
            "meet_log": self.meet_log,
        }


def coupling_times(model: ModelParams, z0_1: SystemState, z0_2: SystemState,
                   n_runs: int, seed: int, *, cap: int = DEFAULT_CAP, threads: int | None = None,
                   name: str = "coupling") -> tuple[np.ndarray, np.ndarray]:
    """Coupling times and event counts of ``n_runs`` independent pairs."""
    model.check_state(z0_1)
    model.check_state(z0_2)
    stream = f"{name}/{z0_1}/{z0_2}"
    sigma, events, capped = kernels.concat(kernels.run_blocks(
        lambda start, count: kernels.coupling_block(
            model, rngmod.bit_generators(seed, stream, start, count), z0_1, z0_2, cap),
        n_runs, threads))
    n_capped = int(np.count_nonzero(capped))
    if n_capped:
        raise CapExceeded(f"{n_capped} of {n_runs} runs did not couple within {cap} events")
    return sigma, events


def coupling_stats(model: ModelParams, z0_1: SystemState, z0_2: SystemState, alpha: float,
                   n_runs: int, seed: int, *, level: float = 0.99, bound: float | None = None,
                   cap: int = DEFAULT_CAP, threads: int | None = None) -> CouplingStats:
    sigma, events = coupling_times(model, z0_1, z0_2, n_runs, seed, cap=cap, threads=threads)
    return CouplingStats(alpha, sigma, events, level, seed, bound)


# ---------------------------------------------------------------- marginal checks


def paired_cycle_lengths(model: ModelParams, z0_1: SystemState, z0_2: SystemState,
                         n_periods: int, seed: int, per_run: int = 20) -> dict[str, np.ndarray]:
    """Complete working/repair period lengths of each copy along paired runs.

    Each run contributes its first ``per_run`` complete periods of every kind
    (the initial residual period is skipped), so the samples are i.i.d. from
    the marginal laws whatever the coupling does.
    """
    out = {key: [] for key in ("work_1", "repair_1", "work_2", "repair_2")}
    run = 0
    while min(len(v) for v in out.values()) < n_periods:
        rng = rngmod.UniformStream(rngmod.bit_generator(seed, "paired-cycles", run))
        run += 1
        got = {key: [] for key in out}
        start = [None, None]
        prev = [(int(z0_1.regime), z0_1.elapsed), (int(z0_2.regime), z0_2.elapsed)]
        for clock, m1, x1, m2, x2 in paired_path(model, z0_1, z0_2, rng):
            for c, (m, x) in enumerate(((m1, x1), (m2, x2))):
                if m != prev[c][0]:  # this copy switched at ``clock``
                    if start[c] is not None:
                        kind = ("work_" if prev[c][0] == 1 else "repair_") + str(c + 1)
                        got[kind].append(clock - start[c])
                    start[c] = clock
                prev[c] = (m, x)
            if min(len(v) for v in got.values()) >= per_run:
                break
        for key in out:
            out[key].extend(got[key][:per_run])
    return {key: np.asarray(v[:n_periods]) for key, v in out.items()}


@dataclass
class AuditReport:
    R: float
    N: float
    theta0_mode: str
    pi_RN: float
    p: float
    n_runs: int
    n_cycles: int
    n_event: int
    n_merge: int
    n_scheme_merge: int
    level: float = 0.99

    def _freq(self, k: int) -> dict:
        lo, hi = wilson_interval(k, self.n_cycles, self.level)
        f = k / self.n_cycles
        return {"count": k, "freq": f, "sigma": math.sqrt(f * (1 - f) / self.n_cycles),
                "ci": [lo, hi]}

    @property
    def event_ok(self) -> bool:
        d = self._freq(self.n_event)
        return d["freq"] >= self.pi_RN - 3 * d["sigma"]

    @property
    def merge_ok(self) -> bool:
        d = self._freq(self.n_scheme_merge)
        return d["freq"] >= self.p - 3 * d["sigma"]

    def to_dict(self) -> dict:
        return {
            "R": self.R, "N": self.N, "theta0_mode": self.theta0_mode,
            "pi_RN": self.pi_RN, "p": self.p,
            "n_runs": self.n_runs, "n_cycles": self.n_cycles,
            "event": self._freq(self.n_event),
            "merge_any": self._freq(self.n_merge),
            "merge_scheme": self._freq(self.n_scheme_merge),
            "event_ok": self.event_ok, "merge_ok": self.merge_ok,
        }


def meet_rate_audit(model: ModelParams, params: BoundParams, n_cycles: int, seed: int, *,
                    theta0_mode: str = "bracket",
                    start: tuple[SystemState, SystemState] = (SystemState(1, 0.0), SystemState(2, 0.0)),
                    cap: int = DEFAULT_CAP, level: float = 0.99) -> AuditReport:
    """Per-regeneration-cycle frequencies of the good event and of merging.

    Cycles are the regeneration periods (entries into ``(1, 0)``) of the copy
    that regenerates last, counted from its first regeneration until the
    merge.  For cycle ``k`` starting at ``tau_k`` the good event is: the other
    copy enters ``(1, 0)`` within ``R`` after ``tau_k`` and the reference
    copy's working period lasts between ``R`` and ``N R``.  A merge counts
    for cycle ``k`` if it happens in ``(tau_k, tau_{k+1}]``; it is
    scheme-conforming if the good event also holds.
    """
    pi, p, _ = coupling_q(model, params, theta0_mode)  # raises InvalidWindow
    R, N = params.R, params.N
    counts = {"cycles": 0, "event": 0, "merge": 0, "scheme": 0}
    run = 0
    while counts["cycles"] < n_cycles:
        rng = rngmod.UniformStream(rngmod.bit_generator(seed, "audit", run))
        run += 1
        entries1: list[list[float]] = [[], []]
        entries2: list[list[float]] = [[], []]
        merge = None
        events = 0
        for clock, m1, x1, m2, x2 in paired_path(model, start[0], start[1], rng):
            events += 1
            for c, (m, x) in enumerate(((m1, x1), (m2, x2))):
                if x == 0.0:
                    (entries1 if m == 1 else entries2)[c].append(clock)
            if merge is None and m1 == m2 and x1 == x2:
                merge = clock
            if merge is not None:
                if not (entries1[0] and entries1[1]):
                    break  # merged before both regenerated: no cycles
                ref = 0 if entries1[0][0] >= entries1[1][0] else 1
                if entries1[ref][-1] > merge:
                    break
            if events >= cap:
                raise CapExceeded(f"audit run {run - 1} did not couple within {cap} events")
        if not (entries1[0] and entries1[1]) or merge is None:
            continue
        ref = 0 if entries1[0][0] >= entries1[1][0] else 1
        other = 1 - ref
        taus = entries1[ref]
        for k, tau in enumerate(taus):
            if tau >= merge:
                break
            nxt_other = next(t for t in entries1[other] if t > tau)
            work_end = next(t for t in entries2[ref] if t > tau)
            good = (nxt_other - tau) < R and R < (work_end - tau) < N * R
            merged_here = tau < merge <= taus[k + 1]
            counts["cycles"] += 1
            counts["event"] += good
            counts["merge"] += merged_here
            counts["scheme"] += good and merged_here
    return AuditReport(R, N, theta0_mode, pi, p, run, counts["cycles"], counts["event"],
                       counts["merge"], counts["scheme"], level)


def kappa_lower_bound(model: ModelParams, x: float, y: float) -> float:
    """``kappa(max(x, y))``, the guaranteed splice success probability."""
    return kappa_T(model, max(x, y))
