"""Working/repair laws, admissibility checks, and the alternating-process state.

Two families are supported for each regime:

* the closed-form Pareto laws ``F(s) = 1 - (1+s)**-K`` (for the working law
  this is the hazard ``K1/(1+s)``), and
* tabulated laws: a hazard grid for the working law (log-linear between nodes,
  constant past the last node) and a CDF grid for the repair law (survival
  log-linear between nodes, Pareto-like tail past the last node, repeated
  abscissae encode atoms).

All laws expose the same scalar/array-friendly interface; model objects are
immutable after validation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from scipy.special import gammaln

from . import numerics
from .errors import (
    DivergentMoment,
    ExponentTooSmall,
    HazardBoundViolated,
    InvalidState,
    InvalidTable,
    LambdaNotDominating,
    RepairTailViolated,
)

# largest double below 1; keeps inverse transforms finite
_U_MAX = 1.0 - 2.0 ** -53
# relative slack for pointwise envelope checks (rounding only)
_ENVELOPE_SLACK = 1e-12
_REFINE = 10


class Regime(IntEnum):
    WORKING = 1
    REPAIR = 2

    @property
    def other(self) -> "Regime":
        return Regime(3 - int(self))


@dataclass(frozen=True)
class SystemState:
    """Regime index and time already spent in it."""

    regime: Regime
    elapsed: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(int(self.regime)))
        object.__setattr__(self, "elapsed", float(self.elapsed))
        if not self.elapsed >= 0.0:
            raise InvalidState(f"elapsed time must be nonnegative, got {self.elapsed!r}")

    @classmethod
    def parse(cls, text: str) -> "SystemState":
        """Parse ``"1:0"`` / ``"2:3.5"`` style state strings."""
        try:
            regime, elapsed = text.split(":")
            return cls(Regime(int(regime)), float(elapsed))
        except (ValueError, TypeError) as exc:
            raise InvalidState(f"cannot parse state {text!r}; expected 'regime:elapsed'") from exc

    def __str__(self) -> str:
        return f"{int(self.regime)}:{self.elapsed!r}"


# ---------------------------------------------------------------- laws


class ParetoLaw:
    """``F(s) = 1 - (1+s)**(-K)``; hazard ``K/(1+s)``."""

    family = "pareto"
    is_pareto = True
    nodes: tuple = ()

    def __init__(self, K: float):
        self.K = float(K)

    def __repr__(self):
        return f"ParetoLaw(K={self.K!r})"

    def survival(self, s):
        return (1.0 + s) ** (-self.K)

    def cdf(self, s):
        return 1.0 - (1.0 + s) ** (-self.K)

    def pdf(self, s):
        return self.K * (1.0 + s) ** (-self.K - 1.0)

    def hazard(self, s):
        return self.K / (1.0 + s)

    def residual_survival(self, x, s):
        return ((1.0 + x) / (1.0 + x + s)) ** self.K

    def residual_cdf(self, x, s):
        return 1.0 - ((1.0 + x) / (1.0 + x + s)) ** self.K

    def residual_pdf(self, x, s):
        return self.K / (1.0 + x + s) * ((1.0 + x) / (1.0 + x + s)) ** self.K

    def residual_inverse(self, x: float, u: float) -> float:
        # must match the expression in _ckernels.pyx exactly
        return (1.0 + x) * (1.0 - u) ** (-1.0 / self.K) - (1.0 + x)

    def moment(self, k: float) -> float:
        """``E xi**k = Gamma(k+1) Gamma(K-k) / Gamma(K)`` for ``0 < k < K``."""
        if not 0.0 < k < self.K:
            raise DivergentMoment(f"moment of order {k!r} is infinite for tail exponent {self.K!r}")
        return math.exp(gammaln(k + 1.0) + gammaln(self.K - k) - gammaln(self.K))

    def mean(self) -> float:
        return 1.0 / (self.K - 1.0)

    def equilibrium_cdf(self, x):
        return 1.0 - (1.0 + x) ** (-(self.K - 1.0))

    def equilibrium_inverse(self, u: float) -> float:
        return (1.0 - u) ** (-1.0 / (self.K - 1.0)) - 1.0


class _TabulatedBase:
    is_pareto = False

    def residual_survival(self, x, s):
        sx = self.survival(x)
        return self.survival(np.add(x, s)) / sx

    def residual_cdf(self, x, s):
        return 1.0 - self.residual_survival(x, s)

    def residual_inverse(self, x: float, u: float) -> float:
        """Generalized inverse of the residual CDF, solved segment by segment in log space."""
        u = min(u, _U_MAX)
        target = self.log_survival(x) + math.log1p(-u)
        return max(self.inverse_log_survival(target) - x, 0.0)

    def moment(self, k: float) -> float:
        if not 0.0 < k < self.tail_exponent:
            raise DivergentMoment(f"moment of order {k!r} may be infinite (tail exponent {self.tail_exponent!r})")
        res = numerics.integrate_semi_infinite(
            lambda s: k * s ** (k - 1.0) * self.survival(s), 0.0,
            tol=1e-12, rtol=1e-12, vectorized=True, breakpoints=self.nodes)
        return res.value

    def mean(self) -> float:
        return self._cum[-1] + self._tail_integral

    def _setup_equilibrium(self):
        nodes = np.asarray(self.nodes)
        pieces = [0.0]
        for lo, hi in zip(nodes[:-1], nodes[1:]):
            pieces.append(numerics.integrate(self.survival, lo, hi, tol=1e-14, rtol=1e-13,
                                             vectorized=True).value)
        self._cum = np.cumsum(pieces)
        self._tail_integral = numerics.integrate_semi_infinite(
            self.survival, float(nodes[-1]), tol=1e-14, rtol=1e-13, vectorized=True).value

    def equilibrium_cdf(self, x):
        x = float(x)
        nodes = self.nodes
        i = int(np.searchsorted(nodes, x, side="right")) - 1
        head = self._cum[i]
        part = numerics.integrate(self.survival, nodes[i], x, tol=1e-14, rtol=1e-13,
                                  vectorized=True).value
        return min(1.0, (head + part) / self.mean())

    def equilibrium_inverse(self, u: float) -> float:
        return numerics.invert_monotone(self.equilibrium_cdf, min(u, _U_MAX), 0.0, 1.0)


class TabulatedHazardLaw(_TabulatedBase):
    """Working law given by hazard values on a grid starting at ``s = 0``.

    ``log(hazard)`` is interpolated linearly between nodes and the last value
    is held constant beyond the grid, so the cumulative hazard has a closed
    form on every segment.
    """

    family = "tabulated_hazard"

    def __init__(self, s, lam, tail_exponent: float):
        s = np.asarray(s, dtype=float)
        lam = np.asarray(lam, dtype=float)
        if s.ndim != 1 or s.shape != lam.shape or s.size < 2:
            raise InvalidTable("hazard table needs at least two (s, value) rows")
        if s[0] != 0.0 or np.any(np.diff(s) <= 0):
            raise InvalidTable("hazard table abscissae must start at 0 and increase strictly")
        if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
            raise InvalidTable("hazard values must be positive and finite")
        self.nodes = tuple(s.tolist())
        self._s = s
        self._lam = lam
        self._loglam = np.log(lam)
        self._slope = np.diff(self._loglam) / np.diff(s)
        seg = np.where(np.abs(self._slope) < 1e-14, lam[:-1] * np.diff(s),
                       np.diff(lam) / np.where(self._slope == 0, 1.0, self._slope))
        self._H = np.concatenate([[0.0], np.cumsum(seg)])
        self.tail_exponent = float(tail_exponent)
        self._setup_equilibrium()

    def __repr__(self):
        return f"TabulatedHazardLaw({len(self.nodes)} nodes)"

    def _segment(self, s):
        idx = np.searchsorted(self._s, s, side="right") - 1
        return np.clip(idx, 0, self._s.size - 1)

    def hazard(self, s):
        s = np.asarray(s, dtype=float)
        i = self._segment(s)
        last = i >= self._s.size - 1
        j = np.minimum(i, self._slope.size - 1)
        val = np.exp(self._loglam[j] + self._slope[j] * (s - self._s[j]))
        out = np.where(last, self._lam[-1], val)
        return out if out.ndim else float(out)

    def cumulative_hazard(self, s):
        s = np.asarray(s, dtype=float)
        i = self._segment(s)
        last = i >= self._s.size - 1
        j = np.minimum(i, self._slope.size - 1)
        ds = s - self._s[j]
        b = self._slope[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = np.where(np.abs(b) < 1e-14, self._lam[j] * ds,
                             self._lam[j] * np.expm1(b * ds) / np.where(b == 0, 1.0, b))
        tail = self._H[-1] + self._lam[-1] * (s - self._s[-1])
        out = np.where(last, tail, self._H[j] + inner)
        return out if out.ndim else float(out)

    def survival(self, s):
        return np.exp(-self.cumulative_hazard(s))

    def log_survival(self, s: float) -> float:
        return -float(self.cumulative_hazard(s))

    def inverse_log_survival(self, target: float) -> float:
        """Smallest ``s`` with ``log S(s) <= target``."""
        h = -target
        if h <= 0.0:
            return 0.0
        if h >= self._H[-1]:
            return float(self._s[-1] + (h - self._H[-1]) / self._lam[-1])
        j = int(np.searchsorted(self._H, h, side="right")) - 1
        rem = h - self._H[j]
        b = self._slope[j]
        if abs(b) < 1e-14:
            ds = rem / self._lam[j]
        else:
            ds = math.log1p(rem * b / self._lam[j]) / b
        return float(self._s[j] + min(ds, self._s[j + 1] - self._s[j]))

    def cdf(self, s):
        return 1.0 - self.survival(s)

    def pdf(self, s):
        return self.hazard(s) * self.survival(s)

    def residual_survival(self, x, s):
        return np.exp(-(self.cumulative_hazard(np.add(x, s)) - self.cumulative_hazard(x)))

    def residual_pdf(self, x, s):
        return self.hazard(np.add(x, s)) * self.residual_survival(x, s)


class TabulatedCdfLaw(_TabulatedBase):
    """Repair law given by CDF values on a grid starting at ``(0, 0)``.

    Survival is interpolated log-linearly between nodes (linearly into a zero
    value).  A repeated abscissa ``(s, F_left), (s, F_right)`` encodes an atom
    of mass ``F_right - F_left`` at ``s``; the CDF is right-continuous.  Past
    the last node the survival decays as ``S_last * ((1+s_last)/(1+s))**K``.
    """

    family = "tabulated_cdf"

    def __init__(self, s, F, tail_exponent: float):
        s = np.asarray(s, dtype=float)
        F = np.asarray(F, dtype=float)
        if s.ndim != 1 or s.shape != F.shape or s.size < 2:
            raise InvalidTable("CDF table needs at least two (s, value) rows")
        if s[0] != 0.0 or F[0] != 0.0:
            raise InvalidTable("CDF table must start with the row (0, 0)")
        if np.any(np.diff(s) < 0):
            raise InvalidTable("CDF table abscissae must be nondecreasing")
        if np.any(np.diff(F) < 0) or F.min() < 0 or F.max() > 1:
            raise InvalidTable("CDF values must be nondecreasing within [0, 1]")
        uniq, first = np.unique(s, return_index=True)
        counts = np.diff(np.append(first, s.size))
        if np.any(counts > 2):
            raise InvalidTable("an abscissa may appear at most twice (left and right value of a jump)")
        last = first + counts - 1
        self.nodes = tuple(uniq.tolist())
        self._s = uniq
        self._SL = 1.0 - F[first]     # left limits
        self._SR = 1.0 - F[last]      # values (right-continuous)
        self._SL[0] = 1.0
        self.tail_exponent = float(tail_exponent)
        with np.errstate(divide="ignore"):
            self._logR = np.log(self._SR)
            self._logL = np.log(self._SL)
        self._setup_equilibrium()

    def __repr__(self):
        return f"TabulatedCdfLaw({len(self.nodes)} nodes)"

    def survival(self, s):
        s = np.asarray(s, dtype=float)
        n = self._s.size
        i = np.clip(np.searchsorted(self._s, s, side="right") - 1, 0, n - 1)
        j = np.minimum(i, n - 2)
        lo, hi = self._s[j], self._s[j + 1]
        t = (s - lo) / (hi - lo)
        a, b = self._SR[j], self._SL[j + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            loglin = np.exp(self._logR[j] + t * (self._logL[j + 1] - self._logR[j]))
        inner = np.where(b > 0, loglin, a * (1.0 - t))
        inner = np.where(a > 0, inner, 0.0)
        at_node = s == self._s[i]
        inner = np.where(at_node, self._SR[i], inner)
        tail = self._SR[-1] * ((1.0 + self._s[-1]) / (1.0 + s)) ** self.tail_exponent
        out = np.where(i >= n - 1, tail, inner)
        return out if out.ndim else float(out)

    def cdf(self, s):
        return 1.0 - self.survival(s)

    def log_survival(self, s: float) -> float:
        s = float(s)
        if s >= self._s[-1]:
            return float(self._logR[-1] + self.tail_exponent * math.log((1.0 + self._s[-1]) / (1.0 + s)))
        with np.errstate(divide="ignore"):
            return float(np.log(self.survival(s)))

    def inverse_log_survival(self, target: float) -> float:
        """Smallest ``s`` with ``log S(s) <= target`` (jumps land on the atom)."""
        if target >= 0.0:
            return 0.0
        below = np.nonzero(self._logR <= target)[0]
        if below.size == 0:
            s_last = self._s[-1]
            return float((1.0 + s_last) * math.exp((self._logR[-1] - target) / self.tail_exponent) - 1.0)
        k = int(below[0])
        if k == 0 or self._logL[k] > target:
            return float(self._s[k])
        lo, hi = self._s[k - 1], self._s[k]
        a, b = self._logR[k - 1], self._logL[k]
        if math.isinf(b):  # linear decay into zero survival
            t = 1.0 - math.exp(target - a)
        else:
            t = (target - a) / (b - a)
        return float(lo + min(max(t, 0.0), 1.0) * (hi - lo))

    def residual_survival(self, x, s):
        sx = self.survival(x)
        return self.survival(np.add(x, s)) / sx


# ---------------------------------------------------------------- model


@dataclass(frozen=True)
class ModelParams:
    """Validated model: tail exponents, hazard cap and the two laws."""

    K1: float
    K2: float
    Lambda: float
    work: Any
    repair: Any

    @classmethod
    def pareto(cls, K1: float = 4.0, K2: float = 4.0, Lambda: float = 5.0) -> "ModelParams":
        return validate({"K1": K1, "K2": K2, "Lambda": Lambda})

    @property
    def is_pareto(self) -> bool:
        return self.work.is_pareto and self.repair.is_pareto

    @property
    def K(self) -> float:
        return min(self.K1, self.K2)

    def law(self, j: int):
        if int(j) == 1:
            return self.work
        if int(j) == 2:
            return self.repair
        raise ValueError(f"regime index must be 1 or 2, got {j!r}")

    # distribution functions
    def cdf(self, j: int, s):
        return self.law(j).cdf(s)

    def survival(self, j: int, s):
        return self.law(j).survival(s)

    def pdf_work(self, s):
        return self.work.pdf(s)

    def hazard(self, s):
        return self.work.hazard(s)

    def residual_cdf(self, j: int, x, s):
        return self.law(j).residual_cdf(x, s)

    # sampling; ``rng`` is anything with a ``random()`` method
    def sample(self, j: int, rng) -> float:
        return self.law(j).residual_inverse(0.0, rng.random())

    def sample_residual(self, j: int, x: float, rng) -> float:
        return self.law(j).residual_inverse(x, rng.random())

    # means and the limiting availability
    def mean_work(self) -> float:
        return self.work.mean()

    def mean_repair(self) -> float:
        return self.repair.mean()

    def limiting_availability(self) -> float:
        ew, er = self.mean_work(), self.mean_repair()
        return ew / (ew + er)

    def equilibrium_sample(self, rng) -> SystemState:
        """Draw ``(regime, elapsed)`` from the stationary law.

        Consumes two uniforms: the regime (working iff ``u < A``) and the
        elapsed time, drawn from the stationary-excess density
        ``(1 - F_j(x)) / E_j``.
        """
        u_regime = rng.random()
        regime = Regime.WORKING if u_regime < self.limiting_availability() else Regime.REPAIR
        elapsed = self.law(regime).equilibrium_inverse(rng.random())
        return SystemState(regime, elapsed)

    def check_state(self, state: SystemState) -> SystemState:
        if not float(self.law(state.regime).survival(state.elapsed)) > 0.0:
            raise InvalidState(f"state {state} has zero survival probability")
        return state

    def describe(self) -> dict:
        return {
            "K1": self.K1, "K2": self.K2, "Lambda": self.Lambda,
            "work_family": self.work.family, "repair_family": self.repair.family,
        }


# ---------------------------------------------------------------- validation


def _refined(nodes: np.ndarray) -> np.ndarray:
    if nodes.size < 2:
        return nodes
    t = np.linspace(0.0, 1.0, _REFINE + 1)
    pts = nodes[:-1, None] + np.diff(nodes)[:, None] * t[None, :]
    tail = nodes[-1] + np.array([0.0, 0.5, 1.0, 10.0, 100.0]) * max(1.0, nodes[-1])
    return np.unique(np.concatenate([pts.ravel(), tail]))


def _check_hazard(law: TabulatedHazardLaw, K1: float, Lambda: float) -> None:
    s = _refined(law._s)
    lam = law.hazard(s)
    low = K1 / (1.0 + s)
    bad_hi = np.nonzero(lam > Lambda * (1 + _ENVELOPE_SLACK))[0]
    if bad_hi.size:
        k = bad_hi[0]
        raise HazardBoundViolated(
            f"hazard {float(lam[k])!r} at s={float(s[k])!r} exceeds the cap Lambda={Lambda!r}")
    bad_lo = np.nonzero(lam < low * (1 - _ENVELOPE_SLACK))[0]
    if bad_lo.size:
        k = bad_lo[0]
        raise HazardBoundViolated(
            f"hazard {float(lam[k])!r} at s={float(s[k])!r} is below K1/(1+s)={float(low[k])!r}")


def _check_repair_tail(law: TabulatedCdfLaw, K2: float) -> None:
    s = _refined(law._s)
    surv = law.survival(s)
    env = (1.0 + s) ** (-K2)
    # left limits at nodes matter too: S(s-) <= (1+s)^-K2 for s > 0
    left = law._SL[1:]
    left_env = (1.0 + law._s[1:]) ** (-K2)
    bad = np.nonzero(surv > env * (1 + _ENVELOPE_SLACK))[0]
    if bad.size:
        k = bad[0]
        raise RepairTailViolated(
            f"repair CDF {float(1 - surv[k])!r} at s={float(s[k])!r} is below 1-(1+s)^-K2={float(1 - env[k])!r}")
    bad = np.nonzero(left > left_env * (1 + _ENVELOPE_SLACK))[0]
    if bad.size:
        k = bad[0]
        raise RepairTailViolated(
            f"repair CDF left limit at s={float(law._s[k + 1])!r} violates the tail envelope")


def load_table(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column ``s,value`` CSV (an optional header row is skipped)."""
    rows = []
    with open(path, newline="") as fh:
        for n, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if n == 0:
                    continue  # header
                raise InvalidTable(f"{path}: bad row {n + 1}: {row!r}")
    if not rows:
        raise InvalidTable(f"{path}: no data rows")
    arr = np.asarray(rows)
    return arr[:, 0], arr[:, 1]


def validate(raw: Mapping[str, Any]) -> ModelParams:
    """Build a :class:`ModelParams` from raw inputs, checking admissibility.

    Recognised keys: ``K1``, ``K2``, ``Lambda``, ``work_family``
    (``pareto_hazard`` | ``tabulated_hazard``), ``repair_family``
    (``pareto`` | ``tabulated_cdf``), and for tabulated families either
    ``work_table`` / ``repair_table`` (pairs) or ``work_csv`` / ``repair_csv``.
    """
    try:
        K1 = float(raw["K1"])
        K2 = float(raw["K2"])
        Lambda = float(raw["Lambda"])
    except KeyError as exc:
        raise InvalidTable(f"missing model parameter {exc.args[0]!r}") from None
    for name, K in (("K1", K1), ("K2", K2)):
        if not K > 3.0:
            raise ExponentTooSmall(f"{name}={K!r} must exceed 3")
    if not Lambda > K1:
        raise LambdaNotDominating(f"Lambda={Lambda!r} must exceed K1={K1!r}")

    work_family = str(raw.get("work_family", "pareto_hazard")).lower()
    if work_family in ("pareto_hazard", "pareto"):
        work = ParetoLaw(K1)
    elif work_family == "tabulated_hazard":
        s, lam = _table(raw, "work")
        work = TabulatedHazardLaw(s, lam, tail_exponent=K1)
        _check_hazard(work, K1, Lambda)
    else:
        raise InvalidTable(f"unknown working-law family {work_family!r}")

    repair_family = str(raw.get("repair_family", "pareto")).lower()
    if repair_family == "pareto":
        repair = ParetoLaw(K2)
    elif repair_family == "tabulated_cdf":
        s, F = _table(raw, "repair")
        repair = TabulatedCdfLaw(s, F, tail_exponent=K2)
        _check_repair_tail(repair, K2)
    else:
        raise InvalidTable(f"unknown repair-law family {repair_family!r}")

    return ModelParams(K1, K2, Lambda, work, repair)


def _table(raw: Mapping[str, Any], which: str):
    if raw.get(f"{which}_table") is not None:
        arr = np.asarray(raw[f"{which}_table"], dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise InvalidTable(f"{which}_table must be a list of (s, value) pairs")
        return arr[:, 0], arr[:, 1]
    if raw.get(f"{which}_csv"):
        return load_table(raw[f"{which}_csv"])
    raise InvalidTable(f"tabulated {which} law needs '{which}_table' or '{which}_csv'")
