"""Explicit constant in ``|A(t) - A| <= Psi / (1+t)**alpha``.

Everything here is deterministic arithmetic on a validated
:class:`~availbound.model.ModelParams`.  Integrals are evaluated by
quadrature (:mod:`availbound.numerics`); closed forms for the Pareto family
exist only as cross-checks in the tests.

The constant is assembled as

    Psi = sum_{i>=0} (2i+4)**alpha * q**i * (C + (i+1)*M1 + i*M2)

with ``C = 1 + (initial-state term) + (stationary terms)``.  The
``i``-dependent part sits inside the sum, as the moment chain requires.  A
second variant indexed as ``sum_{i>=1} q**(i-1) (2i+4)**(alpha-1) (...)`` is
reported alongside as ``psi_derivation``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import numerics
from .errors import (
    AlphaOutOfRange,
    DivergentMoment,
    InvalidWindow,
    NoFeasiblePoint,
    RangeError,
    SeriesDivergent,
)
from .model import ModelParams, Regime, SystemState

THETA0_MODES = ("bracket", "exact")


@dataclass(frozen=True)
class BoundParams:
    """Bound exponent ``alpha``, regeneration window ``R`` and multiplier ``N``."""

    alpha: float
    R: float
    N: float = 1.0


# ---------------------------------------------------------------- moments


def moment_bounds(model: ModelParams, a: float, b: float) -> tuple[float, float, float]:
    """``(mu_a, m1(a), m2(b))``: lower bound on ``E xi**a``, upper bounds on ``E xi**a``, ``E eta**b``."""
    if not 0.0 < a < model.K1:
        raise RangeError(f"a={a!r} must lie in (0, K1={model.K1!r})")
    if not 0.0 < b < model.K2:
        raise RangeError(f"b={b!r} must lie in (0, K2={model.K2!r})")
    mu_a = model.K1 * math.gamma(a) / model.Lambda ** a
    return mu_a, a / (model.K1 - a), b / (model.K2 - b)


def _tail_exponent(model: ModelParams, j: int) -> float:
    return model.K1 if int(j) == 1 else model.K2


def big_m(model: ModelParams, j: int, k: float) -> float:
    """``k * int_0^inf s**(k-1) / (1+s)**K_j ds`` by quadrature."""
    K = _tail_exponent(model, j)
    if not 0.0 < k < K:
        raise DivergentMoment(f"M_{j}({k!r}) diverges for K_{j}={K!r}")
    res = numerics.integrate_semi_infinite(
        lambda s: k * s ** (k - 1.0) * (1.0 + s) ** (-K), 0.0,
        tol=1e-12, rtol=1e-12, vectorized=True)
    return res.value


def big_m_closed(K: float, k: float) -> float:
    """Closed form ``Gamma(k+1) Gamma(K-k) / Gamma(K)`` of :func:`big_m`."""
    if not 0.0 < k < K:
        raise DivergentMoment(f"M({k!r}) diverges for K={K!r}")
    return math.exp(math.lgamma(k + 1.0) + math.lgamma(K - k) - math.lgamma(K))


def big_m_x(model: ModelParams, j: int, x: float, k: float) -> float:
    """``k / (1 - F_j(x)) * int_0^inf s**(k-1) / (1+s+x)**K_j ds``."""
    K = _tail_exponent(model, j)
    if not 0.0 < k < K:
        raise DivergentMoment(f"M_{j}^(x)({k!r}) diverges for K_{j}={K!r}")
    surv = float(model.survival(j, x))
    if not surv > 0.0:
        raise RangeError(f"F_{j}({x!r}) = 1; residual moment undefined")
    # integrate the rescaled integrand so tolerances stay relative
    scale = (1.0 + x) ** (k - K)
    res = numerics.integrate_semi_infinite(
        lambda s: k * s ** (k - 1.0) * (1.0 + s + x) ** (-K) / scale, 0.0,
        tol=1e-12, rtol=1e-12, vectorized=True)
    return res.value * scale / surv


def kappa(model: ModelParams, T: float) -> float:
    """``int_0^inf K1 exp(-Lambda s) / (1+T+s) ds``."""
    if not T >= 0.0:
        raise RangeError(f"T={T!r} must be nonnegative")
    K1, lam = model.K1, model.Lambda
    res = numerics.integrate_semi_infinite(
        lambda s: K1 * np.exp(-lam * s) / (1.0 + T + s), 0.0,
        tol=1e-13, rtol=1e-12, vectorized=True)
    return res.value


# ---------------------------------------------------------------- Theta0


@dataclass(frozen=True)
class Theta0:
    bracket: float
    exact: float

    def value(self, mode: str) -> float:
        if mode not in THETA0_MODES:
            raise ValueError(f"theta0 mode must be one of {THETA0_MODES}, got {mode!r}")
        return self.bracket if mode == "bracket" else self.exact


def theta0_upper(model: ModelParams, a: float = 1.0) -> Theta0:
    """Mean residual regeneration time: computable upper bound and exact value.

    The bound replaces the second moments by ``m1``/``m2`` and the mean cycle
    length by the lower bound ``mu_a`` on ``E xi**a`` (``a = 1`` by default).
    The exact value uses the model's own moments (closed form for Pareto
    laws, quadrature for tabulated ones).
    """
    mu_a, m1_1, m2_1 = moment_bounds(model, a, 1.0)
    if a != 1.0:
        m1_1 = moment_bounds(model, 1.0, 1.0)[1]
    m1_2 = 2.0 / (model.K1 - 2.0)
    m2_2 = 2.0 / (model.K2 - 2.0)
    bracket = (m1_2 + 2.0 * m1_1 * m2_1 + m2_2) / (2.0 * mu_a)
    ew, er = model.mean_work(), model.mean_repair()
    second = model.work.moment(2.0) + 2.0 * ew * er + model.repair.moment(2.0)
    exact = second / (2.0 * (ew + er))
    return Theta0(bracket=bracket, exact=exact)


# ---------------------------------------------------------------- coupling probability


def check_window(model: ModelParams, R: float, N: float, theta0: float) -> None:
    if not N >= 1.0:
        raise InvalidWindow(f"N={N!r} must be at least 1")
    if not R > theta0:
        raise InvalidWindow(f"R={R!r} must exceed Theta0={theta0!r}")
    if not math.exp(-model.Lambda * R) > (1.0 + N * R) ** (-model.K1):
        raise InvalidWindow(
            f"exp(-Lambda R) must exceed (1+NR)^-K1 (R={R!r}, N={N!r})")


def _pi_p(model: ModelParams, R: float, N: float, theta0: float) -> tuple[float, float, float]:
    pi = (1.0 - theta0 / R) * (math.exp(-model.Lambda * R) - (1.0 + N * R) ** (-model.K1))
    kap = kappa(model, N * R)
    return pi, pi * kap, kap


def coupling_q(model: ModelParams, params: BoundParams,
               theta0_mode: str = "bracket") -> tuple[float, float, float]:
    """``(pi(R, N), p, q)`` with ``p = pi * kappa(N R)`` and ``q = 1 - p``."""
    theta0 = theta0_upper(model).value(theta0_mode)
    check_window(model, params.R, params.N, theta0)
    pi, p, _ = _pi_p(model, params.R, params.N, theta0)
    return pi, p, 1.0 - p


# ---------------------------------------------------------------- Psi


@dataclass
class BoundReport:
    alpha: float
    R: float
    N: float
    x0: str
    theta0_mode: str
    theta0_used: float
    theta0_bracket: float
    theta0_exact: float
    kappa_NR: float
    pi_RN: float
    p: float
    q: float
    series_sum: float
    psi: float
    psi_derivation: float
    breakdown: dict = field(default_factory=dict)

    def bound_at(self, t):
        """``psi / (1+t)**alpha``; accepts scalars or arrays."""
        return self.psi / (1.0 + np.asarray(t, dtype=float)) ** self.alpha

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bound_at"] = {"form": "psi / (1 + t) ** alpha", "psi": self.psi, "alpha": self.alpha}
        return d


def check_alpha(model: ModelParams, alpha: float) -> None:
    upper = model.K - 1.0
    if not 1.0 < alpha < upper:
        raise AlphaOutOfRange(f"alpha={alpha!r} must lie in (1, {upper!r})")


def initial_term(model: ModelParams, alpha: float, x0: SystemState) -> float:
    """Bound on ``E (first regeneration time from x0)**alpha``."""
    if x0.regime is Regime.WORKING:
        return 2.0 ** (alpha - 1.0) * (big_m_x(model, 1, x0.elapsed, alpha) + big_m(model, 2, alpha))
    return big_m_x(model, 2, x0.elapsed, alpha)


def stationary_terms(model: ModelParams, alpha: float) -> tuple[float, float]:
    """Bounds on the initial-state term averaged over the stationary law.

    Returns ``(working part, repair part)``.
    """
    A = model.limiting_availability()
    K1, K2 = model.K1, model.K2
    work = 2.0 ** (alpha - 1.0) * A * (
        alpha / ((K1 - alpha) * (K1 - alpha - 1.0) * model.mean_work()) + big_m(model, 2, alpha))
    repair = (1.0 - A) * alpha / ((K2 - alpha) * (K2 - alpha - 1.0) * model.mean_repair())
    return work, repair


def assemble_psi(alpha: float, q: float, constant: float, m1: float, m2: float,
                 tol: float = numerics.SERIES_RTOL) -> float:
    """``sum_{i>=0} (2i+4)**alpha q**i (constant + (i+1) m1 + i m2)``."""
    if not 0.0 < q < 1.0:
        raise SeriesDivergent(f"q={q!r} outside (0, 1)")
    return numerics.sum_affine_power_series(alpha, q, constant + m1, m1 + m2, tol)


def assemble_derivation(alpha: float, q: float, constant: float, m1: float, m2: float,
                        tol: float = numerics.SERIES_RTOL) -> float:
    """``sum_{i>=1} q**(i-1) (2i+4)**(alpha-1) (constant + (i+1) m1 + i m2)``."""
    if not 0.0 < q < 1.0:
        raise SeriesDivergent(f"q={q!r} outside (0, 1)")
    return numerics.sum_affine_power_series(alpha - 1.0, q, constant + m1, m1 + m2, tol,
                                            start=1) / q


def psi(model: ModelParams, x0: SystemState, params: BoundParams,
        theta0_mode: str = "bracket") -> BoundReport:
    """Evaluate the constant for start state ``x0`` with a full breakdown."""
    alpha = params.alpha
    check_alpha(model, alpha)
    model.check_state(x0)
    th = theta0_upper(model)
    theta0 = th.value(theta0_mode)
    check_window(model, params.R, params.N, theta0)
    pi, p, kap = _pi_p(model, params.R, params.N, theta0)
    q = 1.0 - p
    if not 0.0 < q < 1.0:
        raise SeriesDivergent(f"q={q!r} outside (0, 1)")

    m1 = big_m(model, 1, alpha)
    m2 = big_m(model, 2, alpha)
    init = initial_term(model, alpha, x0)
    stat_work, stat_repair = stationary_terms(model, alpha)
    constant = 1.0 + init + stat_work + stat_repair
    breakdown = {
        "M1_alpha": m1,
        "M2_alpha": m2,
        "M_x0_alpha": (big_m_x(model, int(x0.regime), x0.elapsed, alpha)),
        "initial_term": init,
        "stationary_work_term": stat_work,
        "stationary_repair_term": stat_repair,
        "constant_term": constant,
        "availability": model.limiting_availability(),
        "mean_work": model.mean_work(),
        "mean_repair": model.mean_repair(),
    }
    return BoundReport(
        alpha=alpha, R=params.R, N=params.N, x0=str(x0),
        theta0_mode=theta0_mode, theta0_used=theta0,
        theta0_bracket=th.bracket, theta0_exact=th.exact,
        kappa_NR=kap, pi_RN=pi, p=p, q=q,
        series_sum=numerics.sum_affine_power_series(alpha, q, 1.0, 0.0),
        psi=assemble_psi(alpha, q, constant, m1, m2),
        psi_derivation=assemble_derivation(alpha, q, constant, m1, m2),
        breakdown=breakdown,
    )


def coupling_constant(model: ModelParams, alpha: float, x0_a: SystemState,
                      x0_b: SystemState, params: BoundParams,
                      theta0_mode: str = "bracket") -> float:
    """Bound on ``E (1 + coupling time)**alpha`` for two deterministic starts."""
    check_alpha(model, alpha)
    _, p, q = coupling_q(model, BoundParams(alpha, params.R, params.N), theta0_mode)
    constant = 1.0 + initial_term(model, alpha, x0_a) + initial_term(model, alpha, x0_b)
    return assemble_derivation(alpha, q, constant, big_m(model, 1, alpha), big_m(model, 2, alpha))


# ---------------------------------------------------------------- window search


@dataclass(frozen=True)
class SearchSpec:
    """Grid over ``R`` in ``(Theta0, r_max]`` (log-spaced) and ``N``.

    ``r_values``/``n_values`` replace the generated grids when given.
    Refinement passes re-grid ``R`` (and ``N`` when ``real_n``) between the
    neighbours of the current best point.
    """

    r_max: float = 3.0
    n_r: int = 48
    n_min: float = 1
    n_max: float = 20
    n_n: int = 20
    refine_passes: int = 2
    real_n: bool = False
    r_values: Sequence[float] | None = None
    n_values: Sequence[float] | None = None


class WindowChoice(NamedTuple):
    R: float
    N: float
    report: BoundReport
    evaluated: list  # (R, N, p) for every feasible point visited


def _n_grid(spec: SearchSpec) -> list[float]:
    if spec.n_values is not None:
        return [float(n) for n in spec.n_values]
    if spec.real_n:
        return np.linspace(spec.n_min, spec.n_max, spec.n_n).tolist()
    return [float(n) for n in range(int(math.ceil(spec.n_min)), int(spec.n_max) + 1)]


def optimize_window(model: ModelParams, alpha: float, x0: SystemState,
                    spec: SearchSpec = SearchSpec(),
                    theta0_mode: str = "bracket") -> WindowChoice:
    """Pick ``(R, N)`` minimising Psi over the search grid.

    Psi depends on ``(R, N)`` only through ``q`` and is strictly increasing in
    ``q``, so the search maximises ``p`` and evaluates Psi once at the winner.
    Ties are broken lexicographically on ``(R, N)``.
    """
    check_alpha(model, alpha)
    theta0 = theta0_upper(model).value(theta0_mode)
    seen: dict[tuple[float, float], float] = {}

    def evaluate(rs, ns):
        for R in rs:
            for N in ns:
                key = (float(R), float(N))
                if key in seen:
                    continue
                try:
                    check_window(model, key[0], key[1], theta0)
                except InvalidWindow:
                    continue
                seen[key] = _pi_p(model, key[0], key[1], theta0)[1]

    def best():
        return min(seen.items(), key=lambda kv: (-kv[1], kv[0][0], kv[0][1]))[0]

    if spec.r_values is not None:
        rs = sorted(float(r) for r in spec.r_values)
    else:
        if not spec.r_max > theta0:
            raise NoFeasiblePoint(f"r_max={spec.r_max!r} does not exceed Theta0={theta0!r}")
        k = np.arange(1, spec.n_r + 1)
        rs = (theta0 * (spec.r_max / theta0) ** (k / spec.n_r)).tolist()
    ns = _n_grid(spec)
    evaluate(rs, ns)
    if not seen:
        raise NoFeasiblePoint("no (R, N) in the search grid satisfies the window constraints")

    if spec.r_values is None:
        for _ in range(spec.refine_passes):
            R_b, N_b = best()
            i = rs.index(R_b)
            lo = rs[i - 1] if i > 0 else theta0
            hi = rs[i + 1] if i + 1 < len(rs) else rs[i]
            rs = sorted(set(np.geomspace(lo, hi, spec.n_r + 2)[1:-1].tolist()) | {R_b})
            if spec.real_n and spec.n_values is None:
                j = ns.index(N_b)
                nlo = ns[j - 1] if j > 0 else ns[j]
                nhi = ns[j + 1] if j + 1 < len(ns) else ns[j]
                ns = sorted(set(np.linspace(nlo, nhi, spec.n_n).tolist()) | {N_b})
            else:
                ns = [N_b]
            evaluate(rs, ns)

    R_b, N_b = best()
    report = psi(model, x0, BoundParams(alpha, R_b, N_b), theta0_mode)
    evaluated = [(R, N, p) for (R, N), p in sorted(seen.items())]
    return WindowChoice(R_b, N_b, report, evaluated)
