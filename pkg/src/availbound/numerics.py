"""Numeric kernels: adaptive quadrature, certified series sums, monotone inversion."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import BracketFailure, NoConvergence, RatioOutOfRange

QUAD_ATOL = 1e-10
SERIES_RTOL = 1e-8
INVERT_TOL = 1e-12

# Gauss-Kronrod 7/15 abscissae on [-1, 1] (non-negative half) and weights.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])          # 15 nodes, ascending
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros(15)
_GWEIGHTS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_error_estimate: float
    evaluations: int

    def __float__(self) -> float:
        return self.value


def _gk15(g, lo, hi):
    half = 0.5 * (hi - lo)
    u = lo + half * (_NODES + 1.0)
    y = g(u)
    k = half * float(_KWEIGHTS @ y)
    gs = half * float(_GWEIGHTS @ y)
    return k, abs(k - gs)


def _as_vector(f: Callable, vectorized: bool):
    if vectorized:
        return lambda s: np.asarray(f(s), dtype=float)
    return lambda s: np.array([f(float(v)) for v in s], dtype=float)


def _adaptive(pieces, atol, rtol, limit):
    """Global adaptive Gauss-Kronrod over a list of (g, lo, hi) pieces."""
    heap = []
    total = 0.0
    err = 0.0
    evals = 0
    for idx, (g, lo, hi) in enumerate(pieces):
        val, e = _gk15(g, lo, hi)
        evals += 15
        total += val
        err += e
        heapq.heappush(heap, (-e, idx, lo, hi, val, g))
    counter = len(pieces)
    while err > max(atol, rtol * abs(total)):
        if counter >= limit:
            raise NoConvergence(
                f"quadrature did not converge after {counter} subintervals "
                f"(estimate {total!r}, error {err!r})"
            )
        neg_e, _, lo, hi, val, g = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise NoConvergence("quadrature interval collapsed below machine precision")
        v1, e1 = _gk15(g, lo, mid)
        v2, e2 = _gk15(g, mid, hi)
        evals += 30
        total += v1 + v2 - val
        err += e1 + e2 + neg_e
        counter += 1
        heapq.heappush(heap, (-e1, counter, lo, mid, v1, g))
        counter += 1
        heapq.heappush(heap, (-e2, counter, mid, hi, v2, g))
        if not math.isfinite(total):
            raise NoConvergence("integrand produced a non-finite value")
    # re-sum to shed accumulated rounding from the running updates
    total = math.fsum(item[4] for item in heap)
    err = math.fsum(-item[0] for item in heap)
    return QuadResult(total, err, evals)


def integrate(f: Callable, a: float, b: float, tol: float = QUAD_ATOL,
              rtol: float = 0.0, *, vectorized: bool = False,
              breakpoints: Sequence[float] = (), limit: int = 4000) -> QuadResult:
    """Integrate ``f`` over the finite interval ``[a, b]``."""
    g = _as_vector(f, vectorized)
    cuts = [a] + sorted(p for p in breakpoints if a < p < b) + [b]
    pieces = [(g, lo, hi) for lo, hi in zip(cuts[:-1], cuts[1:]) if hi > lo]
    if not pieces:
        return QuadResult(0.0, 0.0, 1)
    return _adaptive(pieces, tol, rtol, limit)


def integrate_semi_infinite(f: Callable, a: float = 0.0, tol: float = QUAD_ATOL,
                            rtol: float = 0.0, *, vectorized: bool = False,
                            breakpoints: Sequence[float] = (),
                            limit: int = 4000) -> QuadResult:
    """Integrate a nonnegative, eventually decreasing ``f`` over ``[a, inf)``.

    The last piece ``[c, inf)`` (``c`` the largest breakpoint, or ``a``) is
    mapped to ``[0, 1)`` through ``s = c + u / (1 - u)``; finite pieces between
    breakpoints are integrated directly.  Error estimates come from the
    difference of the embedded 7-point Gauss and 15-point Kronrod rules.

    >>> round(integrate_semi_infinite(lambda s: (1 + s) ** -4).value, 12)
    0.333333333333
    """
    g = _as_vector(f, vectorized)
    cuts = [a] + sorted(p for p in set(breakpoints) if p > a)
    c = cuts[-1]

    def tail(u):
        one_minus = 1.0 - u
        return g(c + u / one_minus) / (one_minus * one_minus)

    pieces = [(g, lo, hi) for lo, hi in zip(cuts[:-1], cuts[1:])]
    pieces.append((tail, 0.0, 1.0))
    return _adaptive(pieces, tol, rtol, limit)


def sum_affine_power_series(alpha: float, q: float, a: float, b: float,
                            tol: float = SERIES_RTOL, *, start: int = 0,
                            atol: float = 0.0, max_terms: int = 2_000_000_000) -> float:
    """Certified upper estimate of ``sum_{i >= start} (2i+4)**alpha * q**i * (a + b*i)``.

    Terms are accumulated until the geometric bound on the remaining tail is
    at most ``max(atol, tol * partial)``.  The returned value is the partial
    sum plus that tail bound, so it never underestimates the series and its
    relative error is at most ``tol``.

    The tail bound uses the ratio of consecutive terms
    ``rho_i = q * ((2i+6)/(2i+4))**alpha * (a+b(i+1))/(a+bi)``, which is
    nonincreasing in ``i``; once ``rho_i < 1`` the tail after ``i`` is at most
    ``term_i * rho_i / (1 - rho_i)``.
    """
    if not 0.0 < q < 1.0:
        raise RatioOutOfRange(f"ratio q={q!r} must lie in (0, 1)")
    if alpha < 0 or a < 0 or b < 0:
        raise ValueError("alpha, a and b must be nonnegative")
    if a == 0.0 and b == 0.0:
        return 0.0
    log_q = math.log(q)
    carried = 0.0
    i0 = int(start)
    chunk = 1024
    while i0 - start < max_terms:
        i = np.arange(i0, i0 + chunk, dtype=float)
        lin = a + b * i
        terms = np.exp(alpha * np.log(2.0 * i + 4.0) + i * log_q) * lin
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = q * ((2.0 * i + 6.0) / (2.0 * i + 4.0)) ** alpha * ((lin + b) / lin)
            tail = np.where(rho < 1.0, terms * rho / (1.0 - rho), np.inf)
        partial = carried + np.cumsum(terms)
        done = np.nonzero(tail <= np.maximum(atol, tol * partial))[0]
        if done.size:
            k = int(done[0])
            head = math.fsum(terms[: k + 1].tolist())
            return carried + head + float(tail[k])
        carried += math.fsum(terms.tolist())
        i0 += chunk
        chunk = min(chunk * 2, 1 << 20)
    raise NoConvergence(f"series needs more than {max_terms} terms (q={q!r})")


def invert_monotone(F: Callable[[float], float], u: float, lo: float = 0.0,
                    hi: float | None = None, tol: float = INVERT_TOL,
                    max_growth: int = 1000, max_bisect: int = 200) -> float:
    """Generalized inverse ``inf{s >= lo : F(s) >= u}`` of a nondecreasing ``F``.

    The bracket ``[lo, hi]`` grows as ``hi -> 2*hi + 1`` until ``F(hi) >= u``,
    then bisection narrows it to width ``tol`` (or to adjacent floats).  The
    right end is returned, so ``F(result) >= u`` always holds; at a jump of
    ``F`` this is the jump location, on a flat stretch its left end.

    The Cython kernels reproduce this routine operation by operation; keep
    the two in step.
    """
    if F(lo) >= u:
        return lo
    if hi is None:
        hi = 2.0 * lo + 1.0
    grown = 0
    while F(hi) < u:
        lo = hi
        hi = 2.0 * hi + 1.0
        grown += 1
        if grown > max_growth or not math.isfinite(hi):
            raise BracketFailure(f"could not bracket target {u!r}")
    for _ in range(max_bisect):
        if hi - lo <= tol:
            break
        mid = lo + 0.5 * (hi - lo)
        if mid <= lo or mid >= hi:
            break
        if F(mid) >= u:
            hi = mid
        else:
            lo = mid
    return hi
