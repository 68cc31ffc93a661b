"""Small statistical helpers shared by the simulators and the verifier."""
from __future__ import annotations

import math
from statistics import NormalDist

import numpy as np
from scipy import stats as _st


def z_value(level: float) -> float:
    return NormalDist().inv_cdf(0.5 + level / 2.0)


def wilson_interval(k, n, level: float = 0.99):
    """Wilson score interval for a binomial proportion; works elementwise."""
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    z = z_value(level)
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2.0 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    lo, hi = centre - half, centre + half
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def ks_against(sample, cdf) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov statistic and p-value."""
    res = _st.kstest(np.asarray(sample, dtype=float), cdf)
    return float(res.statistic), float(res.pvalue)


def mean_ci(values, level: float = 0.99) -> tuple[float, float, float]:
    """Sample mean with a normal-approximation interval."""
    v = np.asarray(values, dtype=float)
    m = float(v.mean())
    half = z_value(level) * float(v.std(ddof=1)) / math.sqrt(v.size) if v.size > 1 else math.inf
    return m, m - half, m + half
