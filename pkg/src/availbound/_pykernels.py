"""Pure-Python simulation kernels; the reference the compiled ones must match."""
from __future__ import annotations

import numpy as np

from .rng import UniformStream


def availability_block(model, bitgens, regime0, elapsed0, equilibrium, grid):
    """Count trajectories that are working at each grid time.

    Trajectory ``n`` starts from ``(regime0[n], elapsed0[n])`` or, when
    ``equilibrium`` is set, from a stationary draw.  Returns the per-grid
    working counts and the per-trajectory number of switches up to the last
    grid time.
    """
    laws = (None, model.work, model.repair)
    A = model.limiting_availability()
    grid_list = [float(g) for g in grid]
    counts = [0] * len(grid_list)
    switches = np.zeros(len(bitgens), dtype=np.int64)
    for n, bg in enumerate(bitgens):
        rng = UniformStream(bg)
        if equilibrium:
            regime = 1 if rng.random() < A else 2
            x = laws[regime].equilibrium_inverse(rng.random())
        else:
            regime = int(regime0[n])
            x = float(elapsed0[n])
        end = laws[regime].residual_inverse(x, rng.random())
        nsw = 0
        for gi, g in enumerate(grid_list):
            while g >= end:
                regime = 3 - regime
                end = end + laws[regime].residual_inverse(0.0, rng.random())
                nsw += 1
            if regime == 1:
                counts[gi] += 1
        switches[n] = nsw
    return np.asarray(counts, dtype=np.int64), switches


def coupling_block(model, bitgens, m1, x1, m2, x2, cap):
    """Coupling time, event count and cap flag for each bit generator."""
    from .coupling import _advance

    n = len(bitgens)
    sigma = np.zeros(n)
    events = np.zeros(n, dtype=np.int64)
    capped = np.zeros(n, dtype=np.uint8)
    for r, bg in enumerate(bitgens):
        rng = UniformStream(bg)
        a1, y1, a2, y2 = m1, x1, m2, x2
        clock = 0.0
        k = 0
        while not (a1 == a2 and y1 == y2):
            if k >= cap:
                capped[r] = 1
                break
            a1, y1, a2, y2, theta = _advance(model, a1, y1, a2, y2, rng)
            clock = clock + theta
            k += 1
        sigma[r] = clock
        events[r] = k
    return sigma, events, capped


def splice_block(model, x, y, bitgen, n):
    from .coupling import min_density_kit

    kit = min_density_kit(model, x, y)
    rng = UniformStream(bitgen)
    t1 = np.empty(n)
    t2 = np.empty(n)
    for i in range(n):
        t1[i], t2[i] = kit.draw(rng.random())
    return t1, t2
