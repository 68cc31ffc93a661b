# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled simulation kernels for the Pareto model.

Every arithmetic step mirrors ``_pykernels`` and ``coupling.ParetoKit`` so
that both backends produce bit-identical output from the same streams.
"""
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport pow, log1p, expm1, isfinite
from libc.stdlib cimport malloc, free
from numpy.random cimport bitgen_t

import numpy as np

cdef double U_MAX = 1.0 - 2.0 ** -53
cdef double INVERT_TOL = 1e-12
cdef int MAX_GROWTH = 1000
cdef int MAX_BISECT = 200


cdef inline double next_u(bitgen_t* bg) noexcept nogil:
    return bg.next_double(bg.state)


cdef inline double res_inv(double K, double x, double u) noexcept nogil:
    return (1.0 + x) * pow(1.0 - u, -1.0 / K) - (1.0 + x)


cdef inline double eq_inv(double K, double u) noexcept nogil:
    return pow(1.0 - u, -1.0 / (K - 1.0)) - 1.0


cdef inline double surv(double K, double x, double s) noexcept nogil:
    return pow((1.0 + x) / (1.0 + x + s), K)


cdef inline double gap(double K, double lo, double hi, double s) noexcept nogil:
    return pow((1.0 + hi) / (1.0 + hi + s), K) - pow((1.0 + lo) / (1.0 + lo + s), K)


cdef double invert_gap(double K, double lo_age, double hi_age, double sign, double u,
                       double lo, double hi, int* err) noexcept nogil:
    # invert s -> sign * gap(s) over [lo, hi], as numerics.invert_monotone
    cdef int grown = 0, it
    cdef double mid
    if sign * gap(K, lo_age, hi_age, lo) >= u:
        return lo
    while sign * gap(K, lo_age, hi_age, hi) < u:
        lo = hi
        hi = 2.0 * hi + 1.0
        grown += 1
        if grown > MAX_GROWTH or not isfinite(hi):
            err[0] = 1
            return hi
    for it in range(MAX_BISECT):
        if hi - lo <= INVERT_TOL:
            break
        mid = lo + 0.5 * (hi - lo)
        if mid <= lo or mid >= hi:
            break
        if sign * gap(K, lo_age, hi_age, mid) >= u:
            hi = mid
        else:
            lo = mid
    return hi


cdef void splice_pair(double K, double x, double y, double u,
                      double* t1, double* t2, int* err) noexcept nogil:
    cdef double lo, hi, d, e, ss, gmax, kap, f_hi, target, t, v, t_lo, t_hi
    if x == y:
        t = res_inv(K, x, u)
        t1[0] = t
        t2[0] = t
        return
    lo = x if x < y else y
    hi = x if x > y else y
    d = log1p((hi - lo) / (1.0 + lo))
    e = expm1(K / (K + 1.0) * d)
    ss = (1.0 + lo) * (expm1(d) - e) / e
    gmax = gap(K, lo, hi, ss)
    kap = 1.0 - gmax
    if u < kap:
        f_hi = 1.0 - surv(K, hi, ss)
        if u < f_hi:
            t = res_inv(K, hi, u)
        else:
            target = u - f_hi + (1.0 - surv(K, lo, ss))
            t = res_inv(K, lo, target if target < U_MAX else U_MAX)
        t1[0] = t
        t2[0] = t
        return
    v = u - kap
    t_lo = invert_gap(K, lo, hi, 1.0, v if v < gmax else gmax, 0.0, ss, err)
    t_hi = invert_gap(K, lo, hi, -1.0, -(1.0 - u), ss, 2.0 * ss + 1.0, err)
    if x == lo:
        t1[0] = t_lo
        t2[0] = t_hi
    else:
        t1[0] = t_hi
        t2[0] = t_lo


cdef inline bitgen_t* unwrap(object bg) except NULL:
    return <bitgen_t*> PyCapsule_GetPointer(bg.capsule, "BitGenerator")


cdef bitgen_t** unwrap_all(list bitgens) except NULL:
    cdef Py_ssize_t n = len(bitgens), i
    cdef bitgen_t** out = <bitgen_t**> malloc(max(n, 1) * sizeof(bitgen_t*))
    if out == NULL:
        raise MemoryError()
    for i in range(n):
        out[i] = unwrap(bitgens[i])
    return out


def availability_block(double K1, double K2, double A, list bitgens,
                       long[::1] regime0, double[::1] elapsed0, bint equilibrium,
                       double[::1] grid):
    cdef Py_ssize_t n = len(bitgens), G = grid.shape[0], r, gi
    cdef bitgen_t** bgs = unwrap_all(bitgens)
    counts = np.zeros(G, dtype=np.int64)
    switches = np.zeros(n, dtype=np.int64)
    cdef long long[::1] cnt = counts
    cdef long long[::1] sw = switches
    cdef int regime
    cdef double x, end, g, K
    cdef long long nsw
    cdef bitgen_t* bg
    try:
        with nogil:
            for r in range(n):
                bg = bgs[r]
                if equilibrium:
                    regime = 1 if next_u(bg) < A else 2
                    K = K1 if regime == 1 else K2
                    x = eq_inv(K, next_u(bg))
                else:
                    regime = <int> regime0[r]
                    x = elapsed0[r]
                K = K1 if regime == 1 else K2
                end = res_inv(K, x, next_u(bg))
                nsw = 0
                for gi in range(G):
                    g = grid[gi]
                    while g >= end:
                        regime = 3 - regime
                        K = K1 if regime == 1 else K2
                        end = end + res_inv(K, 0.0, next_u(bg))
                        nsw += 1
                    if regime == 1:
                        cnt[gi] += 1
                sw[r] = nsw
    finally:
        free(bgs)
    return counts, switches


def coupling_block(double K1, double K2, list bitgens, int m1, double x1,
                   int m2, double x2, long long cap):
    cdef Py_ssize_t n = len(bitgens), r
    cdef bitgen_t** bgs = unwrap_all(bitgens)
    sigma = np.zeros(n)
    events = np.zeros(n, dtype=np.int64)
    capped = np.zeros(n, dtype=np.uint8)
    cdef double[::1] sig = sigma
    cdef long long[::1] ev = events
    cdef unsigned char[::1] cp = capped
    cdef int a1, a2, err = 0
    cdef double y1, y2, clock, t1, t2, theta, u, u1, u2
    cdef long long k
    cdef bitgen_t* bg
    try:
        with nogil:
            for r in range(n):
                bg = bgs[r]
                a1 = m1
                y1 = x1
                a2 = m2
                y2 = x2
                clock = 0.0
                k = 0
                while not (a1 == a2 and y1 == y2):
                    if k >= cap:
                        cp[r] = 1
                        break
                    if a1 == 1 and a2 == 1:
                        u = next_u(bg)
                        splice_pair(K1, y1, y2, u, &t1, &t2, &err)
                        if err:
                            break
                    else:
                        u1 = next_u(bg)
                        u2 = next_u(bg)
                        t1 = res_inv(K1 if a1 == 1 else K2, y1, u1)
                        t2 = res_inv(K1 if a2 == 1 else K2, y2, u2)
                    theta = t1 if t1 < t2 else t2
                    if t1 == theta:
                        a1 = 3 - a1
                        y1 = 0.0
                    else:
                        y1 = y1 + theta
                    if t2 == theta:
                        a2 = 3 - a2
                        y2 = 0.0
                    else:
                        y2 = y2 + theta
                    clock = clock + theta
                    k += 1
                sig[r] = clock
                ev[r] = k
                if err:
                    break
    finally:
        free(bgs)
    if err:
        from .errors import BracketFailure
        raise BracketFailure("could not bracket a splice inversion target")
    return sigma, events, capped


def splice_block(double K, double x, double y, object bitgen, Py_ssize_t n):
    cdef bitgen_t* bg = unwrap(bitgen)
    out1 = np.empty(n)
    out2 = np.empty(n)
    cdef double[::1] o1 = out1
    cdef double[::1] o2 = out2
    cdef Py_ssize_t i
    cdef int err = 0
    with nogil:
        for i in range(n):
            splice_pair(K, x, y, next_u(bg), &o1[i], &o2[i], &err)
            if err:
                break
    if err:
        from .errors import BracketFailure
        raise BracketFailure("could not bracket a splice inversion target")
    return out1, out2
