# cython: boundscheck=False, wraparound=False, initializedcheck=False
# Compiled coordinate-descent sweep; semantics mirror _cd_py exactly.
# Plain -O3, no fast-math: the degenerate-bound branches rely on the guards
# below rather than IEEE division tricks, but comparisons must stay strict.

import numpy as np

cimport numpy as cnp


cdef inline double _update(double c, double s, double lo, double up,
                           bint forced, double lam) nogil:
    cdef double t
    if forced:
        t = c / s
        if t > up:
            return up
        if t < lo:
            return lo
        return t
    if up > 0.0 and c * up > lam:
        t = (c - lam / up) / s
        if t > up:
            return up
        return t if t > 0.0 else 0.0
    if lo < 0.0 and c * lo > lam:
        t = (c - lam / lo) / s
        if t < lo:
            return lo
        return t if t < 0.0 else 0.0
    return 0.0


def update_coordinate(double c, double s, double lo, double up, bint forced,
                      double lam):
    if s <= 0.0:
        return 0.0
    return _update(c, s, lo, up, forced, lam)


def dual_pivot_sums(const double[::1] lo, const double[::1] up,
                    const cnp.int64_t[::1] s1, const cnp.int64_t[::1] sbar,
                    const double[::1] corr, double lam):
    """Sum of the two-hinge pivot terms entering the dual objective.

    Forced-nonzero coordinates contribute at threshold 0, free ones at
    threshold lam; forced-zero coordinates contribute nothing.
    """
    cdef Py_ssize_t t, j
    cdef double c, acc = 0.0
    with nogil:
        for t in range(s1.shape[0]):
            j = s1[t]
            c = corr[j]
            acc += max(up[j] * c, 0.0) + max(lo[j] * c, 0.0)
        for t in range(sbar.shape[0]):
            j = sbar[t]
            c = corr[j]
            acc += max(up[j] * c - lam, 0.0) + max(lo[j] * c - lam, 0.0)
    return acc


def peel_pass(double[::1] lo, double[::1] up, const cnp.int64_t[::1] sbar,
              const double[::1] corr, double lam, double gap,
              double eps_alpha):
    """Apply both one-sided peel tests to every free coordinate, in place.

    ``gap`` is p_bar - D under the incoming bounds; every test reads the
    incoming bound values (cached before any write), so the result equals the
    parallel intersection of the single-coordinate peels.  Returns the number
    of (upper, lower) bounds shrunk.
    """
    cdef Py_ssize_t t, j
    cdef double c, lj, uj, piv, psi, ab
    cdef int n_up = 0, n_lo = 0
    with nogil:
        for t in range(sbar.shape[0]):
            j = sbar[t]
            c = corr[j]
            lj = lo[j]
            uj = up[j]
            piv = max(uj * c - lam, 0.0) + max(lj * c - lam, 0.0)
            if uj > 0.0:
                psi = piv - uj * max(c, 0.0) + lam
                if c >= 0.0:
                    if psi > gap:
                        up[j] = 0.0
                        n_up += 1
                else:
                    ab = (gap - psi) / (-c)
                    if ab < 0.0:
                        up[j] = 0.0
                        n_up += 1
                    elif ab + eps_alpha < uj:
                        up[j] = ab + eps_alpha
                        n_up += 1
            if lj < 0.0:
                psi = piv + lj * max(-c, 0.0) + lam
                if c <= 0.0:
                    if psi > gap:
                        lo[j] = 0.0
                        n_lo += 1
                else:
                    ab = (gap - psi) / c
                    if ab < 0.0:
                        lo[j] = 0.0
                        n_lo += 1
                    elif ab + eps_alpha < -lj:
                        lo[j] = -(ab + eps_alpha)
                        n_lo += 1
    return n_up, n_lo


def cd_sweep(double[::1, :] A, double[::1] r, double[::1] x,
             double[::1] lo, double[::1] up, const double[::1] col_sq,
             const cnp.int64_t[::1] order, Py_ssize_t n_forced, double lam):
    """One cyclic pass over ``order``; updates ``x`` and ``r`` in place.

    Returns the largest absolute coordinate change of the pass.
    """
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t t, i, j
    cdef double c, s, xj, newx, d, ad
    cdef double max_delta = 0.0
    with nogil:
        for t in range(order.shape[0]):
            j = order[t]
            s = col_sq[j]
            xj = x[j]
            if s <= 0.0:
                if xj != 0.0:
                    x[j] = 0.0
                    ad = -xj if xj < 0.0 else xj
                    if ad > max_delta:
                        max_delta = ad
                continue
            c = 0.0
            for i in range(m):
                c += A[i, j] * r[i]
            c += s * xj
            newx = _update(c, s, lo[j], up[j], t < n_forced, lam)
            d = newx - xj
            if d != 0.0:
                for i in range(m):
                    r[i] -= d * A[i, j]
                x[j] = newx
                ad = -d if d < 0.0 else d
                if ad > max_delta:
                    max_delta = ad
    return max_delta
