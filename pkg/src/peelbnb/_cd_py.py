"""Pure-numpy fallback for the coordinate-descent sweep kernel.

Mirrors ``_cd_fast.pyx`` branch for branch; the compiled module is preferred
at import time when available (see ``_kernels``).
"""

from __future__ import annotations

import numpy as np


def update_coordinate(
    c: float, s: float, lo: float, up: float, forced: bool, lam: float
) -> float:
    """Closed-form minimizer of the one-coordinate restriction of the relaxation.

    ``c`` is the correlation of the column with the residual excluding this
    coordinate, ``s`` the squared column norm.  Forced-nonzero coordinates pay
    no interval penalty; free coordinates face the asymmetric soft threshold
    lam/up on the positive side and lam/lo on the negative side, with a
    degenerate bound (up == 0 or lo == 0) removing that side entirely.
    """
    if s <= 0.0:
        # zero column: the residual term is flat, 0 is feasible and optimal
        return 0.0
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


def dual_pivot_sums(lo, up, s1, sbar, corr, lam):
    """Sum of the two-hinge pivot terms entering the dual objective."""
    acc = 0.0
    if s1.size:
        c = corr[s1]
        acc += float(np.sum(np.maximum(up[s1] * c, 0.0) + np.maximum(lo[s1] * c, 0.0)))
    if sbar.size:
        c = corr[sbar]
        acc += float(np.sum(np.maximum(up[sbar] * c - lam, 0.0)
                            + np.maximum(lo[sbar] * c - lam, 0.0)))
    return acc


def peel_pass(lo, up, sbar, corr, lam, gap, eps_alpha):
    """Apply both one-sided peel tests to every free coordinate, in place.

    ``gap`` is p_bar - D under the incoming bounds.  Vectorized, but every
    expression matches the compiled kernel branch for branch.
    """
    if sbar.size == 0:
        return 0, 0
    l = lo[sbar]
    u = up[sbar]
    c = corr[sbar]
    piv = np.maximum(u * c - lam, 0.0) + np.maximum(l * c - lam, 0.0)

    psi_u = piv - u * np.maximum(c, 0.0) + lam
    u_new = np.full(sbar.size, np.nan)
    nonneg = c >= 0.0
    u_new[nonneg & (psi_u > gap)] = 0.0
    neg = ~nonneg
    ab = np.full(sbar.size, np.nan)
    np.divide(gap - psi_u, -c, out=ab, where=neg)
    u_new[neg & (ab < 0.0)] = 0.0
    shrink = neg & (ab >= 0.0) & (ab + eps_alpha < u)
    u_new[shrink] = ab[shrink] + eps_alpha
    up_fired = (u > 0.0) & ~np.isnan(u_new)

    psi_l = piv + l * np.maximum(-c, 0.0) + lam
    l_new = np.full(sbar.size, np.nan)
    nonpos = c <= 0.0
    l_new[nonpos & (psi_l > gap)] = 0.0
    pos = ~nonpos
    ab = np.full(sbar.size, np.nan)
    np.divide(gap - psi_l, c, out=ab, where=pos)
    l_new[pos & (ab < 0.0)] = 0.0
    shrink = pos & (ab >= 0.0) & (ab + eps_alpha < -l)
    l_new[shrink] = -(ab[shrink] + eps_alpha)
    lo_fired = (l < 0.0) & ~np.isnan(l_new)

    if np.any(up_fired):
        up[sbar[up_fired]] = u_new[up_fired]
    if np.any(lo_fired):
        lo[sbar[lo_fired]] = l_new[lo_fired]
    return int(np.count_nonzero(up_fired)), int(np.count_nonzero(lo_fired))


def cd_sweep(A, r, x, lo, up, col_sq, order, n_forced, lam):
    """One cyclic pass over ``order``; updates ``x`` and the residual ``r`` in place.

    The first ``n_forced`` entries of ``order`` are forced-nonzero
    coordinates, the rest are free.  Returns the largest absolute coordinate
    change of the pass.
    """
    max_delta = 0.0
    for t in range(order.shape[0]):
        j = order[t]
        s = col_sq[j]
        xj = x[j]
        if s <= 0.0:
            # zero column: no residual contribution, pin the coordinate at 0
            if xj != 0.0:
                x[j] = 0.0
                if abs(xj) > max_delta:
                    max_delta = abs(xj)
            continue
        col = A[:, j]
        c = float(col @ r) + s * xj
        newx = update_coordinate(c, s, lo[j], up[j], t < n_forced, lam)
        d = newx - xj
        if d != 0.0:
            r -= d * col
            x[j] = newx
            ad = abs(d)
            if ad > max_delta:
                max_delta = ad
    return max_delta
