"""Independent brute-force references for validation at small sizes.

Exactness checks, peeling-safety checks and certificate bounds are all
verified against plain support enumeration: unconstrained least squares per
support for the global problem, box-constrained least squares (projected
gradient) per admissible support for node problems.  Kept deliberately
separate from the solver's own numerics.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .instance import BoxBounds, ProblemInstance
from .relax import NodePartition

Array = NDArray[np.float64]

__all__ = ["OracleResult", "OracleBudgetError", "brute_force_global", "brute_force_node"]

_SUPPORT_BUDGET = 10**6


class OracleBudgetError(RuntimeError):
    """Raised when an enumeration would exceed the support budget."""


@dataclass(frozen=True)
class OracleResult:
    """Minimizer found by enumeration (x is None when the problem is infeasible)."""

    x: Optional[Array]
    value: float
    support: Optional[tuple[int, ...]]
    enumerated_count: int
    s1_hits_zero: bool = False


def _ls_on_support(G: Array, g: Array, A: Array, y: Array, sup: tuple[int, ...]) -> Array:
    """Least-squares coefficients on a support; least-norm via lstsq when rank-deficient."""
    s = len(sup)
    idx = np.array(sup, dtype=np.int64)
    if s <= A.shape[0]:
        Gs = G[np.ix_(idx, idx)]
        gs = g[idx]
        try:
            x_s = np.linalg.solve(Gs, gs)
        except np.linalg.LinAlgError:
            x_s = None
        if x_s is not None and np.all(np.isfinite(x_s)):
            if float(np.max(np.abs(Gs @ x_s - gs))) <= 1e-6 * (1.0 + float(np.max(np.abs(gs)))):
                return x_s
    x_s, *_ = np.linalg.lstsq(A[:, idx], y, rcond=None)
    return x_s


def brute_force_global(inst: ProblemInstance, max_support: Optional[int] = None) -> OracleResult:
    """Global optimum of the penalized problem by enumerating every support.

    Supports are visited by increasing size, lexicographically within a size;
    exact value ties keep the lexicographically smallest support.  The value
    recounts exact zeros of each least-squares solution, so it is the true
    objective of the returned point.
    """
    n = inst.n
    if max_support is None:
        max_support = n
    max_support = min(max_support, n)
    total = sum(math.comb(n, s) for s in range(max_support + 1))
    if total > _SUPPORT_BUDGET:
        raise OracleBudgetError(f"{total} supports exceed the enumeration budget")

    G = inst.A.T @ inst.A
    g = inst.A.T @ inst.y
    best_x = np.zeros(n)
    best_value = inst.half_y_sq
    best_support: tuple[int, ...] = ()
    count = 1
    for size in range(1, max_support + 1):
        for sup in itertools.combinations(range(n), size):
            count += 1
            x_s = _ls_on_support(G, g, inst.A, inst.y, sup)
            idx = np.array(sup, dtype=np.int64)
            r = inst.y - inst.A[:, idx] @ x_s
            value = 0.5 * float(r @ r) + inst.lam * int(np.count_nonzero(x_s))
            if value < best_value or (value == best_value and sup < best_support):
                best_value = value
                best_support = sup
                best_x = np.zeros(n)
                best_x[idx] = x_s
    return OracleResult(
        x=best_x,
        value=best_value,
        support=tuple(int(j) for j in np.flatnonzero(best_x)),
        enumerated_count=count,
    )


def _box_ls_power(A_S: Array, y: Array, lo: Array, up: Array,
                  tol: float = 1e-10, max_iter: int = 50_000) -> Array:
    """Projected gradient for box-constrained least squares.

    The step is the reciprocal of the largest Gram eigenvalue, estimated by a
    20-iteration power method from a deterministic start.
    """
    s = A_S.shape[1]
    x = np.clip(np.zeros(s), lo, up)
    if s == 0:
        return x
    G = A_S.T @ A_S
    v = np.ones(s) + 1e-3 * np.arange(s)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(20):
        w = G @ v
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return x
        v = w / est
    step = 1.0 / est
    b = A_S.T @ y
    for _ in range(max_iter):
        x_new = np.clip(x - step * (G @ x - b), lo, up)
        delta = float(np.max(np.abs(x_new - x)))
        x = x_new
        if delta <= tol:
            break
    return x


def brute_force_node(
    inst: ProblemInstance,
    node: NodePartition,
    bounds: BoxBounds,
    extra: Optional[tuple[int, str, float]] = None,
) -> OracleResult:
    """Exact node value by enumerating supports between S1 and S1 + Sbar.

    ``extra = (j, side, alpha)`` adds the open half-line constraint
    x_j > alpha (side "upper") or x_j < -alpha (side "lower"), handled on its
    closure with a 1e-12 offset since the open constraint's infimum equals
    the closed one's minimum here.  The result flags whether the minimizer
    has an exactly-zero forced-nonzero entry (in which case the strict node
    infimum may be unattained).
    """
    sbar = [int(j) for j in node.sbar_array]
    if 2 ** len(sbar) > _SUPPORT_BUDGET:
        raise OracleBudgetError(f"2^{len(sbar)} supports exceed the enumeration budget")
    s1 = sorted(node.s1)

    j_c = side = alpha = None
    if extra is not None:
        j_c, side, alpha = int(extra[0]), extra[1], float(extra[2])
        if side not in ("upper", "lower"):
            raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
        if j_c in node.s0:
            raise ValueError("half-line constraint on a forced-zero coordinate")

    def slab(lo_j: float, up_j: float) -> tuple[float, float]:
        if side == "upper":
            return max(lo_j, alpha + 1e-12), up_j
        return lo_j, min(up_j, -alpha - 1e-12)

    best_x = None
    best_value = math.inf
    count = 0
    for size in range(len(sbar) + 1):
        for pick in itertools.combinations(sbar, size):
            sup = tuple(sorted(s1 + list(pick)))
            count += 1
            if j_c is not None and j_c not in sup:
                # x_{j_c} = 0 must satisfy the half-line constraint
                lo0, up0 = slab(0.0, 0.0)
                if lo0 > 0.0 or up0 < 0.0:
                    continue
            idx = np.array(sup, dtype=np.int64)
            lo = bounds.l[idx].copy()
            up = bounds.u[idx].copy()
            if j_c is not None and j_c in sup:
                pos = sup.index(j_c)
                lo[pos], up[pos] = slab(lo[pos], up[pos])
                if lo[pos] > up[pos]:
                    continue
            x_s = _box_ls_power(inst.A[:, idx], inst.y, lo, up) if idx.size else np.zeros(0)
            x = np.zeros(inst.n)
            if idx.size:
                x[idx] = x_s
            r = inst.y - inst.A @ x
            value = 0.5 * float(r @ r) + inst.lam * int(np.count_nonzero(x))
            if value < best_value:
                best_value = value
                best_x = x
    if best_x is None:
        return OracleResult(x=None, value=math.inf, support=None,
                            enumerated_count=count)
    return OracleResult(
        x=best_x,
        value=best_value,
        support=tuple(int(j) for j in np.flatnonzero(best_x)),
        enumerated_count=count,
        s1_hits_zero=bool(any(best_x[j] == 0.0 for j in s1)),
    )
