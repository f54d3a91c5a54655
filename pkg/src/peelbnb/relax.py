"""Per-node convex relaxation, solved by cyclic coordinate descent.

A node fixes the coordinates in S0 to zero and declares those in S1 nonzero;
the rest (Sbar) are free.  The relaxation replaces the sparsity count on the
free coordinates by the interval-scaled hinge surrogate

    nnz(x) >= |S1| + sum_{i in Sbar} [x_i]_+/u_i - [-x_i]_+/l_i

(convention 0/0 = 0), giving a convex problem over the box whose value
lower-bounds the exact node value.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .dual import dual_objective
from .instance import BoxBounds, ProblemInstance

Array = NDArray[np.float64]

__all__ = [
    "NodePartition",
    "RelaxationResult",
    "relax_objective",
    "coordinate_update",
    "solve_relaxation",
]

# full residual recomputation cadence, bounds incremental-update drift
_RESYNC_EVERY = 50


@dataclass(frozen=True)
class NodePartition:
    """Disjoint forced-zero (s0) and forced-nonzero (s1) index sets over range(n)."""

    n: int
    s0: frozenset[int]
    s1: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "s0", frozenset(int(i) for i in self.s0))
        object.__setattr__(self, "s1", frozenset(int(i) for i in self.s1))
        if self.s0 & self.s1:
            raise ValueError("s0 and s1 must be disjoint")
        for j in self.s0 | self.s1:
            if not (0 <= j < self.n):
                raise ValueError(f"index {j} out of range(0, {self.n})")

    @classmethod
    def root(cls, n: int) -> "NodePartition":
        return cls(n, frozenset(), frozenset())

    def with_zero(self, j: int) -> "NodePartition":
        return NodePartition(self.n, self.s0 | {j}, self.s1)

    def with_one(self, j: int) -> "NodePartition":
        return NodePartition(self.n, self.s0, self.s1 | {j})

    @cached_property
    def s1_array(self) -> NDArray[np.int64]:
        return np.array(sorted(self.s1), dtype=np.int64)

    @cached_property
    def sbar_array(self) -> NDArray[np.int64]:
        free = set(range(self.n)) - self.s0 - self.s1
        return np.array(sorted(free), dtype=np.int64)

    @cached_property
    def cd_order(self) -> NDArray[np.int64]:
        """Sweep order: forced-nonzero coordinates first, then free, both ascending."""
        return np.concatenate([self.s1_array, self.sbar_array])

    @property
    def is_leaf(self) -> bool:
        return self.sbar_array.size == 0


@dataclass(frozen=True)
class RelaxationResult:
    """Relaxed minimizer, its value, and the dual point / correlations at it."""

    x_hat: Array
    value: float
    w: Array
    corr: Array
    iterations: int
    converged: bool


def relax_objective(
    x: Array, node: NodePartition, bounds: BoxBounds, inst: ProblemInstance
) -> float:
    """Relaxation objective at ``x``; +inf when x violates x_S0 = 0 or the box."""
    x = np.asarray(x, dtype=np.float64)
    s0 = np.array(sorted(node.s0), dtype=np.int64)
    if s0.size and np.any(x[s0] != 0.0):
        return np.inf
    if np.any(x < bounds.l) or np.any(x > bounds.u):
        return np.inf
    r = inst.y - inst.A @ x
    value = 0.5 * float(r @ r) + inst.lam * len(node.s1)
    sbar = node.sbar_array
    if sbar.size:
        xs = x[sbar]
        term = np.zeros(sbar.size)
        pos = xs > 0.0
        neg = xs < 0.0
        # feasibility already established, so xs > 0 implies u > 0 (and
        # likewise for the negative side); 0/0 = 0 needs no special case
        term[pos] = xs[pos] / bounds.u[sbar][pos]
        term[neg] = xs[neg] / bounds.l[sbar][neg]
        value += inst.lam * float(np.sum(term))
    return value


def coordinate_update(
    j: int,
    c: float,
    s: float,
    node: NodePartition,
    bounds: BoxBounds,
    lam: float,
) -> float:
    """Exact minimizer of the one-coordinate restriction at coordinate ``j``.

    ``c`` is a_j^T (residual excluding j's own contribution), ``s = ||a_j||^2``.
    """
    if j in node.s0:
        return 0.0
    if s <= 0.0:
        return 0.0
    return _kernels.update_coordinate(
        float(c), float(s), float(bounds.l[j]), float(bounds.u[j]), j in node.s1, float(lam)
    )


def solve_relaxation(
    node: NodePartition,
    bounds: BoxBounds,
    inst: ProblemInstance,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    warm_start: Optional[Array] = None,
    peel_hook: Optional[Callable[[Array, Array], int]] = None,
) -> RelaxationResult:
    """Cyclic coordinate descent on the node relaxation.

    Sweeps run in the fixed order S1-then-Sbar (ascending) until the largest
    coordinate change of a sweep drops to ``tol`` or ``max_iter`` sweeps pass.
    After every sweep, the residual w = y - A x and the correlations
    corr = A^T w are formed and ``peel_hook(w, corr)`` is invoked; the hook
    may shrink ``bounds`` in place (returning a truthy value when it did), in
    which case the iterate is clamped into the new box and the sweep loop
    continues.  Non-convergence is reported, not raised: the returned value is
    still a genuine objective value, and pruning can fall back on the dual
    bound, valid at any w.
    """
    n = inst.n
    x = np.zeros(n)
    if warm_start is not None:
        x[:] = np.asarray(warm_start, dtype=np.float64)
        np.clip(x, bounds.l, bounds.u, out=x)
        s0 = np.array(sorted(node.s0), dtype=np.int64)
        if s0.size:
            x[s0] = 0.0
    order = node.cd_order
    n_forced = int(node.s1_array.size)
    r = inst.y - inst.A @ x if np.any(x) else inst.y.copy()

    iterations = 0
    converged = order.size == 0
    for sweep in range(max_iter):
        if order.size == 0:
            break
        delta = _kernels.cd_sweep(
            inst.A, r, x, bounds.l, bounds.u, inst.col_sq, order, n_forced, inst.lam
        )
        iterations += 1
        if iterations % _RESYNC_EVERY == 0:
            np.subtract(inst.y, inst.A @ x, out=r)
        peeled = 0
        if peel_hook is not None:
            peeled = peel_hook(r.copy(), inst.A.T @ r)
            if peeled:
                np.clip(x, bounds.l, bounds.u, out=x)
                np.subtract(inst.y, inst.A @ x, out=r)
        if delta <= tol and not peeled:
            converged = True
            break

    w = inst.y - inst.A @ x
    corr = inst.A.T @ w
    value = relax_objective(x, node, bounds, inst)
    # weak duality must hold for the returned pair up to roundoff
    dval = dual_objective(w, corr, node, bounds, inst).value
    assert value >= dval - 1e-8 * (1.0 + abs(value)), (value, dval)
    return RelaxationResult(
        x_hat=x, value=value, w=w, corr=corr, iterations=iterations, converged=converged
    )
