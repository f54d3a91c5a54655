"""Fenchel-dual lower bound on node problems, and its conjugate building blocks.

For a dual point ``w`` in observation space, the dual objective

    D(w) = 0.5*||y||^2 - 0.5*||y - w||^2 + lam*|S1|
           - sum_{i in S1} pivot(0, i)(a_i^T w)
           - sum_{i in Sbar} pivot(lam, i)(a_i^T w)

lower-bounds both the node relaxation value and the exact node value, for
*any* w (weak duality); the solver uses w = y - A x_hat from the current
primal iterate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np
from numpy.typing import NDArray

if TYPE_CHECKING:
    from .instance import BoxBounds, ProblemInstance
    from .relax import NodePartition

Array = NDArray[np.float64]

__all__ = [
    "DualEvaluation",
    "pivot",
    "conjugate_box_const",
    "conjugate_box_linear",
    "dual_objective",
]


def pivot(rho: float, l_i: float, u_i: float, v: float) -> float:
    """Two-hinge pivot [u_i*v - rho]_+ + [l_i*v - rho]_+ (requires rho >= 0, l_i <= 0 <= u_i)."""
    return max(u_i * v - rho, 0.0) + max(l_i * v - rho, 0.0)


def conjugate_box_const(b: float, l: float, u: float, v: float) -> float:
    """Convex conjugate of x -> b + indicator(x in [l, u]):  u*[v]_+ - l*[-v]_+ - b."""
    return u * max(v, 0.0) - l * max(-v, 0.0) - b


def conjugate_box_linear(a: float, l: float, u: float, v: float) -> float:
    """Conjugate of the interval-scaled hinge penalty a*([x]_+/u - [-x]_+/l) on [l, u].

    Equals [u*v - a]_+ + [l*v - a]_+ for a >= 0, l <= 0 <= u; the 0/0 = 0
    convention makes a degenerate side contribute nothing.
    """
    return max(u * v - a, 0.0) + max(l * v - a, 0.0)


@dataclass(frozen=True)
class DualEvaluation:
    """Dual point, its objective value, and the column correlations A^T w."""

    w: Array
    value: float
    corr: Array


def _pivot_sum(rho: float, l: Array, u: Array, v: Array) -> float:
    # fixed ascending index order; the caller passes index-sliced arrays
    return float(np.sum(np.maximum(u * v - rho, 0.0) + np.maximum(l * v - rho, 0.0)))


def dual_objective(
    w: Array,
    corr: Optional[Array],
    node: "NodePartition",
    bounds: "BoxBounds",
    inst: "ProblemInstance",
) -> DualEvaluation:
    """Evaluate D(w) for a node; forced-zero columns contribute nothing.

    ``corr`` may be supplied precomputed (it must equal A^T w); this keeps the
    per-sweep peeling overhead at O(n + m) instead of O(m n).
    """
    w = np.asarray(w, dtype=np.float64)
    if corr is None:
        corr = inst.A.T @ w
    diff = inst.y - w
    value = inst.half_y_sq - 0.5 * float(diff @ diff) + inst.lam * len(node.s1)
    s1 = node.s1_array
    if s1.size:
        value -= _pivot_sum(0.0, bounds.l[s1], bounds.u[s1], corr[s1])
    sbar = node.sbar_array
    if sbar.size:
        value -= _pivot_sum(inst.lam, bounds.l[sbar], bounds.u[sbar], corr[sbar])
    return DualEvaluation(w=w, value=value, corr=corr)
