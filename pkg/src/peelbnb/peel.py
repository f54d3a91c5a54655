"""Safe peeling: dual certificates that shrink box bounds without changing the optimum.

Given a dual value D under the current bounds, an incumbent value p_bar and
the column correlations corr = A^T w, each free coordinate gets a slab test:
if no point with x_j above a level alpha can beat p_bar (certified by
D + psi_j + alpha*[-corr_j]_+ > p_bar), the upper bound can drop to alpha.
The lower side is the x -> -x mirror.  Tightened bounds strengthen the node
relaxation and are inherited by child nodes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .dual import pivot
from .instance import BoxBounds

if TYPE_CHECKING:
    from .relax import NodePartition

Array = NDArray[np.float64]

__all__ = [
    "PeelOutcome",
    "PeelTrace",
    "psi_upper",
    "psi_lower",
    "peel_upper",
    "peel_lower",
    "peel_all",
]


@dataclass(frozen=True)
class PeelOutcome:
    """Bounds after one parallel peeling pass, with counts of fired certificates."""

    bounds: BoxBounds
    n_upper_peeled: int
    n_lower_peeled: int
    implied_zero: tuple[int, ...]

    @property
    def n_peeled(self) -> int:
        return self.n_upper_peeled + self.n_lower_peeled


@dataclass
class PeelTrace:
    """Audit log of fired peels; one row per certificate that shrank a bound."""

    rows: list[tuple] = field(default_factory=list)

    HEADER = ("node_id", "j", "side", "corr_j", "D", "psi", "p_bar", "old_bound", "new_bound")

    def record(self, node_id, j, side, corr_j, D, psi, p_bar, old_bound, new_bound) -> None:
        self.rows.append((node_id, j, side, corr_j, D, psi, p_bar, old_bound, new_bound))

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(self.HEADER)
            wr.writerows(self.rows)


def psi_upper(j: int, corr_j: float, bounds: BoxBounds, lam: float) -> float:
    """Certificate slack for restricting free coordinate j to [alpha, u_j]."""
    u_j = float(bounds.u[j])
    return pivot(lam, float(bounds.l[j]), u_j, corr_j) - u_j * max(corr_j, 0.0) + lam


def psi_lower(j: int, corr_j: float, bounds: BoxBounds, lam: float) -> float:
    """Mirror of :func:`psi_upper` for restricting coordinate j to [l_j, -alpha]."""
    l_j = float(bounds.l[j])
    return pivot(lam, l_j, float(bounds.u[j]), corr_j) + l_j * max(-corr_j, 0.0) + lam


def peel_upper(
    j: int,
    corr_j: float,
    D: float,
    p_bar: float,
    bounds: BoxBounds,
    lam: float,
    eps_alpha: float = 1e-16,
) -> Optional[float]:
    """New upper bound for free coordinate j, or None when no certificate fires.

    With corr_j >= 0 the test is all-or-nothing: D + psi_j > p_bar peels to 0.
    With corr_j < 0 the certified threshold is
    alpha_bar = (p_bar - D - psi_j) / (-corr_j); any level strictly above it
    is safe, so the new bound is alpha_bar + eps_alpha (or 0 when alpha_bar
    is already negative).  Returned values always lie in [0, u_j).
    """
    u_j = float(bounds.u[j])
    psi = psi_upper(j, corr_j, bounds, lam)
    gap = p_bar - D
    if corr_j >= 0.0:
        if psi > gap:
            return 0.0
        return None
    alpha_bar = (gap - psi) / (-corr_j)
    if alpha_bar < 0.0:
        return 0.0
    alpha = alpha_bar + eps_alpha
    if alpha < u_j:
        return alpha
    return None


def peel_lower(
    j: int,
    corr_j: float,
    D: float,
    p_bar: float,
    bounds: BoxBounds,
    lam: float,
    eps_alpha: float = 1e-16,
) -> Optional[float]:
    """New lower bound for free coordinate j in (l_j, 0], or None; mirror of peel_upper."""
    l_j = float(bounds.l[j])
    psi = psi_lower(j, corr_j, bounds, lam)
    gap = p_bar - D
    if corr_j <= 0.0:
        if psi > gap:
            return 0.0
        return None
    alpha_bar = (gap - psi) / corr_j
    if alpha_bar < 0.0:
        return 0.0
    alpha = alpha_bar + eps_alpha
    if alpha < -l_j:
        return -alpha
    return None


def peel_all(
    node: "NodePartition",
    w: Array,
    corr: Array,
    D: float,
    p_bar: float,
    bounds: BoxBounds,
    lam: float,
    eps_alpha: float = 1e-16,
    trace: Optional[PeelTrace] = None,
    node_id: Optional[int] = None,
) -> PeelOutcome:
    """Apply both one-sided tests to every free coordinate, in parallel.

    All tests share the same (D, p_bar) evaluated under the input bounds; the
    results are combined by componentwise interval intersection, which is
    itself a valid peeled box.  Cost is O(n) given ``corr`` (no matrix-vector
    products; the per-coordinate tests run in the compiled kernel when it is
    available).  Input bounds are not modified.
    """
    new_l = bounds.l.copy()
    new_u = bounds.u.copy()
    sbar = node.sbar_array
    if sbar.size == 0:
        return PeelOutcome(BoxBounds._wrap(new_l, new_u), 0, 0, ())

    gap = p_bar - D
    n_up, n_lo = _kernels.peel_pass(
        new_l, new_u, sbar, np.ascontiguousarray(corr, dtype=np.float64),
        float(lam), gap, float(eps_alpha),
    )
    if trace is not None and (n_up or n_lo):
        for j in sbar:
            j = int(j)
            cj = float(corr[j])
            if new_u[j] != bounds.u[j]:
                trace.record(node_id, j, "upper", cj, D, psi_upper(j, cj, bounds, lam),
                             p_bar, float(bounds.u[j]), float(new_u[j]))
            if new_l[j] != bounds.l[j]:
                trace.record(node_id, j, "lower", cj, D, psi_lower(j, cj, bounds, lam),
                             p_bar, float(bounds.l[j]), float(new_l[j]))

    implied = sbar[(new_l[sbar] == 0.0) & (new_u[sbar] == 0.0)]
    return PeelOutcome(
        bounds=BoxBounds._wrap(new_l, new_u),
        n_upper_peeled=int(n_up),
        n_lower_peeled=int(n_lo),
        implied_zero=tuple(int(j) for j in implied),
    )
