"""Depth-first branch-and-bound over support partitions, with optional peeling.

Each node solves its convex relaxation by coordinate descent (the peel hook
tightens box bounds mid-solve when enabled), prunes against the incumbent
using the stronger of the relaxation value and the dual bound, and otherwise
branches on the largest free coordinate of the relaxed minimizer.  Children
inherit the node's final (peeled) bounds, so tightenings propagate down the
tree.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .dual import dual_objective
from .instance import BoxBounds, ProblemInstance, objective_P
from .peel import PeelTrace, peel_all
from .relax import NodePartition, solve_relaxation

Array = NDArray[np.float64]

__all__ = [
    "BnbConfig",
    "BnbNode",
    "Incumbent",
    "SolveReport",
    "NodeEvent",
    "prune_test",
    "branch",
    "update_incumbent",
    "solve",
    "make_calibration_solver",
    "report_csv_header",
    "report_csv_row",
]


@dataclass(frozen=True)
class BnbConfig:
    """Solver switches; defaults reproduce the reference behaviour."""

    peel: bool = True
    cd_tol: float = 1e-8
    max_cd_iter: int = 1000
    eps_prune: float = 1e-10
    eps_alpha: float = 1e-16
    tau_supp: float = 1e-8
    max_nodes: Optional[int] = None
    time_limit: Optional[float] = None
    branch_rule: str = "max_abs"
    audit: bool = False
    peel_trace: Optional[PeelTrace] = None


@dataclass
class BnbNode:
    """One subproblem: partition plus node-local box, warm start and lineage."""

    partition: NodePartition
    bounds: BoxBounds
    warm_start: Optional[Array] = None
    depth: int = 0
    node_id: Optional[int] = None
    parent_id: Optional[int] = None


@dataclass
class Incumbent:
    """Best feasible point so far; p_bar is its exact objective value."""

    x_best: Array
    p_bar: float


@dataclass(frozen=True)
class NodeEvent:
    """Audit record of one explored node (collected when config.audit is set)."""

    node_id: int
    parent_id: Optional[int]
    depth: int
    s0: tuple[int, ...]
    s1: tuple[int, ...]
    bounds_in: BoxBounds
    bounds_final: BoxBounds
    relax_value: float
    dual_value: float
    lower_bound: float
    p_bar_before: float
    p_bar_after: float
    action: str  # "pruned" | "branched" | "leaf"


@dataclass
class SolveReport:
    """Outcome of a solve: optimum, counters and termination status."""

    x_star: Array
    p_star: float
    node_count: int
    peel_fire_count: int
    total_sweeps: int
    wall_time_s: float
    status: str  # "optimal" | "budget_exhausted"
    optimal: bool
    audit: Optional[list[NodeEvent]] = None


def prune_test(lower_bound: float, p_bar: float, eps_prune: float = 1e-10) -> bool:
    """True when the node can be discarded: lower_bound > p_bar + eps_prune.

    Ties never prune, so optima are preserved under the floating-point margin.
    """
    return lower_bound > p_bar + eps_prune


def branch(
    node: BnbNode, x_hat: Array, rule: str = "max_abs"
) -> tuple[BnbNode, BnbNode]:
    """Split on a free coordinate; returns (forced-zero child, forced-nonzero child).

    The default rule picks argmax |x_hat_j| over the free set (ties to the
    smallest index).  Both children inherit the node's current bounds; the
    zero child gets a degenerate [0, 0] slot and a warm start with that
    coordinate cleared.
    """
    sbar = node.partition.sbar_array
    if sbar.size == 0:
        raise ValueError("cannot branch: no free coordinates left")
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if rule == "max_abs":
        j_star = int(sbar[int(np.argmax(np.abs(x_hat[sbar])))])
    elif rule == "min_index":
        j_star = int(sbar[0])
    else:
        raise ValueError(f"unknown branch rule {rule!r}")

    bounds_zero = node.bounds.copy()
    bounds_zero.l[j_star] = 0.0
    bounds_zero.u[j_star] = 0.0
    warm_zero = x_hat.copy()
    warm_zero[j_star] = 0.0
    child_zero = BnbNode(
        partition=node.partition.with_zero(j_star),
        bounds=bounds_zero,
        warm_start=warm_zero,
        depth=node.depth + 1,
        parent_id=node.node_id,
    )
    child_one = BnbNode(
        partition=node.partition.with_one(j_star),
        bounds=node.bounds.copy(),
        warm_start=x_hat.copy(),
        depth=node.depth + 1,
        parent_id=node.node_id,
    )
    return child_zero, child_one


def _box_ls(A_S: Array, y: Array, lo: Array, up: Array, tol: float = 1e-10,
            max_iter: int = 20_000) -> Array:
    """Box-constrained least squares on a column subset, by projected gradient.

    An unconstrained stationary point inside the box is returned directly
    (it is the constrained optimum); otherwise its clip seeds the projected
    iteration.
    """
    s = A_S.shape[1]
    x = np.clip(np.zeros(s), lo, up)
    if s == 0:
        return x
    G = A_S.T @ A_S
    b = A_S.T @ y
    try:
        x_ls = np.linalg.solve(G, b)
    except np.linalg.LinAlgError:
        x_ls = None
    if (
        x_ls is not None
        and np.all(np.isfinite(x_ls))
        and float(np.max(np.abs(G @ x_ls - b))) <= 1e-9 * (1.0 + float(np.max(np.abs(b))))
    ):
        if np.all(x_ls >= lo) and np.all(x_ls <= up):
            return x_ls
        x = np.clip(x_ls, lo, up)
    L = float(np.linalg.norm(A_S, 2)) ** 2
    if L <= 0.0:
        return x
    step = 1.0 / L
    for _ in range(max_iter):
        x_new = np.clip(x - step * (G @ x - b), lo, up)
        delta = float(np.max(np.abs(x_new - x)))
        x = x_new
        if delta <= tol:
            break
    return x


def update_incumbent(
    x_hat: Array,
    node: NodePartition,
    bounds: BoxBounds,
    inst: ProblemInstance,
    incumbent: Incumbent,
    tau_supp: float = 1e-8,
    seen: Optional[set] = None,
) -> Incumbent:
    """Round the relaxed minimizer to a feasible candidate and keep it if it wins.

    The candidate support is supp(x_hat) thresholded at ``tau_supp``, forced
    to include the node's S1; the candidate solves box-constrained least
    squares on that support and is adopted only when its exact objective is
    strictly below the current p_bar.

    ``seen`` is an optional dedup set of supports already polished this run.
    Skipping repeats cannot lose the optimum: peeled boxes never cut a global
    minimizer, so the first polish of the optimal support already attains it.
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    support = tuple(sorted(set(np.flatnonzero(np.abs(x_hat) > tau_supp).tolist()) | node.s1))
    if seen is not None:
        if support in seen:
            return incumbent
        seen.add(support)
    x_cand = np.zeros(inst.n)
    if support:
        sup = np.array(support, dtype=np.int64)
        x_cand[sup] = _box_ls(inst.A[:, sup], inst.y, bounds.l[sup], bounds.u[sup])
    val = objective_P(x_cand, inst)
    if val < incumbent.p_bar:
        incumbent.x_best = x_cand
        incumbent.p_bar = val
    return incumbent


class _PeelCounter:
    __slots__ = ("fires",)

    def __init__(self) -> None:
        self.fires = 0


def _make_peel_hook(node, inst, incumbent, config, counter, node_id):
    partition = node.partition
    bounds = node.bounds

    if config.peel_trace is not None:
        # audit path: one PeelOutcome per sweep, rows recorded per fired peel
        def hook_traced(w: Array, corr: Array) -> int:
            dev = dual_objective(w, corr, partition, bounds, inst)
            out = peel_all(
                partition, w, corr, dev.value, incumbent.p_bar, bounds, inst.lam,
                eps_alpha=config.eps_alpha, trace=config.peel_trace, node_id=node_id,
            )
            if out.n_peeled:
                bounds.l[:] = out.bounds.l
                bounds.u[:] = out.bounds.u
                counter.fires += out.n_peeled
            return out.n_peeled

        return hook_traced

    # hot path: fused dual evaluation + in-place peel tests in the kernel
    s1 = partition.s1_array
    sbar = partition.sbar_array
    lam = inst.lam
    y = inst.y
    lam_s1 = lam * len(partition.s1)
    eps_alpha = config.eps_alpha

    def hook(w: Array, corr: Array) -> int:
        quad = float(w @ y) - 0.5 * float(w @ w)
        D = quad + lam_s1 - _kernels.dual_pivot_sums(bounds.l, bounds.u, s1, sbar, corr, lam)
        n_up, n_lo = _kernels.peel_pass(
            bounds.l, bounds.u, sbar, corr, lam, incumbent.p_bar - D, eps_alpha
        )
        fired = n_up + n_lo
        counter.fires += fired
        return fired

    return hook


def solve(
    inst: ProblemInstance, root_bounds: BoxBounds, config: Optional[BnbConfig] = None
) -> SolveReport:
    """Exact minimization of the penalized problem over the root box.

    The caller is responsible for a root box that contains every optimum
    (e.g. from :func:`peelbnb.instance.calibrate_bigM`); the incumbent is
    seeded with x = 0 and refined at every node.  Exploration is depth-first
    with the forced-nonzero child visited first.
    """
    if config is None:
        config = BnbConfig()
    if root_bounds.n != inst.n:
        raise ValueError("root bounds length does not match instance")
    t0 = time.perf_counter()
    n = inst.n

    incumbent = Incumbent(x_best=np.zeros(n), p_bar=objective_P(np.zeros(n), inst))
    counter = _PeelCounter()
    polished: set = set()
    audit: Optional[list[NodeEvent]] = [] if config.audit else None

    root = BnbNode(NodePartition.root(n), root_bounds.copy(), warm_start=None,
                   depth=0, node_id=0, parent_id=None)
    stack = [root]
    next_id = 1
    node_count = 0
    total_sweeps = 0
    status = "optimal"

    while stack:
        if config.max_nodes is not None and node_count >= config.max_nodes:
            status = "budget_exhausted"
            break
        if config.time_limit is not None and time.perf_counter() - t0 > config.time_limit:
            status = "budget_exhausted"
            break
        node = stack.pop()
        node_count += 1
        bounds_in = node.bounds.copy() if config.audit else None
        p_bar_before = incumbent.p_bar

        hook = None
        if config.peel:
            hook = _make_peel_hook(node, inst, incumbent, config, counter, node.node_id)
        res = solve_relaxation(
            node.partition, node.bounds, inst,
            tol=config.cd_tol, max_iter=config.max_cd_iter,
            warm_start=node.warm_start, peel_hook=hook,
        )
        total_sweeps += res.iterations
        dev = dual_objective(res.w, res.corr, node.partition, node.bounds, inst)
        lower_bound = max(res.value, dev.value) if res.converged else dev.value

        update_incumbent(res.x_hat, node.partition, node.bounds, inst, incumbent,
                         tau_supp=config.tau_supp, seen=polished)

        pruned = prune_test(lower_bound, incumbent.p_bar, config.eps_prune)
        is_leaf = node.partition.is_leaf
        action = "pruned" if pruned else ("leaf" if is_leaf else "branched")
        if audit is not None:
            audit.append(NodeEvent(
                node_id=node.node_id, parent_id=node.parent_id, depth=node.depth,
                s0=tuple(sorted(node.partition.s0)), s1=tuple(sorted(node.partition.s1)),
                bounds_in=bounds_in, bounds_final=node.bounds.copy(),
                relax_value=res.value, dual_value=dev.value, lower_bound=lower_bound,
                p_bar_before=p_bar_before, p_bar_after=incumbent.p_bar, action=action,
            ))
        if pruned or is_leaf:
            continue
        child_zero, child_one = branch(node, res.x_hat, rule=config.branch_rule)
        child_zero.node_id = next_id
        child_one.node_id = next_id + 1
        next_id += 2
        stack.append(child_zero)
        stack.append(child_one)  # popped first: explore the forced-nonzero child

    return SolveReport(
        x_star=incumbent.x_best,
        p_star=incumbent.p_bar,
        node_count=node_count,
        peel_fire_count=counter.fires,
        total_sweeps=total_sweeps,
        wall_time_s=time.perf_counter() - t0,
        status=status,
        optimal=status == "optimal",
        audit=audit,
    )


def make_calibration_solver(config: Optional[BnbConfig] = None):
    """Solver handle for :func:`peelbnb.instance.calibrate_bigM` backed by :func:`solve`."""
    def _solve(inst: ProblemInstance, bounds: BoxBounds) -> Array:
        return solve(inst, bounds, config).x_star

    return _solve


def report_csv_header() -> str:
    return "instance_id,flags,p_star,node_count,peel_fire_count,wall_time_ms,status"


def report_csv_row(report: SolveReport, instance_id: str, flags: str) -> str:
    return ",".join([
        instance_id,
        flags,
        repr(float(report.p_star)),
        str(report.node_count),
        str(report.peel_fire_count),
        f"{report.wall_time_s * 1e3:.3f}",
        report.status,
    ])
