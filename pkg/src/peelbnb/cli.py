"""Command-line harness: instance generation, single solves, oracles and sweeps.

The ``sweep`` subcommand reproduces the benchmark protocol at desk scale:
for each swept value and trial it generates one instance (seeded
deterministically from the base seed, the value and the trial index),
calibrates the Big-M box once, runs every solver variant on the same box,
and emits a per-run CSV plus a per-point aggregate CSV with the
peel/no-peel node-count ratio.
"""

from __future__ import annotations

import argparse
import csv
import math
import struct
import sys
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import bnb
from .instance import (
    BoxBounds,
    ExperimentConfig,
    GroundTruth,
    InstanceFormatError,
    ProblemInstance,
    calibrate_bigM,
    generate_dictionary,
    generate_ground_truth,
    generate_observation,
    lambda_max,
    load_instance,
    save_instance,
    with_snr,
)
from .oracle import brute_force_global
from .peel import PeelTrace

__all__ = [
    "SweepSpec",
    "SweepSafetyError",
    "SweepResult",
    "HARDNESS_REGIMES",
    "build_instance",
    "default_M0",
    "run_sweep",
    "main",
]

SWEEP_VARIABLES = ("gamma", "sigma", "rho", "k")
VARIANTS = ("peel", "nopeel")

# desk-scale analogues of the easy / medium / hard synthetic setups
HARDNESS_REGIMES = {
    "easy": dict(m=30, n=40, k=3, rho=0.1, snr_db=15.0),
    "medium": dict(m=30, n=40, k=4, rho=0.1, snr_db=15.0),
    "hard": dict(m=30, n=40, k=4, rho=0.6, snr_db=15.0),
}


class SweepSafetyError(RuntimeError):
    """Two variants of the same trial disagreed on the optimum."""


@dataclass(frozen=True)
class SweepSpec:
    """A sweep: base config, the variable to vary, its values, trials, variants."""

    base: ExperimentConfig
    variable: str
    values: tuple
    trials: int
    variants: tuple[str, ...] = VARIANTS

    def __post_init__(self) -> None:
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(
                f"unknown sweep variable {self.variable!r}; expected one of {SWEEP_VARIABLES}"
            )
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        object.__setattr__(self, "values", tuple(self.values))
        for v in self.variants:
            if v not in VARIANTS:
                raise ValueError(f"unknown variant {v!r}; expected subset of {VARIANTS}")


@dataclass(frozen=True)
class SweepResult:
    rows: list[dict]
    aggregates: list[dict]
    rows_path: Optional[str]
    agg_path: Optional[str]


def _stable_u64(value) -> int:
    """Platform-independent 64-bit entropy word for a sweep value."""
    if isinstance(value, (int, np.integer)):
        return int(value) & (2**64 - 1)
    return struct.unpack("<Q", struct.pack("<d", float(value)))[0]


def trial_rng(seed: int, value, trial: int) -> np.random.Generator:
    """Deterministic per-(seed, value, trial) generator."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), _stable_u64(value), int(trial)]))


def build_instance(
    cfg: ExperimentConfig, rng: np.random.Generator
) -> tuple[ProblemInstance, GroundTruth]:
    """Generate one synthetic instance from a config and a generator."""
    A = generate_dictionary(cfg.m, cfg.n, cfg.rho, rng)
    truth = generate_ground_truth(cfg.n, cfg.k, cfg.sigma, rng)
    y = generate_observation(A, truth.x_dagger, cfg.snr_db, rng)
    truth = with_snr(truth, cfg.snr_db)
    if cfg.lam is not None:
        lam = cfg.lam
    else:
        lam = cfg.lam_factor * lambda_max(y, A)
        if lam <= 0.0:
            raise ValueError("degenerate instance: lambda_max is zero")
    return ProblemInstance(y, A, lam), truth


def default_M0(inst: ProblemInstance) -> float:
    """Data-driven starting box half-width: twice the largest single-column fit."""
    s = inst.col_sq
    c = np.abs(inst.A.T @ inst.y)
    ok = s > 0
    if not np.any(ok):
        return 1.0
    return max(2.0 * float(np.max(c[ok] / s[ok])), 1e-6)


def _bnb_config(cfg: ExperimentConfig, peel: bool) -> bnb.BnbConfig:
    return bnb.BnbConfig(
        peel=peel,
        cd_tol=cfg.cd_tol,
        eps_prune=cfg.eps_prune,
        eps_alpha=cfg.eps_alpha,
        max_nodes=cfg.max_nodes,
        time_limit=cfg.time_limit,
    )


def _solve_variant(
    inst: ProblemInstance, M: float, variant: str, cfg: ExperimentConfig
) -> bnb.SolveReport:
    bounds = BoxBounds.symmetric(M, inst.n)
    return bnb.solve(inst, bounds, _bnb_config(cfg, peel=variant == "peel"))


def _fmt_value(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def run_sweep(spec: SweepSpec, out_path: Optional[str], include_timing: bool = False) -> SweepResult:
    """Run the sweep and (optionally) write the data and aggregate CSV files.

    Timing columns are opt-in because wall-clock noise would break the
    byte-for-byte determinism of repeated runs with the same seed.
    """
    rows: list[dict] = []
    aggregates: list[dict] = []
    for value in spec.values:
        per_variant_nodes = {v: [] for v in spec.variants}
        per_variant_time = {v: [] for v in spec.variants}
        for trial in range(spec.trials):
            cfg = replace(spec.base, **{spec.variable: value})
            rng = trial_rng(spec.base.seed, value, trial)
            inst, _ = build_instance(cfg, rng)
            M, _ = calibrate_bigM(
                inst, cfg.gamma, eta=1.1, M0=default_M0(inst),
                solver=bnb.make_calibration_solver(_bnb_config(cfg, peel=True)),
            )
            reports = {}
            for variant in spec.variants:
                rep = _solve_variant(inst, M, variant, cfg)
                reports[variant] = rep
                row = {
                    "variable": spec.variable,
                    "value": _fmt_value(value),
                    "trial": trial,
                    "variant": variant,
                    "p_star": repr(float(rep.p_star)),
                    "node_count": rep.node_count,
                    "peel_fire_count": rep.peel_fire_count,
                    "total_sweeps": rep.total_sweeps,
                    "status": rep.status,
                }
                if include_timing:
                    row["wall_time_ms"] = f"{rep.wall_time_s * 1e3:.3f}"
                rows.append(row)
                per_variant_nodes[variant].append(rep.node_count)
                per_variant_time[variant].append(rep.wall_time_s * 1e3)
            if all(rep.optimal for rep in reports.values()):
                vals = [rep.p_star for rep in reports.values()]
                if max(vals) - min(vals) > 1e-8:
                    raise SweepSafetyError(
                        f"variants disagree at {spec.variable}={value}, trial {trial}: "
                        f"p_star spread {max(vals) - min(vals):g}; reproduce with seed entropy "
                        f"({spec.base.seed}, {value}, {trial})"
                    )
        agg = {
            "variable": spec.variable,
            "value": _fmt_value(value),
            "trials": spec.trials,
        }
        for variant in spec.variants:
            agg[f"mean_nodes_{variant}"] = repr(float(np.mean(per_variant_nodes[variant])))
        if "peel" in spec.variants and "nopeel" in spec.variants:
            mp = float(np.mean(per_variant_nodes["peel"]))
            mn = float(np.mean(per_variant_nodes["nopeel"]))
            agg["node_ratio_nopeel_over_peel"] = repr(mn / mp if mp > 0 else math.nan)
        if include_timing:
            for variant in spec.variants:
                agg[f"mean_time_ms_{variant}"] = f"{np.mean(per_variant_time[variant]):.3f}"
            if "peel" in spec.variants and "nopeel" in spec.variants:
                tp = float(np.mean(per_variant_time["peel"]))
                tn = float(np.mean(per_variant_time["nopeel"]))
                agg["time_ratio_nopeel_over_peel"] = f"{tn / tp if tp > 0 else math.nan:.4f}"
        aggregates.append(agg)

    rows_path = agg_path = None
    if out_path is not None:
        rows_path = str(out_path)
        agg_path = _agg_path(rows_path)
        _write_csv(rows_path, rows)
        _write_csv(agg_path, aggregates)
    return SweepResult(rows=rows, aggregates=aggregates, rows_path=rows_path, agg_path=agg_path)


def _agg_path(rows_path: str) -> str:
    if rows_path.endswith(".csv"):
        return rows_path[: -len(".csv")] + "_agg.csv"
    return rows_path + "_agg"


def _write_csv(path: str, rows: list[dict]) -> None:
    if not rows:
        with open(path, "w", newline="") as fh:
            fh.write("")
        return
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        wr.writeheader()
        wr.writerows(rows)


def _add_generation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=int, default=30)
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--rho", type=float, default=0.1)
    p.add_argument("--snr", type=float, default=15.0, help="target SNR in dB (inf = noiseless)")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="absolute penalty weight (overrides --lam-factor)")
    p.add_argument("--lam-factor", type=float, default=0.3,
                   help="penalty weight as a fraction of the single-coordinate threshold")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--peel", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--tol", type=float, default=1e-8, help="coordinate-descent tolerance")
    p.add_argument("--max-nodes", type=int, default=None)
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--gamma", type=float, default=3.0, help="Big-M slack factor")


def _config_from_args(args) -> ExperimentConfig:
    return ExperimentConfig(
        m=args.m, n=args.n, k=args.k, rho=args.rho, snr_db=args.snr, sigma=args.sigma,
        gamma=getattr(args, "gamma", 3.0), seed=args.seed, lam=args.lam,
        lam_factor=args.lam_factor, peel=getattr(args, "peel", True),
        cd_tol=getattr(args, "tol", 1e-8), max_nodes=getattr(args, "max_nodes", None),
        time_limit=getattr(args, "time_limit", None),
    )


def _cmd_generate(args) -> int:
    cfg = _config_from_args(args)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    inst, truth = build_instance(cfg, rng)
    save_instance(args.out, inst, truth)
    print(f"wrote {args.out}: m={inst.m} n={inst.n} lambda={inst.lam:.6g} "
          f"support={list(truth.support)}")
    return 0


def _root_bounds(inst: ProblemInstance, args) -> BoxBounds:
    if args.bigm is not None:
        return BoxBounds.symmetric(args.bigm, inst.n)
    cfg_solver = bnb.BnbConfig(peel=args.peel, cd_tol=args.tol)
    M, _ = calibrate_bigM(inst, args.gamma, eta=1.1, M0=default_M0(inst),
                          solver=bnb.make_calibration_solver(cfg_solver))
    return BoxBounds.symmetric(M, inst.n)


def _cmd_solve(args) -> int:
    inst, _ = load_instance(args.instance)
    if args.lam is not None:
        inst = ProblemInstance(inst.y, inst.A, args.lam)
    trace = PeelTrace() if args.peel_trace else None
    bounds = _root_bounds(inst, args)
    config = bnb.BnbConfig(
        peel=args.peel, cd_tol=args.tol, max_nodes=args.max_nodes,
        time_limit=args.time_limit, peel_trace=trace,
    )
    report = bnb.solve(inst, bounds, config)
    support = list(np.flatnonzero(report.x_star))
    print(f"p_star={report.p_star!r}")
    print(f"support={support}")
    print(f"nodes={report.node_count} peel_fires={report.peel_fire_count} "
          f"sweeps={report.total_sweeps} time_ms={report.wall_time_s * 1e3:.3f} "
          f"status={report.status}")
    if trace is not None:
        trace.write(args.peel_trace)
        print(f"peel trace: {args.peel_trace} ({len(trace.rows)} rows)")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(bnb.report_csv_header() + "\n")
            flags = f"peel={'on' if args.peel else 'off'};gamma={args.gamma}"
            fh.write(bnb.report_csv_row(report, args.instance, flags) + "\n")
        print(f"report row: {args.out}")
    return 0 if report.optimal else 3


def _cmd_oracle(args) -> int:
    inst, _ = load_instance(args.instance)
    if args.lam is not None:
        inst = ProblemInstance(inst.y, inst.A, args.lam)
    res = brute_force_global(inst, max_support=args.max_support)
    print(f"value={res.value!r}")
    print(f"support={list(res.support)}")
    print(f"supports_enumerated={res.enumerated_count}")
    return 0


def _cmd_sweep(args) -> int:
    base_kwargs = {}
    if args.regime is not None:
        base_kwargs.update(HARDNESS_REGIMES[args.regime])
    cfg = _config_from_args(args)
    for key, val in base_kwargs.items():
        cfg = replace(cfg, **{key: val})
    if args.var == "k":
        values = tuple(int(v) for v in args.values.split(","))
    else:
        values = tuple(float(v) for v in args.values.split(","))
    spec = SweepSpec(
        base=cfg, variable=args.var, values=values, trials=args.trials,
        variants=tuple(args.variants.split(",")),
    )
    try:
        result = run_sweep(spec, args.out, include_timing=args.timing)
    except SweepSafetyError as exc:
        print(f"SAFETY VIOLATION: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {result.rows_path} ({len(result.rows)} rows) and {result.agg_path}")
    for agg in result.aggregates:
        ratio = agg.get("node_ratio_nopeel_over_peel", "n/a")
        print(f"  {spec.variable}={agg['value']}: node ratio nopeel/peel = {ratio}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peelbnb",
        description="Exact l0-penalized least squares by branch-and-bound with safe peeling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write a synthetic instance file")
    _add_generation_flags(p_gen)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_generate)

    p_solve = sub.add_parser("solve", help="solve an instance file exactly")
    p_solve.add_argument("instance")
    p_solve.add_argument("--lambda", dest="lam", type=float, default=None)
    _add_solver_flags(p_solve)
    p_solve.add_argument("--bigm", type=float, default=None,
                         help="explicit box half-width (skips calibration)")
    p_solve.add_argument("--out", default=None, help="write a one-row report CSV")
    p_solve.add_argument("--peel-trace", default=None, help="write fired peels to CSV")
    p_solve.set_defaults(func=_cmd_solve)

    p_oracle = sub.add_parser("oracle", help="brute-force optimum of an instance file")
    p_oracle.add_argument("instance")
    p_oracle.add_argument("--lambda", dest="lam", type=float, default=None)
    p_oracle.add_argument("--max-support", type=int, default=None)
    p_oracle.set_defaults(func=_cmd_oracle)

    p_sweep = sub.add_parser("sweep", help="run a benchmark sweep and emit CSVs")
    _add_generation_flags(p_sweep)
    _add_solver_flags(p_sweep)
    p_sweep.add_argument("--var", required=True, choices=SWEEP_VARIABLES)
    p_sweep.add_argument("--values", required=True, help="comma-separated sweep values")
    p_sweep.add_argument("--trials", type=int, default=20)
    p_sweep.add_argument("--variants", default="peel,nopeel")
    p_sweep.add_argument("--regime", choices=tuple(HARDNESS_REGIMES), default=None,
                         help="preset desk-scale hardness regime for the base config")
    p_sweep.add_argument("--timing", action="store_true",
                         help="include wall-clock columns (breaks byte determinism)")
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InstanceFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
