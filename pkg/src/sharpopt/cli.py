"""Command-line entry points.

    sharpopt run [config.toml] [--preset NAME] [--out DIR] [--seeds 1,2,3]
    sharpopt bounds config.toml [--out DIR]
    sharpopt gradcheck {quadratic,rosenbrock,logistic,mlp,all}
    sharpopt report RUN_DIR [--out DIR]

Exit codes: 0 success, 1 configuration error, 2 at least one run diverged,
3 a verification check raised a flag (bound violation or failed gradient
audit).
"""

from __future__ import annotations

import argparse
import sys
from collections import defaultdict
from pathlib import Path

from .core import ConfigurationError, ContractViolationError
from .harness import (
    AUDIT_PROBLEMS,
    audit_gradients,
    compute_metrics,
    emit_report,
    load_bounds_config,
    load_config,
    load_grid_logs,
    run_bound_grid,
    run_experiment,
)
from .presets import list_presets

GRADCHECK_TOL = 1e-5

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_FLAGGED = 3


def _parse_seeds(text):
    return [int(s) for s in text.split(",") if s.strip() != ""]


def _summarize(logs, out_dir):
    by_cell = defaultdict(list)
    for log in logs:
        by_cell[(log.optimizer, log.problem)].append(log)
    summaries = []
    for key in by_cell:
        group = by_cell[key]
        if any(lg.diverged for lg in group):
            continue
        if any(m.test_top1 is None for lg in group for m in lg.epoch_metrics):
            continue
        if len(group[0].epoch_metrics) < 10:
            continue
        summaries.append(compute_metrics(group))
    emit_report(summaries, [], out_dir)
    return summaries


def cmd_run(args) -> int:
    cfg = load_config(
        path=args.config,
        preset=args.preset,
        seeds=_parse_seeds(args.seeds) if args.seeds else None,
        output_dir=args.out,
    )
    if cfg.output_dir is None:
        cfg.output_dir = "runs"
    logs = run_experiment(cfg)
    summaries = _summarize(logs, cfg.output_dir)
    diverged = [log for log in logs if log.diverged]
    for log in diverged:
        print(
            f"DIVERGED {log.optimizer} seed {log.seed} at step {log.divergence_step}",
            file=sys.stderr,
        )
    print(f"{len(logs)} runs -> {cfg.output_dir}")
    for s in summaries:
        print(
            f"{s.optimizer:>8s}  top1 best {100 * s.top1_max:.3f}"
            f" ({100 * s.top1_mean:.3f} +- {100 * s.top1_std:.3f})"
            f"  gap {100 * s.gen_error:.3f}"
        )
    return EXIT_DIVERGED if diverged else EXIT_OK


def cmd_bounds(args) -> int:
    grid = load_bounds_config(args.config)
    report = run_bound_grid(grid)
    out = Path(args.out or "runs/bounds")
    out.mkdir(parents=True, exist_ok=True)
    from .analysis import write_bound_report

    write_bound_report(report, out / "bounds.json")
    for c in report.cells:
        print(
            f"K={c.steps:>6d}  empirical {c.empirical:.6g} <= bound {c.bound:.6g}"
            f"  perturbed {c.empirical_perturbed:.6g} <= {c.bound_perturbed:.6g}"
            f"  {'pass' if c.passed else 'FAIL'}"
        )
        if c.seed_flags:
            print(f"          seeds above the raw bound: {c.seed_flags}")
    print(f"report -> {out / 'bounds.json'}")
    return EXIT_FLAGGED if report.flagged else EXIT_OK


def cmd_gradcheck(args) -> int:
    names = AUDIT_PROBLEMS if args.problem == "all" else (args.problem,)
    worst_fail = False
    for name in names:
        err = audit_gradients(name)
        ok = err < GRADCHECK_TOL
        worst_fail = worst_fail or not ok
        print(f"{name:>12s}  rel err {err:.3e}  {'PASS' if ok else 'FAIL'}")
    return EXIT_FLAGGED if worst_fail else EXIT_OK


def cmd_report(args) -> int:
    logs = load_grid_logs(args.run_dir)
    out = args.out or args.run_dir
    summaries = _summarize(logs, out)
    print(f"{len(logs)} runs, {len(summaries)} table rows -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    epilog = "presets:\n" + "\n".join(f"  {n:<24s} {d}" for n, d in list_presets())
    parser = argparse.ArgumentParser(
        prog="sharpopt",
        description=__doc__,
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an optimizer/problem grid")
    p.add_argument("config", nargs="?", default=None, help="TOML config file")
    p.add_argument("--preset", default=None, help="named preset to start from")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seeds", default=None, help="comma-separated seed override")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("bounds", help="check convergence bounds on a quadratic grid")
    p.add_argument("config", help="bounds TOML config")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(fn=cmd_bounds)

    p = sub.add_parser("gradcheck", help="audit analytic gradients by finite differences")
    p.add_argument("problem", choices=list(AUDIT_PROBLEMS) + ["all"])
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("report", help="rebuild reports from persisted runs")
    p.add_argument("run_dir")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigurationError, ContractViolationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
