"""Seeded experiment harness: configs, runs, metrics, reports.

A config describes one problem, one schedule, and any number of optimizer
cells; the harness runs every (cell, seed) pair with its own PCG64 stream
and writes logs that reproduce byte for byte under the same inputs. Reports
aggregate per-seed metrics the way comparison tables expect: best value over
seeds with mean and standard deviation alongside.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .analysis import (
    BoundCell,
    BoundInputs,
    BoundReport,
    RateFit,
    convergence_bound,
    empirical_avg_sq_grad,
    fit_rate,
    gradient_audit,
    perturbed_convergence_bound,
)
from .core import (
    ConfigurationError,
    ContractViolationError,
    DivergenceDetected,
    make_rng,
)
from .optim import SamarConfig, SamarDriver, make_driver
from .problems import (
    GeneratorSpec,
    LogisticProblem,
    MlpProblem,
    diagonal_quadratic,
    generate_dataset,
    logistic_oracle,
    mlp_oracle,
    quadratic_oracle,
    rosenbrock_grad,
    rosenbrock_loss,
    rosenbrock_oracle,
)
from .runlog import EpochMetrics, RunLog, load_runlog, write_runlog
from .schedule import ScheduleSpec, learning_rate

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib


@dataclass
class ExperimentConfig:
    problem: dict
    optimizers: Dict[str, dict]
    schedule: dict
    epochs: int
    batch_size: int
    seeds: List[int]
    weight_decay: float = 0.0
    record_full_gradient: bool = False
    output_dir: Optional[str] = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if not self.seeds:
            raise ConfigurationError("at least one seed required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError("duplicate seeds")
        if not self.optimizers:
            raise ConfigurationError("at least one optimizer cell required")
        if self.weight_decay < 0.0:
            raise ConfigurationError("weight_decay must be >= 0")


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = copy.deepcopy(raw)
    raw.pop("preset", None)
    known = {"problem", "optimizers", "schedule", "run"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    for section in known:
        if section not in raw:
            raise ConfigurationError(f"missing config section [{section}]")
    run = dict(raw["run"])
    try:
        cfg = ExperimentConfig(
            problem=dict(raw["problem"]),
            optimizers={k: dict(v) for k, v in raw["optimizers"].items()},
            schedule=dict(raw["schedule"]),
            epochs=int(run.pop("epochs")),
            batch_size=int(run.pop("batch_size")),
            seeds=[int(s) for s in run.pop("seeds")],
            weight_decay=float(run.pop("weight_decay", 0.0)),
            record_full_gradient=bool(run.pop("record_full_gradient", False)),
            output_dir=run.pop("output_dir", None),
        )
    except KeyError as exc:
        raise ConfigurationError(f"missing [run] key {exc}") from None
    if run:
        raise ConfigurationError(f"unknown [run] keys: {sorted(run)}")
    return cfg


def load_config(
    path=None,
    preset: Optional[str] = None,
    seeds: Optional[Sequence[int]] = None,
    output_dir: Optional[str] = None,
) -> ExperimentConfig:
    """Resolve a config from a preset name, a TOML file, or both.

    The file is merged over the preset, so a small file can override one or
    two keys of a named setup. A `preset` key inside the file works the same
    way as the argument.
    """
    from .presets import resolve_preset

    raw: dict = {}
    if path is not None:
        text = Path(path).read_text()
        raw = tomllib.loads(text)
    file_preset = raw.get("preset")
    name = preset or file_preset
    if name is not None:
        base = resolve_preset(name)
        raw = _deep_merge(base, raw)
    if not raw:
        raise ConfigurationError("no config file and no preset given")
    cfg = config_from_dict(raw)
    if seeds is not None:
        cfg.seeds = [int(s) for s in seeds]
        if not cfg.seeds or len(set(cfg.seeds)) != len(cfg.seeds):
            raise ConfigurationError("bad seeds override")
    if output_dir is not None:
        cfg.output_dir = output_dir
    return cfg


# ---------------------------------------------------------------------------
# problem bundles
# ---------------------------------------------------------------------------


@dataclass
class ProblemBundle:
    """Everything a run needs from a problem, behind closures."""

    name: str
    dimension: int
    make_oracle: "object"
    initial_point: "object"
    steps_per_epoch: int
    lipschitz: Optional[float] = None
    dataset: "object" = None
    eval_accuracy: "object" = None  # x -> (train_top1, test_top1, train_top5, test_top5)


def _pop(params: dict, key, default=None, required=False):
    if required and key not in params:
        raise ConfigurationError(f"problem config missing {key!r}")
    return params.pop(key) if key in params else default


def build_problem(problem_cfg: dict, batch_size: int) -> ProblemBundle:
    params = dict(problem_cfg)
    kind = _pop(params, "kind", required=True)

    if kind == "quadratic":
        dim = int(_pop(params, "dim", 20))
        eig_min = float(_pop(params, "eig_min", 0.5))
        eig_max = float(_pop(params, "eig_max", 4.0))
        noise_sigma = float(_pop(params, "noise_sigma", 0.0))
        x0_scale = float(_pop(params, "x0_scale", 1.0))
        steps = int(_pop(params, "steps_per_epoch", dim))
        if params:
            raise ConfigurationError(f"unknown quadratic params: {sorted(params)}")
        prob = diagonal_quadratic(dim, eig_min, eig_max, noise_sigma)
        x0 = x0_scale * np.ones(dim)
        return ProblemBundle(
            name="quadratic",
            dimension=dim,
            make_oracle=lambda rng: quadratic_oracle(prob, rng),
            initial_point=lambda rng: x0.copy(),
            steps_per_epoch=steps,
            lipschitz=prob.lipschitz,
        )

    if kind == "rosenbrock":
        dim = int(_pop(params, "dim", 10))
        x0_scale = float(_pop(params, "x0_scale", 0.0))
        steps = int(_pop(params, "steps_per_epoch", dim))
        if params:
            raise ConfigurationError(f"unknown rosenbrock params: {sorted(params)}")
        x0 = x0_scale * np.ones(dim)
        return ProblemBundle(
            name="rosenbrock",
            dimension=dim,
            make_oracle=lambda rng: rosenbrock_oracle(dim, rng),
            initial_point=lambda rng: x0.copy(),
            steps_per_epoch=steps,
        )

    if kind == "logistic-blobs":
        data_seed = int(_pop(params, "data_seed", 7))
        l2_coeff = float(_pop(params, "l2_coeff", 1e-3))
        recipe = {
            k: params.pop(k)
            for k in list(params)
            if k in ("train_per_class", "test_per_class", "center_scale", "spread", "label_noise")
        }
        if params:
            raise ConfigurationError(f"unknown logistic-blobs params: {sorted(params)}")
        ds = generate_dataset(GeneratorSpec("gaussian-blobs", recipe), data_seed)
        prob = LogisticProblem(ds.train_x, ds.train_y, l2_coeff)

        def accuracy(x):
            tr = float(np.mean(prob.predict(x, ds.train_x) == ds.train_y))
            te = float(np.mean(prob.predict(x, ds.test_x) == ds.test_y))
            return tr, te, 1.0, 1.0  # top-5 over 2 classes is always a hit

        return ProblemBundle(
            name="logistic-blobs",
            dimension=prob.dim,
            make_oracle=lambda rng: logistic_oracle(prob, min(batch_size, prob.n), rng),
            initial_point=lambda rng: np.zeros(prob.dim),
            steps_per_epoch=int(np.ceil(prob.n / min(batch_size, prob.n))),
            lipschitz=prob.lipschitz,
            dataset=ds,
            eval_accuracy=accuracy,
        )

    if kind in ("mlp-spirals", "mlp-blobs"):
        data_seed = int(_pop(params, "data_seed", 7))
        hidden = _pop(params, "hidden", [32])
        if isinstance(hidden, int):
            hidden = [hidden]
        recipe_keys = (
            ("train_per_class", "test_per_class", "t_min", "t_max", "noise", "scale",
             "label_noise")
            if kind == "mlp-spirals"
            else ("train_per_class", "test_per_class", "classes", "center_scale", "spread",
                  "label_noise")
        )
        recipe = {k: params.pop(k) for k in list(params) if k in recipe_keys}
        if params:
            raise ConfigurationError(f"unknown {kind} params: {sorted(params)}")
        recipe_name = "two-spirals" if kind == "mlp-spirals" else "gaussian-blobs"
        ds = generate_dataset(GeneratorSpec(recipe_name, recipe), data_seed)
        sizes = [ds.d_in] + [int(h) for h in hidden] + [ds.n_classes]
        prob = MlpProblem(sizes, ds)

        def accuracy(x):
            return (
                prob.topk_accuracy(x, ds.train_x, ds.train_y, 1),
                prob.topk_accuracy(x, ds.test_x, ds.test_y, 1),
                prob.topk_accuracy(x, ds.train_x, ds.train_y, 5),
                prob.topk_accuracy(x, ds.test_x, ds.test_y, 5),
            )

        bs = min(batch_size, prob.n_train)
        return ProblemBundle(
            name=kind,
            dimension=prob.dim,
            make_oracle=lambda rng: mlp_oracle(prob, bs, rng),
            initial_point=prob.initial_params,
            steps_per_epoch=int(np.ceil(prob.n_train / bs)),
            dataset=ds,
            eval_accuracy=accuracy,
        )

    raise ConfigurationError(f"unknown problem kind {kind!r}")


def _schedule_for(cfg: ExperimentConfig, steps_per_epoch: int, lipschitz) -> ScheduleSpec:
    sched = dict(cfg.schedule)
    kind = sched.pop("kind", "constant")
    eta0 = float(sched.pop("eta0", None) or 0.0)
    if sched:
        raise ConfigurationError(f"unknown [schedule] keys: {sorted(sched)}")
    if eta0 <= 0.0:
        raise ConfigurationError("schedule needs eta0 > 0")
    total_steps = cfg.epochs * steps_per_epoch
    try:
        spec = ScheduleSpec(
            kind=kind,
            eta0=eta0,
            total_epochs=cfg.epochs,
            total_steps=total_steps,
            steps_per_epoch=steps_per_epoch,
        )
    except ContractViolationError as exc:
        raise ConfigurationError(str(exc)) from None
    if kind == "sqrt-horizon" and lipschitz is not None:
        eta = eta0 / float(np.sqrt(total_steps))
        limit = 2.0 / (5.0 * lipschitz)
        if eta > limit:
            raise ConfigurationError(
                f"sqrt-horizon step {eta:.6g} exceeds 2/(5L) = {limit:.6g}"
            )
    return spec


def cell_fingerprint(cfg: ExperimentConfig, opt_name: str, opt_opts: dict) -> str:
    payload = {
        "problem": cfg.problem,
        "optimizer": {opt_name: opt_opts},
        "schedule": cfg.schedule,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "weight_decay": cfg.weight_decay,
        "record_full_gradient": cfg.record_full_gradient,
    }
    blob = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run_experiment(cfg: ExperimentConfig) -> List[RunLog]:
    """Run every (optimizer cell, seed) pair; persist logs when output_dir set.

    A diverged run is kept in the returned list, truncated at the failing
    step and marked, and does not stop the rest of the grid.
    """
    bundle = build_problem(cfg.problem, cfg.batch_size)
    spec = _schedule_for(cfg, bundle.steps_per_epoch, bundle.lipschitz)
    out_root = Path(cfg.output_dir) if cfg.output_dir else None

    logs: List[RunLog] = []
    for opt_name, raw_opts in cfg.optimizers.items():
        opts = dict(raw_opts)
        algo = opts.pop("kind", opt_name)
        print_name = opt_name
        fingerprint = cell_fingerprint(cfg, opt_name, raw_opts)
        for seed in cfg.seeds:
            rng = make_rng(seed)
            x0 = bundle.initial_point(rng)
            oracle = bundle.make_oracle(rng)
            try:
                driver = make_driver(
                    algo, x0, opts,
                    weight_decay=cfg.weight_decay,
                    record_full_gradient=cfg.record_full_gradient,
                )
            except ContractViolationError as exc:
                raise ConfigurationError(f"optimizer cell {opt_name!r}: {exc}") from None
            log = RunLog(
                optimizer=print_name,
                problem=bundle.name,
                seed=seed,
                steps_per_epoch=bundle.steps_per_epoch,
                fingerprint=fingerprint,
            )
            try:
                for epoch in range(cfg.epochs):
                    epoch_losses = []
                    for j in range(bundle.steps_per_epoch):
                        eta = learning_rate(spec, epoch, j)
                        rec = driver.step(oracle, eta, rng)
                        log.records.append(rec)
                        epoch_losses.append(rec.loss)
                    metrics = EpochMetrics(epoch=epoch, loss=float(np.mean(epoch_losses)))
                    if bundle.eval_accuracy is not None:
                        tr1, te1, tr5, te5 = bundle.eval_accuracy(driver.x)
                        metrics.train_top1, metrics.test_top1 = tr1, te1
                        metrics.train_top5, metrics.test_top5 = tr5, te5
                    log.epoch_metrics.append(metrics)
            except DivergenceDetected:
                log.diverged = True
                log.divergence_step = len(log.records)
            logs.append(log)
            if out_root is not None:
                write_runlog(log, out_root / print_name / f"seed{seed}")
    return logs


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

TABLE_HEADER = (
    "optimizer,problem,top1_max,top1_mean,top1_std,top5_max,last10_test,last10_train,gen_error"
)
CURVES_HEADER = "optimizer,problem,seed,epoch,train_top1,test_top1"
LAST_WINDOW = 10


@dataclass
class MetricsSummary:
    """Seed-aggregated accuracy metrics for one optimizer on one problem.

    Accuracies are fractions in [0, 1]. The headline aggregation is the best
    value over seeds; mean and std (population) over seeds sit beside it.
    gen_error is the seed-mean last-window train accuracy minus the seed-mean
    last-window test accuracy, computed as exactly that difference.
    """

    optimizer: str
    problem: str
    seeds: List[int]
    n_epochs: int
    top1_max: float
    top1_mean: float
    top1_std: float
    top5_max: float
    top5_mean: float
    top5_std: float
    last10_test_mean: float
    last10_train_mean: float
    gen_error: float
    per_seed: dict = field(default_factory=dict)


def compute_metrics(logs: Sequence[RunLog], dataset=None,
                    window: int = LAST_WINDOW) -> MetricsSummary:
    """Aggregate one cell's seed runs, needing at least `window` epochs."""
    if not logs:
        raise ContractViolationError("no logs given")
    if window < 1:
        raise ContractViolationError("window must be positive")
    names = {(log.optimizer, log.problem, log.fingerprint) for log in logs}
    if len(names) != 1:
        raise ContractViolationError("logs mix optimizers, problems, or configs")
    n_epochs = {len(log.epoch_metrics) for log in logs}
    if len(n_epochs) != 1:
        raise ContractViolationError("logs disagree on epoch count")
    n_ep = n_epochs.pop()
    if n_ep < window:
        raise ContractViolationError(f"need >= {window} epochs, got {n_ep}")
    for log in logs:
        if any(m.test_top1 is None for m in log.epoch_metrics):
            raise ContractViolationError("accuracy series missing from a log")

    seeds, t1max, t5max, l10te, l10tr, gaps = [], [], [], [], [], []
    train_curves, test_curves = [], []
    for log in sorted(logs, key=lambda lg: lg.seed):
        seeds.append(log.seed)
        te1 = np.array([m.test_top1 for m in log.epoch_metrics])
        tr1 = np.array([m.train_top1 for m in log.epoch_metrics])
        te5 = np.array([m.test_top5 for m in log.epoch_metrics])
        t1max.append(float(te1.max()))
        t5max.append(float(te5.max()))
        lte = float(np.mean(te1[-window:]))
        ltr = float(np.mean(tr1[-window:]))
        l10te.append(lte)
        l10tr.append(ltr)
        gaps.append(ltr - lte)
        train_curves.append([float(v) for v in tr1])
        test_curves.append([float(v) for v in te1])

    last10_test_mean = float(np.mean(l10te))
    last10_train_mean = float(np.mean(l10tr))
    return MetricsSummary(
        optimizer=logs[0].optimizer,
        problem=logs[0].problem,
        seeds=seeds,
        n_epochs=n_ep,
        top1_max=float(np.max(t1max)),
        top1_mean=float(np.mean(t1max)),
        top1_std=float(np.std(t1max)),
        top5_max=float(np.max(t5max)),
        top5_mean=float(np.mean(t5max)),
        top5_std=float(np.std(t5max)),
        last10_test_mean=last10_test_mean,
        last10_train_mean=last10_train_mean,
        gen_error=last10_train_mean - last10_test_mean,
        per_seed={
            "seeds": seeds,
            "top1_max": t1max,
            "top5_max": t5max,
            "last10_test": l10te,
            "last10_train": l10tr,
            "gen_error": gaps,
            "train_curve": train_curves,
            "test_curve": test_curves,
        },
    )


def emit_report(
    summaries: Sequence[MetricsSummary],
    bound_reports: Sequence[BoundReport],
    out_dir,
) -> None:
    """Write comparison.csv, curves.csv, bounds.json, and summary.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = [TABLE_HEADER]
    for s in summaries:
        rows.append(
            ",".join(
                [
                    s.optimizer,
                    s.problem,
                    repr(s.top1_max),
                    repr(s.top1_mean),
                    repr(s.top1_std),
                    repr(s.top5_max),
                    repr(s.last10_test_mean),
                    repr(s.last10_train_mean),
                    repr(s.gen_error),
                ]
            )
        )
    (out / "comparison.csv").write_text("\n".join(rows) + "\n")

    rows = [CURVES_HEADER]
    for s in summaries:
        for seed, tr, te in zip(
            s.per_seed["seeds"], s.per_seed["train_curve"], s.per_seed["test_curve"]
        ):
            for epoch, (a, b) in enumerate(zip(tr, te)):
                rows.append(f"{s.optimizer},{s.problem},{seed},{epoch},{a!r},{b!r}")
    (out / "curves.csv").write_text("\n".join(rows) + "\n")

    if bound_reports:
        from .analysis import write_bound_report

        for i, rep in enumerate(bound_reports):
            name = "bounds.json" if len(bound_reports) == 1 else f"bounds{i}.json"
            write_bound_report(rep, out / name)

    lines = ["run summary", "==========="]
    for s in summaries:
        lines.append(
            f"{s.optimizer} on {s.problem} ({len(s.seeds)} seeds, {s.n_epochs} epochs)"
        )
        lines.append(
            f"  top1 best {100 * s.top1_max:.3f} ({100 * s.top1_mean:.3f} +- {100 * s.top1_std:.3f})"
        )
        lines.append(
            f"  top5 best {100 * s.top5_max:.3f} ({100 * s.top5_mean:.3f} +- {100 * s.top5_std:.3f})"
        )
        lines.append(
            f"  last{LAST_WINDOW} train {100 * s.last10_train_mean:.3f}"
            f" test {100 * s.last10_test_mean:.3f}"
            f" gap {100 * s.gen_error:.3f}"
        )
    if not summaries and not bound_reports:
        lines.append("no accuracy metrics to tabulate; see per-run steps.csv logs")
    for rep in bound_reports:
        status = "ok" if not rep.flagged else "FLAGGED"
        lines.append(f"bound check on {rep.problem}: {status}")
        for c in rep.cells:
            lines.append(
                f"  K={c.steps}: empirical {c.empirical:.6g} vs bound {c.bound:.6g},"
                f" perturbed {c.empirical_perturbed:.6g} vs {c.bound_perturbed:.6g}"
                f" ({'pass' if c.passed else 'FAIL'})"
            )
    (out / "summary.txt").write_text("\n".join(lines) + "\n")


def load_grid_logs(out_dir) -> List[RunLog]:
    """Read back every run under an output directory tree."""
    out = Path(out_dir)
    logs = []
    for meta in sorted(out.glob("*/seed*/meta.json")):
        logs.append(load_runlog(meta.parent))
    if not logs:
        raise ConfigurationError(f"no runs found under {out}")
    return logs


# ---------------------------------------------------------------------------
# bound grid
# ---------------------------------------------------------------------------


@dataclass
class BoundGridSpec:
    """Noisy-quadratic grid for checking the convergence guarantee end to end."""

    dim: int = 20
    eig_min: float = 2.0
    eig_max: float = 4.0
    noise_sigma: float = 0.05
    x0_scale: float = 1.0
    eta0: float = 0.5
    rho0: float = 0.5
    ks: Sequence[int] = (100, 400, 1600)
    seeds: Sequence[int] = tuple(range(1, 11))
    lambda0: float = 1.0
    chi: float = 1.05
    gamma: float = 1.5
    delta: float = 0.01
    slack: float = 0.10


def _bound_cell_logs(grid: BoundGridSpec, k: int) -> List[RunLog]:
    prob = diagonal_quadratic(grid.dim, grid.eig_min, grid.eig_max, grid.noise_sigma)
    x0 = grid.x0_scale * np.ones(grid.dim)
    eta = grid.eta0 / float(np.sqrt(k))
    rho = grid.rho0 / float(np.sqrt(k))
    cfg = SamarConfig(
        rho=rho, lambda0=grid.lambda0, chi=grid.chi, gamma=grid.gamma, delta=grid.delta
    )
    fingerprint = f"bound-grid-{grid.dim}-{k}-{grid.eta0}-{grid.rho0}"
    logs = []
    for seed in grid.seeds:
        rng = make_rng(seed)
        oracle = quadratic_oracle(prob, rng)
        driver = SamarDriver(x0, cfg, record_full_gradient=True)
        log = RunLog(
            optimizer="samar",
            problem="quadratic",
            seed=seed,
            steps_per_epoch=k,
            fingerprint=fingerprint,
        )
        for _ in range(k):
            log.records.append(driver.step(oracle, eta, rng))
        logs.append(log)
    return logs


def bound_inputs_for(grid: BoundGridSpec, k: int) -> BoundInputs:
    prob = diagonal_quadratic(grid.dim, grid.eig_min, grid.eig_max, grid.noise_sigma)
    x0 = grid.x0_scale * np.ones(grid.dim)
    return BoundInputs(
        lipschitz=prob.lipschitz,
        sigma=prob.sigma_total,
        rho0=grid.rho0,
        eta0=grid.eta0,
        f0=prob.loss(x0),
        f_inf=prob.f_inf,
        steps=k,
    )


def run_bound_grid(grid: BoundGridSpec) -> BoundReport:
    """Run the grid and compare seed-averaged gradient norms to the bounds."""
    report = BoundReport(
        problem=f"quadratic(d={grid.dim}, L={grid.eig_max}, sigma_c={grid.noise_sigma})",
        eta0=grid.eta0,
        rho0=grid.rho0,
        slack=grid.slack,
        seeds=list(grid.seeds),
    )
    for k in grid.ks:
        inp = bound_inputs_for(grid, k)
        b1 = convergence_bound(inp)
        b2 = perturbed_convergence_bound(inp)
        logs = _bound_cell_logs(grid, k)
        per_seed = [empirical_avg_sq_grad([lg]) for lg in logs]
        per_seed_p = [empirical_avg_sq_grad([lg], perturbed=True) for lg in logs]
        emp = float(np.mean(per_seed))
        emp_p = float(np.mean(per_seed_p))
        cell = BoundCell(
            steps=k,
            nu=float(inp.nu),
            bound=b1,
            bound_perturbed=b2,
            empirical=emp,
            empirical_perturbed=emp_p,
            per_seed=per_seed,
            per_seed_perturbed=per_seed_p,
            passed=(emp <= b1 * (1.0 + grid.slack) and emp_p <= b2 * (1.0 + grid.slack)),
            seed_flags=[
                s for s, v, vp in zip(grid.seeds, per_seed, per_seed_p)
                if v > b1 or vp > b2
            ],
        )
        report.cells.append(cell)
    return report


def rate_recovery(grid: BoundGridSpec) -> "tuple[List[float], RateFit]":
    """Empirical averaged squared gradient norm per K and its log-log slope."""
    values = []
    for k in grid.ks:
        logs = _bound_cell_logs(grid, k)
        values.append(empirical_avg_sq_grad(logs))
    return values, fit_rate(list(grid.ks), values)


def load_bounds_config(path) -> BoundGridSpec:
    """Read a bound-grid TOML: [problem] quadratic shape, [bounds], [samar]."""
    raw = tomllib.loads(Path(path).read_text())
    unknown = set(raw) - {"problem", "bounds", "samar"}
    if unknown:
        raise ConfigurationError(f"unknown bounds sections: {sorted(unknown)}")
    prob = dict(raw.get("problem", {}))
    bounds = dict(raw.get("bounds", {}))
    samar = dict(raw.get("samar", {}))
    seeds = bounds.pop("seeds", 10)
    if isinstance(seeds, int):
        seeds = list(range(1, seeds + 1))
    try:
        grid = BoundGridSpec(
            dim=int(prob.pop("dim", 20)),
            eig_min=float(prob.pop("eig_min", 2.0)),
            eig_max=float(prob.pop("eig_max", 4.0)),
            noise_sigma=float(prob.pop("noise_sigma", 0.05)),
            x0_scale=float(prob.pop("x0_scale", 1.0)),
            eta0=float(bounds.pop("eta0", 0.5)),
            rho0=float(bounds.pop("rho0", 0.5)),
            ks=[int(k) for k in bounds.pop("ks", (100, 400, 1600))],
            seeds=[int(s) for s in seeds],
            slack=float(bounds.pop("slack", 0.10)),
            lambda0=float(samar.pop("lambda0", 1.0)),
            chi=float(samar.pop("chi", 1.05)),
            gamma=float(samar.pop("gamma", 1.5)),
            delta=float(samar.pop("delta", 0.01)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad bounds config: {exc}") from None
    for section, leftover in (("problem", prob), ("bounds", bounds), ("samar", samar)):
        if leftover:
            raise ConfigurationError(f"unknown [{section}] keys: {sorted(leftover)}")
    return grid


# ---------------------------------------------------------------------------
# gradient audits for the CLI
# ---------------------------------------------------------------------------

AUDIT_PROBLEMS = ("quadratic", "rosenbrock", "logistic", "mlp")


def audit_gradients(name: str, points: int = 5, h: float = 1e-5, seed: int = 0) -> float:
    """Worst relative error of an analytic gradient against central differences."""
    rng = make_rng(seed)
    if name == "quadratic":
        prob = diagonal_quadratic(20, 0.5, 4.0)
        pts = [rng.standard_normal(prob.dim) for _ in range(points)]
        return gradient_audit(prob.loss, prob.grad, pts, h)
    if name == "rosenbrock":
        pts = [0.5 * rng.standard_normal(10) for _ in range(points)]
        return gradient_audit(rosenbrock_loss, rosenbrock_grad, pts, h)
    if name == "logistic":
        ds = generate_dataset(
            GeneratorSpec("gaussian-blobs", {"train_per_class": 200, "test_per_class": 50}), 3
        )
        prob = LogisticProblem(ds.train_x, ds.train_y, l2_coeff=1e-3)
        pts = [rng.standard_normal(prob.dim) for _ in range(points)]
        return gradient_audit(prob.loss, prob.grad, pts, h)
    if name == "mlp":
        ds = generate_dataset(
            GeneratorSpec("two-spirals", {"train_per_class": 100, "test_per_class": 25}), 3
        )
        prob = MlpProblem([2, 16, 2], ds)
        pts = [prob.initial_params(rng) for _ in range(points)]
        return gradient_audit(prob.loss_full, prob.grad_full, pts, h)
    raise ConfigurationError(f"unknown audit problem {name!r}; choose from {AUDIT_PROBLEMS}")
