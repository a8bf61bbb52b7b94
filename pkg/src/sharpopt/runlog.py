"""Run logs: per-step and per-epoch series with deterministic serialization.

The step CSV schema is fixed:

    step,epoch,loss,grad_norm,pert_grad_norm,lambda,ratio,lr,sharpness

Missing values (ratio on the first step, lambda for non-adaptive rules) are
empty cells. Floats are written with repr, which round-trips exactly, so two
runs with the same seed and config produce byte-identical files. Optional
full-gradient diagnostics go to a sidecar fullgrad.csv so the main schema
never changes shape.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from .core import ContractViolationError
from .optim import StepRecord

STEP_HEADER = "step,epoch,loss,grad_norm,pert_grad_norm,lambda,ratio,lr,sharpness"
EPOCH_HEADER = "epoch,loss,train_top1,test_top1,train_top5,test_top5"
FULLGRAD_HEADER = "step,full_grad_norm,full_pert_grad_norm"


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    train_top1: Optional[float] = None
    test_top1: Optional[float] = None
    train_top5: Optional[float] = None
    test_top5: Optional[float] = None


@dataclass
class RunLog:
    optimizer: str
    problem: str
    seed: int
    steps_per_epoch: int
    fingerprint: str = ""
    records: List[StepRecord] = field(default_factory=list)
    epoch_metrics: List[EpochMetrics] = field(default_factory=list)
    diverged: bool = False
    divergence_step: Optional[int] = None

    @property
    def n_steps(self) -> int:
        return len(self.records)

    def epoch_of(self, step: int) -> int:
        return step // self.steps_per_epoch


def _cell(v) -> str:
    return "" if v is None else repr(float(v))


def _parse_cell(s: str) -> Optional[float]:
    return None if s == "" else float(s)


def write_runlog(log: RunLog, run_dir) -> None:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    lines = [STEP_HEADER]
    for r in log.records:
        lines.append(
            ",".join(
                [
                    str(r.step_index),
                    str(log.epoch_of(r.step_index)),
                    _cell(r.loss),
                    _cell(r.grad_norm),
                    _cell(r.pert_grad_norm),
                    _cell(r.lam),
                    _cell(r.ratio),
                    _cell(r.learning_rate),
                    _cell(r.sharpness),
                ]
            )
        )
    (run_dir / "steps.csv").write_text("\n".join(lines) + "\n")

    if log.epoch_metrics:
        lines = [EPOCH_HEADER]
        for m in log.epoch_metrics:
            lines.append(
                ",".join(
                    [
                        str(m.epoch),
                        _cell(m.loss),
                        _cell(m.train_top1),
                        _cell(m.test_top1),
                        _cell(m.train_top5),
                        _cell(m.test_top5),
                    ]
                )
            )
        (run_dir / "epochs.csv").write_text("\n".join(lines) + "\n")

    if any(r.full_grad_norm is not None for r in log.records):
        lines = [FULLGRAD_HEADER]
        for r in log.records:
            lines.append(
                ",".join(
                    [str(r.step_index), _cell(r.full_grad_norm), _cell(r.full_pert_grad_norm)]
                )
            )
        (run_dir / "fullgrad.csv").write_text("\n".join(lines) + "\n")

    meta = {
        "optimizer": log.optimizer,
        "problem": log.problem,
        "seed": log.seed,
        "steps_per_epoch": log.steps_per_epoch,
        "fingerprint": log.fingerprint,
        "diverged": log.diverged,
        "divergence_step": log.divergence_step,
        "n_steps": log.n_steps,
    }
    (run_dir / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def load_runlog(run_dir) -> RunLog:
    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "meta.json").read_text())
    log = RunLog(
        optimizer=meta["optimizer"],
        problem=meta["problem"],
        seed=meta["seed"],
        steps_per_epoch=meta["steps_per_epoch"],
        fingerprint=meta["fingerprint"],
        diverged=meta["diverged"],
        divergence_step=meta["divergence_step"],
    )

    text = (run_dir / "steps.csv").read_text().rstrip("\n")
    rows = text.split("\n")
    if rows[0] != STEP_HEADER:
        raise ContractViolationError(f"unexpected step header {rows[0]!r}")
    for row in rows[1:]:
        c = row.split(",")
        log.records.append(
            StepRecord(
                step_index=int(c[0]),
                loss=float(c[2]),
                grad_norm=float(c[3]),
                pert_grad_norm=_parse_cell(c[4]),
                lam=_parse_cell(c[5]),
                ratio=_parse_cell(c[6]),
                learning_rate=float(c[7]),
                sharpness=_parse_cell(c[8]),
            )
        )

    fg = run_dir / "fullgrad.csv"
    if fg.exists():
        rows = fg.read_text().rstrip("\n").split("\n")
        if rows[0] != FULLGRAD_HEADER:
            raise ContractViolationError(f"unexpected fullgrad header {rows[0]!r}")
        for row in rows[1:]:
            c = row.split(",")
            rec = log.records[int(c[0])]
            rec.full_grad_norm = _parse_cell(c[1])
            rec.full_pert_grad_norm = _parse_cell(c[2])

    ep = run_dir / "epochs.csv"
    if ep.exists():
        rows = ep.read_text().rstrip("\n").split("\n")
        if rows[0] != EPOCH_HEADER:
            raise ContractViolationError(f"unexpected epoch header {rows[0]!r}")
        for row in rows[1:]:
            c = row.split(",")
            log.epoch_metrics.append(
                EpochMetrics(
                    epoch=int(c[0]),
                    loss=float(c[1]),
                    train_top1=_parse_cell(c[2]),
                    test_top1=_parse_cell(c[3]),
                    train_top5=_parse_cell(c[4]),
                    test_top5=_parse_cell(c[5]),
                )
            )
    return log
