"""Learning-rate schedules.

Three kinds:
  constant      eta_k = eta0
  cosine-anneal eta_k = eta0 * 0.5 * (1 + cos(pi * epoch / total_epochs)),
                held constant within an epoch, annealing toward zero over
                one half period
  sqrt-horizon  eta_k = eta0 / sqrt(K) for a fixed step budget K, the
                schedule the convergence bound assumes
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ContractViolationError

KINDS = ("constant", "cosine-anneal", "sqrt-horizon")


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str
    eta0: float
    total_epochs: Optional[int] = None  # cosine-anneal
    total_steps: Optional[int] = None  # sqrt-horizon step budget K
    steps_per_epoch: Optional[int] = None  # lets sqrt-horizon range-check epochs

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolationError(f"unknown schedule kind {self.kind!r}")
        if not self.eta0 > 0.0:
            raise ContractViolationError("eta0 must be > 0")
        if self.kind == "cosine-anneal" and (self.total_epochs is None or self.total_epochs < 1):
            raise ContractViolationError("cosine-anneal needs total_epochs >= 1")
        if self.kind == "sqrt-horizon" and (self.total_steps is None or self.total_steps < 1):
            raise ContractViolationError("sqrt-horizon needs total_steps >= 1")


def learning_rate(spec: ScheduleSpec, epoch: int, step_in_epoch: int) -> float:
    """Step size for the given position in the run. Always > 0 in range."""
    if epoch < 0 or step_in_epoch < 0:
        raise ContractViolationError("epoch and step_in_epoch must be >= 0")
    if spec.kind == "constant":
        return spec.eta0
    if spec.kind == "cosine-anneal":
        if epoch >= spec.total_epochs:
            raise ContractViolationError(
                f"epoch {epoch} outside schedule range [0, {spec.total_epochs})"
            )
        return spec.eta0 * 0.5 * (1.0 + np.cos(np.pi * epoch / spec.total_epochs))
    # sqrt-horizon
    if spec.steps_per_epoch is not None:
        global_step = epoch * spec.steps_per_epoch + step_in_epoch
    else:
        global_step = step_in_epoch if epoch == 0 else None
        if global_step is None:
            raise ContractViolationError(
                "sqrt-horizon with epoch > 0 needs steps_per_epoch to locate the step"
            )
    if global_step >= spec.total_steps:
        raise ContractViolationError(
            f"step {global_step} outside budget K={spec.total_steps}"
        )
    return spec.eta0 / float(np.sqrt(spec.total_steps))
