"""Convergence-bound evaluation and empirical verification helpers.

The central object is the nonconvex guarantee for the adaptive two-point
rule. With an L-smooth objective bounded below by f_inf, gradient noise
variance at most sigma^2, step size eta_k = eta0 / sqrt(K), perturbation
radius rho = rho0 / sqrt(K), and nu = 1 - 5 L eta0 / (2 sqrt(K)) > 0, the
averaged expected squared gradient norm over a K-step run obeys

  (1/K) sum_k E||grad f(x_k)||^2
    <= (1/nu) [ (f(x_0) - f_inf) / (eta0 sqrt(K))
                + L rho0^2 / (2 eta0 sqrt(K))
                + 3 L eta0 sigma^2 / sqrt(K)
                + 2 L^3 eta0 rho0^2 / K^(3/2) ],

and the same average at the perturbed points obeys twice that plus
2 L^2 rho0^2 / K. Everything decays like 1/sqrt(K), so a log-log fit of
either average against K should recover a slope near -1/2.

The other half of this module checks the machinery behind that claim on
conforming oracles: the variance decomposition E||g||^2 <= sigma^2 +
||grad f||^2, the same-batch perturbation bound ||g(x+eps) - g(x)|| <=
L rho, and its squared consequence ||g(x+eps)||^2 <= 2 L^2 rho^2 +
2 ||g(x)||^2.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np

from .core import (
    ConfigurationError,
    ContractViolationError,
    GRAD_EPS,
    StochasticOracle,
    VacuousBoundError,
    ZeroGradientError,
    make_rng,
    norm,
)
from .runlog import RunLog


@dataclass(frozen=True)
class BoundInputs:
    """Constants the guarantee needs: smoothness, noise, radii, horizon."""

    lipschitz: float
    sigma: float
    rho0: float
    eta0: float
    f0: float
    f_inf: float
    steps: int

    def __post_init__(self):
        if not self.lipschitz > 0.0:
            raise ContractViolationError("lipschitz must be > 0")
        if self.sigma < 0.0:
            raise ContractViolationError("sigma must be >= 0")
        if not self.rho0 > 0.0:
            raise ContractViolationError("rho0 must be > 0")
        if not self.eta0 > 0.0:
            raise ContractViolationError("eta0 must be > 0")
        if self.steps < 1:
            raise ContractViolationError("steps must be >= 1")
        if self.f0 < self.f_inf:
            raise ContractViolationError("f0 must be >= f_inf")

    @property
    def nu(self) -> float:
        return 1.0 - 5.0 * self.lipschitz * self.eta0 / (2.0 * np.sqrt(self.steps))


def convergence_bound(inp: BoundInputs) -> float:
    """Bound on the run-averaged expected squared gradient norm."""
    nu = inp.nu
    if nu <= 0.0:
        raise VacuousBoundError(
            f"nu = {nu:.6g} <= 0; eta0 too large for L={inp.lipschitz}, K={inp.steps}"
        )
    sqrt_k = np.sqrt(inp.steps)
    l, s, r0, e0 = inp.lipschitz, inp.sigma, inp.rho0, inp.eta0
    bracket = (
        (inp.f0 - inp.f_inf) / (e0 * sqrt_k)
        + l * r0 * r0 / (2.0 * e0 * sqrt_k)
        + 3.0 * l * e0 * s * s / sqrt_k
        + 2.0 * l ** 3 * e0 * r0 * r0 / inp.steps ** 1.5
    )
    return float(bracket / nu)


def perturbed_convergence_bound(inp: BoundInputs) -> float:
    """Same average taken at the perturbed points x_k + eps_k."""
    l, r0 = inp.lipschitz, inp.rho0
    return float(2.0 * convergence_bound(inp) + 2.0 * l * l * r0 * r0 / inp.steps)


def empirical_avg_sq_grad(
    logs: Sequence[RunLog], use_full_gradient: bool = True, perturbed: bool = False
) -> float:
    """Seed-mean of the per-run average squared gradient norm.

    With use_full_gradient the full-objective gradient norms recorded during
    the run are used (the quantity the bound speaks about); otherwise the
    minibatch norms. perturbed selects the series at x_k + eps_k.
    """
    if not logs:
        raise ContractViolationError("no logs given")
    prints = {log.fingerprint for log in logs}
    if len(prints) != 1:
        raise ContractViolationError(f"logs from mixed configs: {sorted(prints)}")
    per_run = []
    for log in logs:
        vals = []
        for r in log.records:
            if use_full_gradient:
                v = r.full_pert_grad_norm if perturbed else r.full_grad_norm
            else:
                v = r.pert_grad_norm if perturbed else r.grad_norm
            if v is None:
                raise ContractViolationError(
                    "requested gradient series missing from the log"
                )
            vals.append(v * v)
        if not vals:
            raise ContractViolationError("empty run log")
        per_run.append(float(np.mean(vals)))
    return float(np.mean(per_run))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float


def fit_rate(ks: Sequence[float], values: Sequence[float]) -> RateFit:
    """Least-squares slope of log(value) against log(K)."""
    ks = np.asarray(ks, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if ks.size != values.size or ks.size < 3:
        raise ContractViolationError("need >= 3 paired points")
    if np.unique(ks).size != ks.size:
        raise ContractViolationError("duplicate K values")
    if np.any(ks <= 0.0) or np.any(values <= 0.0):
        raise ContractViolationError("points must be positive to take logs")
    lx, ly = np.log(ks), np.log(values)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return RateFit(slope=float(slope), intercept=float(intercept), r_squared=r2)


def estimate_sharpness(oracle: StochasticOracle, x: np.ndarray, rho: float) -> float:
    """Loss rise along the normalized full gradient: f(x + rho g/||g||) - f(x)."""
    if rho < 0.0:
        raise ContractViolationError("rho must be >= 0")
    if oracle.full_gradient is None:
        raise ContractViolationError("oracle lacks a full gradient")
    g = oracle.full_gradient(x)
    n = norm(g)
    if n < GRAD_EPS:
        raise ZeroGradientError(f"gradient norm {n:.3e} too small to normalize")
    if rho == 0.0:
        return 0.0
    return oracle.loss_at(x + (rho / n) * g) - oracle.loss_at(x)


# ---------------------------------------------------------------------------
# inequality audit on conforming oracles
# ---------------------------------------------------------------------------


@dataclass
class InequalityCheck:
    name: str
    worst_margin: float  # max over probes of lhs - rhs; <= threshold passes
    threshold: float
    passed: bool


@dataclass
class InequalityReport:
    checks: List[InequalityCheck]
    probes: int
    samples: int

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def check_oracle_inequalities(
    oracle: StochasticOracle,
    probe_points: Sequence[np.ndarray],
    rho: float,
    n_samples: int = 10_000,
    rng: Optional[np.random.Generator] = None,
) -> InequalityReport:
    """Spot-check the assumptions the bound rests on, at the given probes.

    Deterministic, per probe with a shared batch:
      perturbation-lipschitz   ||g(x+eps) - g(x)|| - L rho <= 0
      perturbed-norm-squared   ||g(x+eps)||^2 - 2 L^2 rho^2 - 2||g(x)||^2 <= 0
    Monte-Carlo over n_samples fresh batches:
      variance-decomposition   mean ||g(x)||^2 - sigma^2 - ||grad f(x)||^2
                               <= 3 standard errors
    """
    if oracle.lipschitz_constant is None or oracle.noise_bound is None:
        raise ConfigurationError("oracle must declare lipschitz and noise constants")
    if oracle.full_gradient is None:
        raise ConfigurationError("oracle must expose the full gradient")
    if not rho > 0.0:
        raise ContractViolationError("rho must be > 0")
    if not probe_points:
        raise ContractViolationError("need at least one probe point")
    rng = make_rng(0) if rng is None else rng
    l, sigma = oracle.lipschitz_constant, oracle.noise_bound

    lip_margin = -np.inf
    sq_margin = -np.inf
    mc_margin = None
    mc_threshold = 0.0
    for x in probe_points:
        batch = oracle.next_batch(rng)
        g = oracle.stochastic_gradient(x, batch)
        gn = norm(g)
        if gn < GRAD_EPS:
            raise ZeroGradientError("probe point has a vanishing stochastic gradient")
        eps = (rho / gn) * g
        gp = oracle.stochastic_gradient(x + eps, batch)
        lip_margin = max(lip_margin, norm(gp - g) - l * rho)
        sq_margin = max(
            sq_margin, norm(gp) ** 2 - 2.0 * l * l * rho * rho - 2.0 * gn * gn
        )

        full = oracle.full_gradient(x)
        if oracle.stochastic_gradient_many is not None and oracle.next_batch_many is not None:
            grads = oracle.stochastic_gradient_many(x, oracle.next_batch_many(rng, n_samples))
            sq = np.einsum("ij,ij->i", grads, grads)
        else:
            sq = np.empty(n_samples)
            for i in range(n_samples):
                gi = oracle.stochastic_gradient(x, oracle.next_batch(rng))
                sq[i] = gi @ gi
        est = float(np.mean(sq))
        # a deterministic oracle collapses the sample to one row; its
        # estimate is exact, so the standard error is zero
        se = 0.0 if sq.size < 2 else float(np.std(sq, ddof=1) / np.sqrt(sq.size))
        full_sq = float(full @ full)
        margin = est - sigma * sigma - full_sq
        # round-off allowance for the cancellation est - sigma^2 - ||grad||^2,
        # scaled to the summand magnitudes; matters only when se is ~0
        dust = 64.0 * np.finfo(float).eps * max(est, sigma * sigma + full_sq)
        threshold = 3.0 * se + dust
        if mc_margin is None or margin - threshold > mc_margin - mc_threshold:
            mc_margin, mc_threshold = margin, threshold

    checks = [
        InequalityCheck("perturbation-lipschitz", float(lip_margin), 0.0, lip_margin <= 0.0),
        InequalityCheck("perturbed-norm-squared", float(sq_margin), 0.0, sq_margin <= 0.0),
        InequalityCheck(
            "variance-decomposition",
            float(mc_margin),
            float(mc_threshold),
            mc_margin <= mc_threshold,
        ),
    ]
    return InequalityReport(checks=checks, probes=len(probe_points), samples=n_samples)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


def central_difference_gradient(
    loss_fn: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    """O(h^2) central-difference gradient, one coordinate at a time."""
    g = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        g[i] = (loss_fn(x + step) - loss_fn(x - step)) / (2.0 * h)
    return g


def gradient_audit(
    loss_fn: Callable[[np.ndarray], float],
    grad_fn: Callable[[np.ndarray], np.ndarray],
    points: Sequence[np.ndarray],
    h: float = 1e-5,
) -> float:
    """Worst relative error between analytic and central-difference gradients."""
    worst = 0.0
    for x in points:
        g = grad_fn(x)
        fd = central_difference_gradient(loss_fn, x, h)
        denom = max(norm(g), 1e-12)
        worst = max(worst, norm(g - fd) / denom)
    return worst


# ---------------------------------------------------------------------------
# bound report structure (populated by the harness grid runner)
# ---------------------------------------------------------------------------


@dataclass
class BoundCell:
    steps: int
    nu: float
    bound: float
    bound_perturbed: float
    empirical: float
    empirical_perturbed: float
    per_seed: List[float] = field(default_factory=list)
    per_seed_perturbed: List[float] = field(default_factory=list)
    passed: bool = True
    seed_flags: List[int] = field(default_factory=list)  # seeds above the bound alone


@dataclass
class BoundReport:
    problem: str
    eta0: float
    rho0: float
    slack: float
    seeds: List[int] = field(default_factory=list)
    cells: List[BoundCell] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.cells)

    @property
    def flagged(self) -> bool:
        return (not self.all_passed) or any(c.seed_flags for c in self.cells)


def write_bound_report(report: BoundReport, path) -> None:
    payload = asdict(report)
    payload["all_passed"] = report.all_passed
    payload["flagged"] = report.flagged
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
