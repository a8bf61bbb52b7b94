"""Sharpness-aware first-order optimizers on a shared step interface.

Four update rules over a stochastic oracle g:

  sgd     x' = x - eta g(x)
  sam     x' = x - eta g(x + eps),            eps = rho g(x) / ||g(x)||
  vasso   like sam but the perturbation direction is an exponential moving
          average d = (1 - theta) d_prev + theta g(x)
  samar   two-point blend with an adaptive mixing weight lambda:
            s  = (1 - lambda) g(x) + lambda g(x + eps)
            x' = x - eta s
          after the step, lambda is multiplied by gamma when the gradient
          norm ratio r = ||g(x_k)|| / ||g(x_{k-1})|| reaches the trigger chi
          (rising norms read as entering a sharp region), divided by gamma
          otherwise, and projected onto [delta, 1 - delta]. The very first
          step has no ratio and takes the increase branch.

Both gradient evaluations inside one step reuse the same minibatch, which is
what makes lambda = 1 reduce to sam and lambda = 0 reduce to sgd exactly.

Weight decay, when requested, is decoupled: x' <- x' (1 - eta wd) after the
gradient step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    ContractViolationError,
    DegenerateRatioError,
    DivergenceDetected,
    GRAD_EPS,
    StochasticOracle,
    ZeroGradientError,
    axpy,
    norm,
)

# |loss| beyond this, or any non-finite value, aborts the run.
DIVERGENCE_LIMIT = 1e12

# True puts theta on the fresh gradient in the vasso average; flip for the
# convention that puts theta on the history term.
VASSO_THETA_ON_FRESH = True


@dataclass(frozen=True)
class SamarConfig:
    """Hyperparameters for the adaptive two-point rule.

    rho      perturbation radius, > 0
    lambda0  initial mixing weight in (0, 1]
    chi      ratio trigger for the increase branch (compared against r)
    gamma    multiplicative lambda step, > 1
    delta    projection margin, lambda stays in [delta, 1 - delta]
    pin_lambda  when set, lambda is held at this value and never adapted;
                pin_lambda=1.0 reproduces sam, pin_lambda=0.0 reproduces sgd
    """

    rho: float
    lambda0: float = 1.0
    chi: float = 1.1
    gamma: float = 1.55
    delta: float = 0.01
    pin_lambda: Optional[float] = None

    def __post_init__(self):
        if not self.rho > 0.0:
            raise ContractViolationError("rho must be > 0")
        if not 0.0 < self.lambda0 <= 1.0:
            raise ContractViolationError("lambda0 must be in (0, 1]")
        if not self.chi > 0.0:
            raise ContractViolationError("chi must be > 0")
        if not self.gamma > 1.0:
            raise ContractViolationError("gamma must be > 1")
        if not 0.0 < self.delta < 0.5:
            raise ContractViolationError("delta must be in (0, 0.5)")
        if self.pin_lambda is not None and not 0.0 <= self.pin_lambda <= 1.0:
            raise ContractViolationError("pin_lambda must be in [0, 1]")


@dataclass
class SamarState:
    """Per-run mutable state: iterate, mixing weight, last gradient norm."""

    x: np.ndarray
    lam: float
    prev_grad_norm: Optional[float] = None
    step_index: int = 0

    @classmethod
    def initial(cls, x0: np.ndarray, cfg: SamarConfig) -> "SamarState":
        return cls(x=np.array(x0, dtype=np.float64), lam=cfg.lambda0)


@dataclass
class StepRecord:
    """Diagnostics for one optimizer step.

    Fields that do not apply to a given rule (lambda for sgd, the perturbed
    norm for sgd, the ratio on the first step) are None. The full_* norms
    are only filled when the caller asks for full-gradient diagnostics.
    """

    step_index: int
    loss: float
    grad_norm: float
    learning_rate: float
    pert_grad_norm: Optional[float] = None
    lam: Optional[float] = None
    ratio: Optional[float] = None
    sharpness: Optional[float] = None
    full_grad_norm: Optional[float] = None
    full_pert_grad_norm: Optional[float] = None


def compute_perturbation(grad: np.ndarray, rho: float) -> np.ndarray:
    """Ascent offset eps = rho grad / ||grad||, so ||eps|| = rho exactly."""
    if not rho > 0.0:
        raise ContractViolationError("rho must be > 0")
    n = norm(grad)
    if n < GRAD_EPS:
        raise ZeroGradientError(f"gradient norm {n:.3e} too small to normalize")
    return (rho / n) * grad


def blended_gradient(g: np.ndarray, g_pert: np.ndarray, lam: float) -> np.ndarray:
    """Convex combination (1 - lam) g + lam g_pert."""
    if g.shape != g_pert.shape:
        raise ContractViolationError(f"shape mismatch: {g.shape} vs {g_pert.shape}")
    if not 0.0 <= lam <= 1.0:
        raise ContractViolationError("lam must be in [0, 1]")
    return (1.0 - lam) * g + lam * g_pert


def sharpness_ratio(grad_norm: float, grad_norm_prev: float) -> float:
    """r = ||g(x_k)|| / ||g(x_{k-1})||."""
    if grad_norm_prev <= GRAD_EPS:
        raise DegenerateRatioError(f"previous gradient norm {grad_norm_prev:.3e} too small")
    return grad_norm / grad_norm_prev


def update_lambda(lam: float, ratio: Optional[float], k: int, cfg: SamarConfig) -> float:
    """Multiplicative lambda update with projection onto [delta, 1 - delta].

    Increase branch fires when k == 0 (no ratio exists yet) or ratio >= chi;
    a tie with chi counts as an increase. Otherwise lambda shrinks by gamma.
    """
    if k > 0 and ratio is None:
        raise ContractViolationError("ratio required after the first step")
    if k == 0 or ratio >= cfg.chi:
        lam_next = cfg.gamma * lam
    else:
        lam_next = lam / cfg.gamma
    return min(max(lam_next, cfg.delta), 1.0 - cfg.delta)


def _check_loss(loss: float, step_index: int) -> None:
    if not np.isfinite(loss) or abs(loss) > DIVERGENCE_LIMIT:
        raise DivergenceDetected(f"loss {loss!r} at step {step_index}")


def _check_iterate(x: np.ndarray, step_index: int) -> None:
    if not np.all(np.isfinite(x)):
        raise DivergenceDetected(f"non-finite iterate at step {step_index}")


def _decay(x: np.ndarray, eta: float, weight_decay: float) -> np.ndarray:
    if weight_decay != 0.0:
        return x * (1.0 - eta * weight_decay)
    return x


def _full_norms(oracle, x, eps):
    if oracle.full_gradient is None:
        return None, None
    fg = norm(oracle.full_gradient(x))
    fp = None if eps is None else norm(oracle.full_gradient(x + eps))
    return fg, fp


def _loss_on(oracle, x, batch):
    if oracle.batch_loss is not None:
        return oracle.batch_loss(x, batch)
    return oracle.loss_at(x)


def samar_step(
    state: SamarState,
    oracle: StochasticOracle,
    eta_k: float,
    cfg: SamarConfig,
    rng: Optional[np.random.Generator] = None,
    *,
    weight_decay: float = 0.0,
    record_full_gradient: bool = False,
):
    """One adaptive two-point step. Returns (next_state, record).

    Order matters: the blend uses the current lambda, the ratio compares the
    current gradient norm against the previous step's, and only then is
    lambda updated for the next step.
    """
    k = state.step_index
    batch = oracle.next_batch(rng)
    g = oracle.stochastic_gradient(state.x, batch)
    lam = state.lam if cfg.pin_lambda is None else cfg.pin_lambda
    eps = compute_perturbation(g, cfg.rho)
    g_pert = oracle.stochastic_gradient(state.x + eps, batch)
    s = blended_gradient(g, g_pert, lam)

    loss = _loss_on(oracle, state.x, batch)
    _check_loss(loss, k)
    x_next = _decay(axpy(-eta_k, s, state.x), eta_k, weight_decay)
    _check_iterate(x_next, k)

    gn = norm(g)
    ratio = None if k == 0 else sharpness_ratio(gn, state.prev_grad_norm)
    if cfg.pin_lambda is None:
        lam_next = update_lambda(state.lam, ratio, k, cfg)
    else:
        lam_next = cfg.pin_lambda

    full_g, full_p = (None, None)
    if record_full_gradient:
        full_g, full_p = _full_norms(oracle, state.x, eps)
    record = StepRecord(
        step_index=k,
        loss=loss,
        grad_norm=gn,
        learning_rate=eta_k,
        pert_grad_norm=norm(g_pert),
        lam=lam,
        ratio=ratio,
        sharpness=_loss_on(oracle, state.x + eps, batch) - loss,
        full_grad_norm=full_g,
        full_pert_grad_norm=full_p,
    )
    next_state = SamarState(x=x_next, lam=lam_next, prev_grad_norm=gn, step_index=k + 1)
    return next_state, record


def _sgd_core(x, oracle, eta_k, rng, weight_decay, record_full_gradient, k):
    batch = oracle.next_batch(rng)
    g = oracle.stochastic_gradient(x, batch)
    loss = _loss_on(oracle, x, batch)
    _check_loss(loss, k)
    x_next = _decay(axpy(-eta_k, g, x), eta_k, weight_decay)
    _check_iterate(x_next, k)
    full_g = None
    if record_full_gradient and oracle.full_gradient is not None:
        full_g = norm(oracle.full_gradient(x))
    record = StepRecord(
        step_index=k, loss=loss, grad_norm=norm(g), learning_rate=eta_k, full_grad_norm=full_g
    )
    return x_next, record


def sgd_step(
    x: np.ndarray,
    oracle: StochasticOracle,
    eta_k: float,
    rng: Optional[np.random.Generator] = None,
    *,
    weight_decay: float = 0.0,
) -> np.ndarray:
    """Plain stochastic gradient step, no momentum."""
    return _sgd_core(x, oracle, eta_k, rng, weight_decay, False, 0)[0]


def _sam_core(x, oracle, eta_k, rho, rng, weight_decay, record_full_gradient, k):
    batch = oracle.next_batch(rng)
    g = oracle.stochastic_gradient(x, batch)
    eps = compute_perturbation(g, rho)
    g_pert = oracle.stochastic_gradient(x + eps, batch)
    loss = _loss_on(oracle, x, batch)
    _check_loss(loss, k)
    x_next = _decay(axpy(-eta_k, g_pert, x), eta_k, weight_decay)
    _check_iterate(x_next, k)
    full_g, full_p = (None, None)
    if record_full_gradient:
        full_g, full_p = _full_norms(oracle, x, eps)
    record = StepRecord(
        step_index=k,
        loss=loss,
        grad_norm=norm(g),
        learning_rate=eta_k,
        pert_grad_norm=norm(g_pert),
        sharpness=_loss_on(oracle, x + eps, batch) - loss,
        full_grad_norm=full_g,
        full_pert_grad_norm=full_p,
    )
    return x_next, record


def sam_step(
    x: np.ndarray,
    oracle: StochasticOracle,
    eta_k: float,
    rho: float,
    rng: Optional[np.random.Generator] = None,
    *,
    weight_decay: float = 0.0,
) -> np.ndarray:
    """Step along the gradient taken at the ascent-perturbed point."""
    return _sam_core(x, oracle, eta_k, rho, rng, weight_decay, False, 0)[0]


def _vasso_core(
    x, d_prev, oracle, eta_k, rho, theta, rng, weight_decay, record_full_gradient, k,
    theta_on_fresh,
):
    if not 0.0 < theta <= 1.0:
        raise ContractViolationError("theta must be in (0, 1]")
    batch = oracle.next_batch(rng)
    g = oracle.stochastic_gradient(x, batch)
    if theta_on_fresh:
        d = (1.0 - theta) * d_prev + theta * g
    else:
        d = theta * d_prev + (1.0 - theta) * g
    dn = norm(d)
    if dn < GRAD_EPS:
        raise ZeroGradientError(f"averaged direction norm {dn:.3e} too small")
    eps = (rho / dn) * d
    g_pert = oracle.stochastic_gradient(x + eps, batch)
    loss = _loss_on(oracle, x, batch)
    _check_loss(loss, k)
    x_next = _decay(axpy(-eta_k, g_pert, x), eta_k, weight_decay)
    _check_iterate(x_next, k)
    full_g, full_p = (None, None)
    if record_full_gradient:
        full_g, full_p = _full_norms(oracle, x, eps)
    record = StepRecord(
        step_index=k,
        loss=loss,
        grad_norm=norm(g),
        learning_rate=eta_k,
        pert_grad_norm=norm(g_pert),
        sharpness=_loss_on(oracle, x + eps, batch) - loss,
        full_grad_norm=full_g,
        full_pert_grad_norm=full_p,
    )
    return x_next, d, record


def vasso_step(
    x: np.ndarray,
    d_prev: np.ndarray,
    oracle: StochasticOracle,
    eta_k: float,
    rho: float,
    theta: float,
    rng: Optional[np.random.Generator] = None,
    *,
    weight_decay: float = 0.0,
    theta_on_fresh: bool = VASSO_THETA_ON_FRESH,
):
    """Variance-suppressed step; returns (x_next, d_next). theta = 1 is sam."""
    x_next, d, _ = _vasso_core(
        x, d_prev, oracle, eta_k, rho, theta, rng, weight_decay, False, 0, theta_on_fresh
    )
    return x_next, d


# ---------------------------------------------------------------------------
# drivers: stateful wrappers with a uniform step() used by the run harness
# ---------------------------------------------------------------------------


class SgdDriver:
    name = "sgd"

    def __init__(self, x0, *, weight_decay=0.0, record_full_gradient=False):
        self.x = np.array(x0, dtype=np.float64)
        self.weight_decay = weight_decay
        self.record_full_gradient = record_full_gradient
        self.k = 0

    def step(self, oracle, eta, rng=None) -> StepRecord:
        self.x, rec = _sgd_core(
            self.x, oracle, eta, rng, self.weight_decay, self.record_full_gradient, self.k
        )
        self.k += 1
        return rec


class SamDriver:
    name = "sam"

    def __init__(self, x0, rho, *, weight_decay=0.0, record_full_gradient=False):
        if not rho > 0.0:
            raise ContractViolationError("rho must be > 0")
        self.x = np.array(x0, dtype=np.float64)
        self.rho = rho
        self.weight_decay = weight_decay
        self.record_full_gradient = record_full_gradient
        self.k = 0

    def step(self, oracle, eta, rng=None) -> StepRecord:
        self.x, rec = _sam_core(
            self.x, oracle, eta, self.rho, rng, self.weight_decay,
            self.record_full_gradient, self.k,
        )
        self.k += 1
        return rec


class VassoDriver:
    name = "vasso"

    def __init__(
        self, x0, rho, theta=0.9, *, weight_decay=0.0, record_full_gradient=False,
        theta_on_fresh=VASSO_THETA_ON_FRESH,
    ):
        if not rho > 0.0:
            raise ContractViolationError("rho must be > 0")
        if not 0.0 < theta <= 1.0:
            raise ContractViolationError("theta must be in (0, 1]")
        self.x = np.array(x0, dtype=np.float64)
        self.d = np.zeros_like(self.x)
        self.rho = rho
        self.theta = theta
        self.theta_on_fresh = theta_on_fresh
        self.weight_decay = weight_decay
        self.record_full_gradient = record_full_gradient
        self.k = 0

    def step(self, oracle, eta, rng=None) -> StepRecord:
        self.x, self.d, rec = _vasso_core(
            self.x, self.d, oracle, eta, self.rho, self.theta, rng, self.weight_decay,
            self.record_full_gradient, self.k, self.theta_on_fresh,
        )
        self.k += 1
        return rec


class SamarDriver:
    name = "samar"

    def __init__(self, x0, cfg: SamarConfig, *, weight_decay=0.0, record_full_gradient=False):
        self.state = SamarState.initial(x0, cfg)
        self.cfg = cfg
        self.weight_decay = weight_decay
        self.record_full_gradient = record_full_gradient

    @property
    def x(self):
        return self.state.x

    def step(self, oracle, eta, rng=None) -> StepRecord:
        self.state, rec = samar_step(
            self.state, oracle, eta, self.cfg, rng,
            weight_decay=self.weight_decay,
            record_full_gradient=self.record_full_gradient,
        )
        return rec


def make_driver(name: str, x0, opts: dict, *, weight_decay=0.0, record_full_gradient=False):
    """Build a driver from an optimizer name and its option dict."""
    opts = dict(opts)
    if name == "sgd":
        if opts:
            raise ContractViolationError(f"sgd takes no options, got {sorted(opts)}")
        return SgdDriver(
            x0, weight_decay=weight_decay, record_full_gradient=record_full_gradient
        )
    if name == "sam":
        if "rho" not in opts:
            raise ContractViolationError("sam requires rho")
        rho = opts.pop("rho")
        if opts:
            raise ContractViolationError(f"unknown sam options {sorted(opts)}")
        return SamDriver(
            x0, rho, weight_decay=weight_decay, record_full_gradient=record_full_gradient
        )
    if name == "vasso":
        if "rho" not in opts:
            raise ContractViolationError("vasso requires rho")
        rho = opts.pop("rho")
        theta = opts.pop("theta", 0.9)
        theta_on_fresh = opts.pop("theta_on_fresh", VASSO_THETA_ON_FRESH)
        if opts:
            raise ContractViolationError(f"unknown vasso options {sorted(opts)}")
        return VassoDriver(
            x0, rho, theta, weight_decay=weight_decay,
            record_full_gradient=record_full_gradient, theta_on_fresh=theta_on_fresh,
        )
    if name == "samar":
        try:
            cfg = SamarConfig(**opts)
        except TypeError as exc:
            raise ContractViolationError(f"bad samar options: {exc}") from None
        return SamarDriver(
            x0, cfg, weight_decay=weight_decay, record_full_gradient=record_full_gradient
        )
    raise ContractViolationError(f"unknown optimizer {name!r}")
