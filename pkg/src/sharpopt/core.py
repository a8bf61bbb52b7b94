"""Shared numeric substrate for the optimizer library.

Everything downstream works on dense float64 parameter vectors. The norm is
Euclidean throughout. Randomness always flows through an explicitly seeded
PCG64 generator so that every run is reproducible bit for bit.

A problem is exposed to the optimizers through a `StochasticOracle`: loss and
gradient callables plus whatever constants (smoothness L, noise level sigma,
lower bound f_inf) the problem can honestly declare. Analytic problems declare
them; the neural-net problems leave them as None.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

# Gradient norms at or below this are treated as numerically zero.
GRAD_EPS = 1e-12


class ContractViolationError(ValueError):
    """An argument broke a documented precondition (shape, range, ordering)."""


class NumericDomainError(ValueError):
    """A value left the representable domain (NaN or infinity)."""


class ConfigurationError(ValueError):
    """An experiment configuration could not be resolved or validated."""


class ZeroGradientError(RuntimeError):
    """Gradient too close to zero to normalize a perturbation direction."""


class DegenerateRatioError(RuntimeError):
    """Previous gradient norm too small to form a meaningful ratio."""


class DivergenceDetected(RuntimeError):
    """Loss or iterate blew up; the run cannot continue."""


class VacuousBoundError(ValueError):
    """Requested bound has a non-positive leading coefficient and says nothing."""


def as_vector(values: Any) -> np.ndarray:
    """Copy `values` into a finite 1-D float64 array.

    Raises ContractViolationError for non-1-D input and NumericDomainError
    if any entry is NaN or infinite.
    """
    v = np.array(values, dtype=np.float64, copy=True)
    if v.ndim != 1 or v.size == 0:
        raise ContractViolationError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NumericDomainError("vector contains non-finite entries")
    return v


def norm(v: np.ndarray) -> float:
    """Euclidean norm of a parameter vector.

    Raises NumericDomainError when the input contains NaN/inf, so a silent
    overflow upstream cannot masquerade as a huge but valid norm.
    """
    if not np.all(np.isfinite(v)):
        raise NumericDomainError("norm of a non-finite vector")
    return float(np.linalg.norm(v))


def axpy(a: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Return a * x + y for same-dimension vectors."""
    if x.shape != y.shape:
        raise ContractViolationError(f"axpy shape mismatch: {x.shape} vs {y.shape}")
    return a * x + y


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator. Same seed, same stream, on every platform."""
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass
class StochasticOracle:
    """Loss/gradient access for one problem instance.

    `next_batch(rng)` draws whatever the problem means by a minibatch: an
    index array for dataset problems, a noise vector for additive-noise
    problems, None for deterministic ones. Passing the same batch handle to
    `stochastic_gradient` twice evaluates both gradients on the same
    realization, which the two-point optimizers rely on.

    Dataset batches are drawn without replacement per epoch behind a seeded
    shuffle; the cursor lives inside the oracle, so one oracle serves one run.

    Optional fields:
      batch_loss               loss on one drawn batch; step diagnostics use
                               it when present so dataset problems do not pay
                               a full forward pass per step, and fall back to
                               loss_at otherwise
      full_gradient            exact gradient of the full objective
      next_batch_many          draws n batches at once for Monte-Carlo work
      stochastic_gradient_many vectorized form, (x, batches) -> (n, dim),
                               used to speed up Monte-Carlo checks
      lipschitz_constant       L with ||grad f(x) - grad f(y)|| <= L ||x - y||
      noise_bound              sigma with E||g - grad f||^2 <= sigma^2
      lower_bound              f_inf with f(x) >= f_inf everywhere
    """

    dimension: int
    loss_at: Callable[[np.ndarray], float]
    stochastic_gradient: Callable[[np.ndarray, Any], np.ndarray]
    next_batch: Callable[[Optional[np.random.Generator]], Any]
    batch_loss: Optional[Callable[[np.ndarray, Any], float]] = None
    full_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    next_batch_many: Optional[Callable[[Optional[np.random.Generator], int], Any]] = None
    stochastic_gradient_many: Optional[Callable[[np.ndarray, Any], np.ndarray]] = None
    lipschitz_constant: Optional[float] = None
    noise_bound: Optional[float] = None
    lower_bound: Optional[float] = None
    extras: dict = field(default_factory=dict)
