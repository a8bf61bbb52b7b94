"""Desk-scale test problems and their stochastic oracles.

Four families: noisy quadratics and the Rosenbrock chain for analytic work,
l2-regularized logistic regression and a small tanh MLP for classification.
The analytic problems declare their smoothness and noise constants so the
convergence-bound machinery can run against them; the MLP declares none.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    ContractViolationError,
    GRAD_EPS,
    StochasticOracle,
    as_vector,
    make_rng,
)


class _EpochSampler:
    """Without-replacement minibatch cursor, reshuffled once per epoch.

    Indices inside a batch come back sorted, so a batch covering the whole
    set reproduces the full-data gradient exactly (same summation order).
    """

    def __init__(self, n: int, batch_size: int):
        if not 1 <= batch_size <= n:
            raise ContractViolationError(f"batch_size {batch_size} not in [1, {n}]")
        self.n = n
        self.batch_size = batch_size
        self._order: Optional[np.ndarray] = None
        self._pos = 0

    def next(self, rng: np.random.Generator) -> np.ndarray:
        if self._order is None or self._pos >= self.n:
            self._order = rng.permutation(self.n)
            self._pos = 0
        idx = self._order[self._pos : self._pos + self.batch_size]
        self._pos += self.batch_size
        return np.sort(idx)


# ---------------------------------------------------------------------------
# quadratics: f(x) = 0.5 x'Ax - b'x, gradient noise N(0, noise_sigma^2 I)
# ---------------------------------------------------------------------------


@dataclass
class QuadraticProblem:
    a: np.ndarray
    b: np.ndarray
    noise_sigma: float = 0.0

    def __post_init__(self):
        self.a = np.array(self.a, dtype=np.float64)
        self.b = as_vector(self.b)
        if self.a.ndim != 2 or self.a.shape[0] != self.a.shape[1]:
            raise ContractViolationError(f"A must be square, got {self.a.shape}")
        if self.a.shape[0] != self.b.size:
            raise ContractViolationError("A and b dimensions disagree")
        if not np.allclose(self.a, self.a.T, atol=1e-12, rtol=0.0):
            raise ContractViolationError("A must be symmetric")
        eigs = np.linalg.eigvalsh(self.a)
        if eigs[0] < -1e-10:
            raise ContractViolationError("A must be positive semidefinite")
        if self.noise_sigma < 0.0:
            raise ContractViolationError("noise_sigma must be >= 0")
        self._eig_min = float(eigs[0])
        self._eig_max = float(eigs[-1])

    @property
    def dim(self) -> int:
        return self.b.size

    def loss(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.a @ x - self.b @ x)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.a @ x - self.b

    @property
    def lipschitz(self) -> float:
        return self._eig_max

    @property
    def f_inf(self) -> Optional[float]:
        """Infimum of the loss, None when the problem is unbounded below."""
        if self._eig_min > 1e-10:
            x_star = np.linalg.solve(self.a, self.b)
            return float(-0.5 * self.b @ x_star)
        if float(np.linalg.norm(self.b)) == 0.0:
            return 0.0
        return None

    @property
    def sigma_total(self) -> float:
        # E||xi||^2 = dim * noise_sigma^2 for coordinatewise N(0, noise_sigma^2)
        return float(np.sqrt(self.dim) * self.noise_sigma)


def quadratic_oracle(p: QuadraticProblem, rng: np.random.Generator) -> StochasticOracle:
    """Oracle with additive Gaussian gradient noise; a batch is one noise draw."""

    def next_batch(gen: Optional[np.random.Generator] = None):
        gen = rng if gen is None else gen
        if p.noise_sigma == 0.0:
            return None
        return p.noise_sigma * gen.standard_normal(p.dim)

    def stochastic_gradient(x: np.ndarray, batch) -> np.ndarray:
        g = p.grad(x)
        if batch is None:
            return g
        return g + batch

    def next_batch_many(gen: Optional[np.random.Generator], n: int):
        gen = rng if gen is None else gen
        if p.noise_sigma == 0.0:
            return None
        return p.noise_sigma * gen.standard_normal((n, p.dim))

    def stochastic_gradient_many(x: np.ndarray, batches) -> np.ndarray:
        g = p.grad(x)
        if batches is None:
            return g[None, :]
        return g[None, :] + np.asarray(batches)

    return StochasticOracle(
        dimension=p.dim,
        loss_at=p.loss,
        stochastic_gradient=stochastic_gradient,
        next_batch=next_batch,
        full_gradient=p.grad,
        next_batch_many=next_batch_many,
        stochastic_gradient_many=stochastic_gradient_many,
        lipschitz_constant=p.lipschitz,
        noise_bound=p.sigma_total,
        lower_bound=p.f_inf,
    )


def diagonal_quadratic(
    dim: int, eig_min: float, eig_max: float, noise_sigma: float = 0.0
) -> QuadraticProblem:
    """Diagonal SPD quadratic with evenly spaced eigenvalues and b = 0."""
    eigs = np.linspace(eig_min, eig_max, dim)
    return QuadraticProblem(a=np.diag(eigs), b=np.zeros(dim), noise_sigma=noise_sigma)


# ---------------------------------------------------------------------------
# Rosenbrock chain, the standard nonconvex sanity check
# ---------------------------------------------------------------------------


def rosenbrock_loss(x: np.ndarray) -> float:
    """f(x) = sum_i 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2, minimum 0 at ones."""
    if x.size < 2:
        raise ContractViolationError("rosenbrock needs dimension >= 2")
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def rosenbrock_grad(x: np.ndarray) -> np.ndarray:
    if x.size < 2:
        raise ContractViolationError("rosenbrock needs dimension >= 2")
    g = np.zeros_like(x)
    g[:-1] += -400.0 * x[:-1] * (x[1:] - x[:-1] ** 2) - 2.0 * (1.0 - x[:-1])
    g[1:] += 200.0 * (x[1:] - x[:-1] ** 2)
    return g


def rosenbrock_oracle(dim: int, rng: np.random.Generator) -> StochasticOracle:
    """Deterministic oracle; the stochastic gradient is the exact gradient."""

    def next_batch(gen: Optional[np.random.Generator] = None):
        return None

    def stochastic_gradient(x: np.ndarray, batch) -> np.ndarray:
        return rosenbrock_grad(x)

    return StochasticOracle(
        dimension=dim,
        loss_at=rosenbrock_loss,
        stochastic_gradient=stochastic_gradient,
        next_batch=next_batch,
        full_gradient=rosenbrock_grad,
        lipschitz_constant=None,  # gradient is not globally Lipschitz
        noise_bound=0.0,
        lower_bound=0.0,
    )


# ---------------------------------------------------------------------------
# synthetic 2-D datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    """Named dataset recipe. Same spec and seed regenerate the same arrays."""

    name: str
    params: dict = field(default_factory=dict)


@dataclass
class SyntheticDataset:
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    spec: GeneratorSpec
    seed: int

    @property
    def n_classes(self) -> int:
        return int(max(self.train_y.max(), self.test_y.max())) + 1

    @property
    def d_in(self) -> int:
        return self.train_x.shape[1]


def _blobs(rng, n_per_class, classes, center_scale, spread):
    xs, ys = [], []
    for c in range(classes):
        angle = 2.0 * np.pi * c / classes
        center = center_scale * np.array([np.cos(angle), np.sin(angle)])
        xs.append(center + spread * rng.standard_normal((n_per_class, 2)))
        ys.append(np.full(n_per_class, c, dtype=np.int64))
    return np.concatenate(xs), np.concatenate(ys)


def _spirals(rng, n_per_class, t_min, t_max, noise, scale):
    xs, ys = [], []
    for c in range(2):
        t = rng.uniform(t_min, t_max, n_per_class)
        r = t / t_max * scale
        phi = t + c * np.pi
        pts = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
        pts += noise * rng.standard_normal((n_per_class, 2))
        xs.append(pts)
        ys.append(np.full(n_per_class, c, dtype=np.int64))
    return np.concatenate(xs), np.concatenate(ys)


def generate_dataset(spec: GeneratorSpec, seed: int) -> SyntheticDataset:
    """Build a class-balanced train/test split from a named recipe.

    Recipes:
      gaussian-blobs  params: train_per_class=1000, test_per_class=250,
                      classes=2, center_scale=2.0, spread=0.6
      two-spirals     params: train_per_class=1000, test_per_class=250,
                      t_min, t_max, noise=0.15, scale=3.0, label_noise=0.0
                      (label_noise flips that fraction of train labels)

    Train and test points are disjoint draws; per class, the first
    train_per_class samples go to train and the rest to test.
    """
    rng = make_rng(seed)
    p = dict(spec.params)
    train_pc = int(p.pop("train_per_class", 1000))
    test_pc = int(p.pop("test_per_class", 250))
    n_pc = train_pc + test_pc

    if spec.name == "gaussian-blobs":
        classes = int(p.pop("classes", 2))
        center_scale = float(p.pop("center_scale", 2.0))
        spread = float(p.pop("spread", 0.6))
        label_noise = float(p.pop("label_noise", 0.0))
        if p:
            raise ContractViolationError(f"unknown gaussian-blobs params: {sorted(p)}")
        x, y = _blobs(rng, n_pc, classes, center_scale, spread)
    elif spec.name == "two-spirals":
        t_min = float(p.pop("t_min", 0.5 * np.pi))
        t_max = float(p.pop("t_max", 2.0 * np.pi))
        noise = float(p.pop("noise", 0.15))
        scale = float(p.pop("scale", 3.0))
        label_noise = float(p.pop("label_noise", 0.0))
        classes = 2
        if p:
            raise ContractViolationError(f"unknown two-spirals params: {sorted(p)}")
        x, y = _spirals(rng, n_pc, t_min, t_max, noise, scale)
    else:
        raise ContractViolationError(f"unknown dataset recipe {spec.name!r}")

    train_idx, test_idx = [], []
    for c in range(classes):
        block = np.flatnonzero(y == c)
        train_idx.append(block[:train_pc])
        test_idx.append(block[train_pc:])
    train_idx = np.concatenate(train_idx)
    test_idx = np.concatenate(test_idx)

    train_y = y[train_idx].copy()
    if label_noise > 0.0:
        n_flip = int(round(label_noise * train_y.size))
        flip = rng.choice(train_y.size, size=n_flip, replace=False)
        train_y[flip] = (train_y[flip] + 1 + rng.integers(0, classes - 1, n_flip)) % classes

    return SyntheticDataset(
        train_x=x[train_idx].copy(),
        train_y=train_y,
        test_x=x[test_idx].copy(),
        test_y=y[test_idx].copy(),
        spec=spec,
        seed=seed,
    )


def dataset_to_csv(ds: SyntheticDataset, train_path, test_path) -> None:
    """Write train/test splits as CSV with columns f0..fk,label."""
    for path, x, y in ((train_path, ds.train_x, ds.train_y), (test_path, ds.test_x, ds.test_y)):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"f{i}" for i in range(x.shape[1])] + ["label"])
            for row, label in zip(x, y):
                w.writerow([repr(float(v)) for v in row] + [int(label)])


def dataset_from_csv(train_path, test_path) -> SyntheticDataset:
    def load(path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in r[:-1]] for r in rows[1:]])
        labels = np.array([int(r[-1]) for r in rows[1:]], dtype=np.int64)
        return data, labels

    train_x, train_y = load(train_path)
    test_x, test_y = load(test_path)
    return SyntheticDataset(
        train_x, train_y, test_x, test_y, spec=GeneratorSpec("imported"), seed=-1
    )


# ---------------------------------------------------------------------------
# logistic regression
# ---------------------------------------------------------------------------


@dataclass
class LogisticProblem:
    """Binary logistic regression with an optional l2 term.

    f(x) = mean_i log(1 + exp(-y_i <x, X_i>)) + 0.5 l2 ||x||^2 with y_i = +-1.
    Hessian is bounded by X'X / (4n) + l2 I since the logistic curvature never
    exceeds 1/4, which gives the declared Lipschitz constant.
    """

    features: np.ndarray
    labels: np.ndarray
    l2_coeff: float = 0.0

    def __post_init__(self):
        self.features = np.array(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ContractViolationError("features must be 2-D")
        if self.labels.shape != (self.features.shape[0],):
            raise ContractViolationError("one label per row required")
        if not np.all(np.isin(self.labels, (0, 1))):
            raise ContractViolationError("labels must be in {0, 1}")
        if self.l2_coeff < 0.0:
            raise ContractViolationError("l2_coeff must be >= 0")
        self._sign = 2.0 * self.labels - 1.0

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def lipschitz(self) -> float:
        op = float(np.linalg.norm(self.features, 2))
        return op * op / (4.0 * self.n) + self.l2_coeff

    def _loss_rows(self, x: np.ndarray, rows: np.ndarray) -> float:
        m = self._sign[rows] * (self.features[rows] @ x)
        data = float(np.mean(np.logaddexp(0.0, -m)))
        return data + 0.5 * self.l2_coeff * float(x @ x)

    def _grad_rows(self, x: np.ndarray, rows: np.ndarray) -> np.ndarray:
        xs = self.features[rows]
        sign = self._sign[rows]
        m = sign * (xs @ x)
        # sigmoid(-m) computed as exp(-log(1 + e^m)) to stay finite for large m
        w = np.exp(-np.logaddexp(0.0, m))
        g = -(xs.T @ (sign * w)) / rows.size
        return g + self.l2_coeff * x

    def loss(self, x: np.ndarray) -> float:
        return self._loss_rows(x, np.arange(self.n))

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self._grad_rows(x, np.arange(self.n))

    def predict(self, x: np.ndarray, features: np.ndarray) -> np.ndarray:
        # strict inequality sends a zero margin to class 0 (lowest index)
        return (features @ x > 0.0).astype(np.int64)


def logistic_oracle(
    p: LogisticProblem, batch_size: int, rng: np.random.Generator
) -> StochasticOracle:
    sampler = _EpochSampler(p.n, batch_size)

    def next_batch(gen: Optional[np.random.Generator] = None):
        return sampler.next(rng if gen is None else gen)

    def stochastic_gradient(x: np.ndarray, batch) -> np.ndarray:
        return p._grad_rows(x, batch)

    return StochasticOracle(
        dimension=p.dim,
        loss_at=p.loss,
        stochastic_gradient=stochastic_gradient,
        next_batch=next_batch,
        batch_loss=p._loss_rows,
        full_gradient=p.grad,
        lipschitz_constant=p.lipschitz,
        noise_bound=None,
        lower_bound=0.0,
    )


# ---------------------------------------------------------------------------
# small dense MLP with hand-written backprop
# ---------------------------------------------------------------------------


@dataclass
class MlpProblem:
    """Fully connected net on a SyntheticDataset, parameters as one flat vector.

    layer_sizes runs input through hidden widths to the class count, e.g.
    (2, 32, 2). Hidden activation is tanh by default; "identity" exists so a
    linear net can be checked against the least-squares gradient. Loss is
    mean softmax cross-entropy, or "squared" for 0.5 ||logits - onehot||^2.
    """

    layer_sizes: Sequence[int]
    dataset: SyntheticDataset
    activation: str = "tanh"
    loss_kind: str = "softmax-ce"

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2:
            raise ContractViolationError("need at least input and output sizes")
        if self.layer_sizes[0] != self.dataset.d_in:
            raise ContractViolationError("first layer size must match dataset features")
        if self.layer_sizes[-1] != self.dataset.n_classes:
            raise ContractViolationError("last layer size must match class count")
        if self.activation not in ("tanh", "identity"):
            raise ContractViolationError(f"unknown activation {self.activation!r}")
        if self.loss_kind not in ("softmax-ce", "squared"):
            raise ContractViolationError(f"unknown loss {self.loss_kind!r}")

    @property
    def dim(self) -> int:
        sizes = self.layer_sizes
        return sum((sizes[i] + 1) * sizes[i + 1] for i in range(len(sizes) - 1))

    @property
    def n_train(self) -> int:
        return self.dataset.train_y.size

    def initial_params(self, rng: np.random.Generator) -> np.ndarray:
        """Glorot-uniform weights, zero biases, flattened."""
        parts = []
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            limit = np.sqrt(6.0 / (n_in + n_out))
            parts.append(rng.uniform(-limit, limit, n_in * n_out))
            parts.append(np.zeros(n_out))
        return np.concatenate(parts)

    def _unpack(self, x: np.ndarray):
        if x.size != self.dim:
            raise ContractViolationError(f"parameter vector size {x.size}, expected {self.dim}")
        layers = []
        pos = 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = x[pos : pos + n_in * n_out].reshape(n_in, n_out)
            pos += n_in * n_out
            b = x[pos : pos + n_out]
            pos += n_out
            layers.append((w, b))
        return layers

    def _forward(self, x: np.ndarray, data: np.ndarray):
        layers = self._unpack(x)
        acts = [data]
        for i, (w, b) in enumerate(layers):
            z = acts[-1] @ w + b
            if i < len(layers) - 1 and self.activation == "tanh":
                acts.append(np.tanh(z))
            else:
                acts.append(z)
        return layers, acts

    def logits(self, x: np.ndarray, data: np.ndarray) -> np.ndarray:
        return self._forward(x, data)[1][-1]

    def _loss_from_logits(self, logits: np.ndarray, labels: np.ndarray) -> float:
        n, c = logits.shape
        if self.loss_kind == "softmax-ce":
            m = logits.max(axis=1, keepdims=True)
            lse = m[:, 0] + np.log(np.sum(np.exp(logits - m), axis=1))
            return float(np.mean(lse - logits[np.arange(n), labels]))
        target = np.zeros((n, c))
        target[np.arange(n), labels] = 1.0
        return float(0.5 * np.sum((logits - target) ** 2) / n)

    def _loss_grad_batch(self, x: np.ndarray, data: np.ndarray, labels: np.ndarray):
        layers, acts = self._forward(x, data)
        logits = acts[-1]
        n, c = logits.shape
        target = np.zeros((n, c))
        target[np.arange(n), labels] = 1.0
        if self.loss_kind == "softmax-ce":
            m = logits.max(axis=1, keepdims=True)
            e = np.exp(logits - m)
            probs = e / e.sum(axis=1, keepdims=True)
            delta = (probs - target) / n
        else:
            delta = (logits - target) / n
        grads = [None] * len(layers)
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = delta @ w.T
                if self.activation == "tanh":
                    delta = delta * (1.0 - acts[i] ** 2)
        flat = np.concatenate([np.concatenate((gw.ravel(), gb)) for gw, gb in grads])
        return self._loss_from_logits(logits, labels), flat

    def loss_full(self, x: np.ndarray) -> float:
        logits = self.logits(x, self.dataset.train_x)
        return self._loss_from_logits(logits, self.dataset.train_y)

    def grad_full(self, x: np.ndarray) -> np.ndarray:
        return self._loss_grad_batch(x, self.dataset.train_x, self.dataset.train_y)[1]

    def grad_batch(self, x: np.ndarray, rows: np.ndarray) -> np.ndarray:
        return self._loss_grad_batch(
            x, self.dataset.train_x[rows], self.dataset.train_y[rows]
        )[1]

    def loss_batch(self, x: np.ndarray, rows: np.ndarray) -> float:
        logits = self.logits(x, self.dataset.train_x[rows])
        return self._loss_from_logits(logits, self.dataset.train_y[rows])

    def topk_accuracy(self, x: np.ndarray, data: np.ndarray, labels: np.ndarray, k: int) -> float:
        logits = self.logits(x, data)
        k_eff = min(k, logits.shape[1])
        # stable sort keeps ties ordered by class index
        order = np.argsort(-logits, axis=1, kind="stable")[:, :k_eff]
        return float(np.mean(np.any(order == labels[:, None], axis=1)))


def mlp_oracle(p: MlpProblem, batch_size: int, rng: np.random.Generator) -> StochasticOracle:
    sampler = _EpochSampler(p.n_train, batch_size)

    def next_batch(gen: Optional[np.random.Generator] = None):
        return sampler.next(rng if gen is None else gen)

    def stochastic_gradient(x: np.ndarray, batch) -> np.ndarray:
        return p.grad_batch(x, batch)

    return StochasticOracle(
        dimension=p.dim,
        loss_at=p.loss_full,
        stochastic_gradient=stochastic_gradient,
        next_batch=next_batch,
        batch_loss=p.loss_batch,
        full_gradient=p.grad_full,
    )
