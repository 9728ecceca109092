"""Deterministic mini-batch trainer shared by the sequence networks and the FNN baselines."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .debug import log_epoch
from .errors import DomainError, NumericError, TrainingError
from .model import OPTIMIZER
from .seqnet import NetworkParams, loss_and_gradients, stack_samples

Blocks = Dict[str, np.ndarray]
LossAndGrad = Callable[[Blocks, np.ndarray, np.ndarray], Tuple[float, Blocks]]


@dataclass(frozen=True)
class TrainHyperparams:
    epochs: int = 200
    batch_size: int = 10
    learning_rate: float = 1e-3
    seed: int = 0
    optimizer: OPTIMIZER = OPTIMIZER.ADAM
    clip_norm: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "optimizer", OPTIMIZER(self.optimizer))
        if self.epochs < 0:
            raise DomainError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise DomainError(f"batch_size must be positive, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise DomainError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.seed < 0:
            raise DomainError(f"seed must be unsigned, got {self.seed}")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise DomainError(f"clip_norm must be positive when set, got {self.clip_norm}")


class Sgd:
    def __init__(self, learning_rate: float) -> None:
        self.learning_rate = learning_rate

    def step(self, params: Blocks, grads: Blocks) -> None:
        for name, g in grads.items():
            params[name] -= self.learning_rate * g


class Adam:
    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m: Blocks = {}
        self._v: Blocks = {}
        self._t = 0

    def step(self, params: Blocks, grads: Blocks) -> None:
        self._t += 1
        corr1 = 1.0 - self.beta1 ** self._t
        corr2 = 1.0 - self.beta2 ** self._t
        for name, g in grads.items():
            m = self._m.setdefault(name, np.zeros_like(g))
            v = self._v.setdefault(name, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] -= self.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + self.eps)


def make_optimizer(hyper: TrainHyperparams):
    if hyper.optimizer is OPTIMIZER.SGD:
        return Sgd(hyper.learning_rate)
    return Adam(hyper.learning_rate)


def clip_global_norm(grads: Blocks, max_norm: float | None) -> Blocks:
    if max_norm is None:
        return grads
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if total <= max_norm:
        return grads
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}


def fit_blocks(
    blocks: Blocks,
    loss_and_grad: LossAndGrad,
    X: np.ndarray,
    Y: np.ndarray,
    hyper: TrainHyperparams,
    label: str = "train",
) -> Tuple[Blocks, List[float]]:
    """Run ``hyper.epochs`` passes of shuffled mini-batch descent over (X, Y).

    Batches are drawn from one ``PCG64`` stream seeded by ``hyper.seed``; the
    final partial batch of an epoch is kept.  Each history entry is the
    size-weighted mean of the batch losses seen during that epoch.
    """
    n = int(X.shape[0])
    if n == 0:
        raise DomainError("training set is empty")
    if hyper.batch_size > n:
        raise DomainError(
            f"batch_size={hyper.batch_size} exceeds the training set size {n}.\n"
            "  Tip: lower --batch-size or provide more feeder history."
        )
    params = {k: np.array(v, dtype=np.float64) for k, v in blocks.items()}
    if hyper.epochs == 0:
        return params, []
    rng = np.random.Generator(np.random.PCG64(hyper.seed))
    opt = make_optimizer(hyper)
    history: List[float] = []
    for epoch in range(1, hyper.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            try:
                loss, grads = loss_and_grad(params, X[idx], Y[idx])
            except NumericError as exc:
                raise TrainingError(f"{label}: training diverged at epoch {epoch} ({exc})", epoch=epoch) from exc
            if not np.isfinite(loss):
                raise TrainingError(f"{label}: loss became non-finite at epoch {epoch}", epoch=epoch)
            opt.step(params, clip_global_norm(grads, hyper.clip_norm))
            total += loss * len(idx)
        history.append(total / n)
        log_epoch(label, epoch, history[-1])
    return params, history


def train_arrays(net: NetworkParams, X, Y, hyper: TrainHyperparams) -> Tuple[NetworkParams, List[float]]:
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64).reshape(X.shape[0], -1)

    def _loss_and_grad(blocks: Blocks, xb: np.ndarray, yb: np.ndarray):
        return loss_and_gradients(net.with_blocks(blocks), xb, yb)

    label = f"{net.cell_kind.value}/{net.config.value}"
    blocks, history = fit_blocks(net.blocks(), _loss_and_grad, X, Y, hyper, label)
    if not history:
        return net, history
    return net.with_blocks(blocks), history


def train(net: NetworkParams, train_set: Sequence, hyper: TrainHyperparams) -> Tuple[NetworkParams, List[float]]:
    """Fit *net* to normalized sequence samples; returns (params, per-epoch loss)."""
    if not train_set:
        raise DomainError("training set is empty")
    X, Y = stack_samples(train_set)
    return train_arrays(net, X, Y, hyper)
