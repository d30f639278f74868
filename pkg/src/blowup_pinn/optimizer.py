"""Full-batch Adam with lowest-training-loss checkpointing.

The collocation set is sampled once and held fixed; every iteration evaluates
the full PINN loss and its exact gradient. Besides the final iterate, the
iterate with the lowest observed training loss is kept. Wall-clock time is
measured around the optimizer loop only (monotonic clock), excluding
collocation generation and bound evaluation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import problems
from .network import (NetworkParams, NonFiniteLossError, flatten, init_params,
                      loss_and_grad, loss_value, unflatten)
from .sampling import CollocationSet

HISTORY_DENSE_UNTIL = 1000
HISTORY_STRIDE = 100


@dataclass(frozen=True)
class AdamState:
    lr: float
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n_params: int, lr: float, **kwargs) -> "AdamState":
        return cls(lr=lr, m=np.zeros(n_params), v=np.zeros(n_params), **kwargs)


@dataclass(frozen=True)
class BestIterate:
    params: NetworkParams
    loss: float
    iteration: int


@dataclass(frozen=True)
class TrainConfig:
    width: int
    depth: int           # number of affine layers; hidden tanh layers = depth - 1
    iterations: int
    lr: float
    seed: int


@dataclass
class TrainResult:
    best: BestIterate
    final_params: NetworkParams
    final_loss: float
    history: list = field(default_factory=list)   # (iteration, loss) pairs
    train_seconds: float = 0.0


class TrainingDivergedError(RuntimeError):
    """Training loss became non-finite; carries the partial loss history."""

    def __init__(self, message: str, history: list):
        super().__init__(message)
        self.history = history


def adam_step(state: AdamState, params: NetworkParams, grad: np.ndarray):
    """One bias-corrected Adam update. Returns (new_params, new_state)."""
    grad = np.asarray(grad, dtype=float)
    theta = flatten(params)
    if grad.shape != theta.shape:
        raise ValueError(f"gradient length {grad.size} != parameter count {theta.size}")
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient passed to adam_step")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    theta = theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return unflatten(params.layer_sizes, theta), replace(state, step=t, m=m, v=v)


def network_sizes(problem, config: TrainConfig) -> tuple[int, ...]:
    if config.depth < 2:
        raise ValueError("depth must be >= 2 (at least one hidden layer)")
    d = problem.spatial_dim
    return (d + 1, *([config.width] * (config.depth - 1)), d)


def train(problem, colloc: CollocationSet, config: TrainConfig) -> TrainResult:
    """Full-batch Adam on the empirical PINN loss over a fixed collocation set."""
    terms = problems.loss_terms(problem, colloc)
    params = init_params(network_sizes(problem, config), config.seed)
    state = AdamState.fresh(params.n_params, config.lr)
    history: list[tuple[int, float]] = []
    best_params, best_loss, best_iter = params, np.inf, 0

    start = time.perf_counter()
    for it in range(config.iterations):
        try:
            loss, grad = loss_and_grad(params, terms)
        except NonFiniteLossError as exc:
            raise TrainingDivergedError(
                f"training diverged at iteration {it}: {exc}", history) from exc
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"training diverged at iteration {it} (loss={loss})", history)
        if it < HISTORY_DENSE_UNTIL or it % HISTORY_STRIDE == 0:
            history.append((it, loss))
        if loss < best_loss:
            best_params, best_loss, best_iter = params, loss, it
        params, state = adam_step(state, params, grad)
    elapsed = time.perf_counter() - start

    final_loss = loss_value(params, terms)
    if np.isfinite(final_loss):
        history.append((config.iterations, final_loss))
        if final_loss < best_loss:
            best_params, best_loss, best_iter = params, final_loss, config.iterations
    return TrainResult(
        best=BestIterate(best_params, float(best_loss), best_iter),
        final_params=params,
        final_loss=float(final_loss),
        history=history,
        train_seconds=elapsed,
    )
