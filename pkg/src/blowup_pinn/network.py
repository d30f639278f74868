"""Fully-connected tanh networks with exact input-derivatives and parameter gradients.

The forward pass propagates, next to each activation vector, the jacobian of that
vector with respect to the network inputs (a first-order jet). Parameter gradients
of losses that depend on both the outputs and their input-derivatives are obtained
by a manual reverse sweep over the recorded jet computation, so no finite
differencing and no external autodiff framework is involved. Everything is float64.

Flat parameter ordering (fixed, checkpoints depend on it): layer-major, weight
matrix before bias vector, matrices in row-major (C) order.

Note: the activation is hyperbolic tangent on hidden layers and identity on the
output layer. The underlying paper never states an activation; tanh is used
because the residual operators need a C1 surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

CHECKPOINT_MAGIC = "BLOWUP-PINN-CHECKPOINT v1"


class DimensionMismatchError(ValueError):
    """Input, parameter, or gradient shapes do not chain consistently."""


class NonFiniteLossError(RuntimeError):
    """A loss evaluation produced NaN/Inf; carries the offending collocation point."""

    def __init__(self, message: str, point: np.ndarray | None = None):
        super().__init__(message)
        self.point = None if point is None else np.asarray(point, dtype=float)


@dataclass(frozen=True)
class NetworkParams:
    """Immutable weights/biases of a fully-connected tanh network."""

    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise DimensionMismatchError(f"need >= 2 positive layer sizes, got {sizes}")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise DimensionMismatchError("one weight matrix and bias per layer transition")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[l + 1], sizes[l]) or b.shape != (sizes[l + 1],):
                raise DimensionMismatchError(
                    f"layer {l}: expected W{(sizes[l + 1], sizes[l])}, b{(sizes[l + 1],)}, "
                    f"got W{w.shape}, b{b.shape}"
                )
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass(frozen=True)
class JetValue:
    """Network output together with its exact jacobian w.r.t. the inputs."""

    value: np.ndarray            # (output_dim,)
    input_jacobian: np.ndarray   # (output_dim, input_dim)


def init_params(layer_sizes: Sequence[int], seed: int) -> NetworkParams:
    """Glorot-uniform weights (fan-in/fan-out scaling), zero biases, seeded."""
    sizes = tuple(int(s) for s in layer_sizes)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(sizes, tuple(weights), tuple(biases))


def flatten(params: NetworkParams) -> np.ndarray:
    """Flat parameter vector: per layer, row-major W then b."""
    parts = []
    for w, b in zip(params.weights, params.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def unflatten(layer_sizes: Sequence[int], flat: np.ndarray) -> NetworkParams:
    sizes = tuple(int(s) for s in layer_sizes)
    flat = np.asarray(flat, dtype=float)
    need = sum(fo * fi + fo for fi, fo in zip(sizes[:-1], sizes[1:]))
    if flat.size != need:
        raise DimensionMismatchError(f"flat vector has {flat.size} entries, expected {need}")
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(flat[pos:pos + fan_out * fan_in].reshape(fan_out, fan_in).copy())
        pos += fan_out * fan_in
        biases.append(flat[pos:pos + fan_out].copy())
        pos += fan_out
    if pos != flat.size:
        raise DimensionMismatchError(f"flat vector has {flat.size} entries, expected {pos}")
    return NetworkParams(sizes, tuple(weights), tuple(biases))


def _as_batch(params: NetworkParams, point: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(point, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise DimensionMismatchError(
            f"point has shape {np.asarray(point).shape}, input dim is {params.input_dim}"
        )
    return x, single


def forward(params: NetworkParams, point: np.ndarray) -> np.ndarray:
    """Evaluate the network at one point (k,) or a batch (N, k)."""
    x, single = _as_batch(params, point)
    a = x
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        a = z if l == last else np.tanh(z)
    return a[0] if single else a


def forward_jet(params: NetworkParams, point: np.ndarray) -> JetValue:
    """Evaluate value and exact input-jacobian at a single point."""
    values, jets = forward_jet_batch(params, np.asarray(point, dtype=float)[None, :])
    return JetValue(value=values[0], input_jacobian=jets[0])


def forward_jet_batch(params: NetworkParams, points: np.ndarray):
    """Batched jet evaluation: values (N, d_out) and jacobians (N, d_out, d_in)."""
    values, jets, _ = _forward_pass(params, points, record=False)
    return values, jets


def _forward_pass(params: NetworkParams, points: np.ndarray, record: bool = True):
    """Forward + jet propagation, recording what the reverse sweep needs.

    Jets are carried in layout (d_in, N, layer_width) — one batch slab per
    input coordinate — so every jet update is a single large GEMM. Cache entry
    per layer: (a_prev, j_prev, jz, a, s) where z = a_prev W^T + b,
    jz = j_prev W^T (jet pre-activation), s = 1 - tanh(z)^2 on hidden layers
    (None on the linear output layer).
    """
    x, single = _as_batch(params, points)
    if single:
        raise DimensionMismatchError("_forward_pass expects a batch")
    n, din = x.shape
    a = x
    j = np.zeros((din, n, din))
    for k in range(din):
        j[k, :, k] = 1.0
    caches = []
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        jz = (j.reshape(din * n, -1) @ w.T).reshape(din, n, -1)
        if l == last:
            if record:
                caches.append((a, j, jz, z, None))
            a, j = z, jz
        else:
            a_next = np.tanh(z, out=z)
            s = a_next * a_next
            np.subtract(1.0, s, out=s)
            if record:
                caches.append((a, j, jz, a_next, s))
                j = s[None, :, :] * jz
            else:
                jz *= s[None, :, :]
                j = jz
            a = a_next
    # jets back in (N, d_out, d_in) layout for callers
    return a, j.transpose(1, 2, 0), caches


def _backward_pass(params: NetworkParams, caches, dvalues: np.ndarray,
                   djets: np.ndarray | None):
    """Reverse sweep producing the flat parameter gradient.

    dvalues is dL/d(output values), (N, d_out); djets is dL/d(output jacobian),
    (N, d_out, d_in) or None when the loss ignores input-derivatives.
    """
    n, din = caches[0][0].shape[0], params.input_dim
    abar = np.asarray(dvalues, dtype=float)
    if djets is None:
        jbar = np.zeros((din, n, params.output_dim))
    else:
        # callers hand (N, d_out, d_in); internal jet layout is (d_in, N, width)
        jbar = np.ascontiguousarray(np.asarray(djets, dtype=float).transpose(2, 0, 1))
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.weights)
    last = len(params.weights) - 1
    for l in range(last, -1, -1):
        w = params.weights[l]
        a_prev, j_prev, jz, a, s = caches[l]
        if s is None:                      # linear output layer
            zbar, jzbar = abar, jbar
        else:                              # a = tanh(z), j_out = s * jz
            zbar = (jbar * jz).sum(axis=0)
            zbar *= -2.0 * a
            zbar += abar
            zbar *= s
            jbar *= s[None, :, :]
            jzbar = jbar
        n_out, n_prev = w.shape
        gw_jet = jzbar.reshape(din * n, n_out).T @ j_prev.reshape(din * n, n_prev)
        grads_w[l] = zbar.T @ a_prev + gw_jet
        grads_b[l] = zbar.sum(axis=0)
        if l > 0:
            abar = zbar @ w
            jbar = (jzbar.reshape(din * n, n_out) @ w).reshape(din, n, n_prev)
    parts = []
    for gw, gb in zip(grads_w, grads_b):
        parts.append(gw.ravel())
        parts.append(gb)
    return np.concatenate(parts)


@dataclass(frozen=True)
class LossTerm:
    """One additive term of a composite residual loss.

    ``fn(values, jets)`` receives the network outputs and input-jacobians at
    ``points`` and returns ``(loss, dloss_dvalues, dloss_djets)``; the jet
    gradient may be None for terms that only look at values.
    """

    points: np.ndarray
    fn: Callable[[np.ndarray, np.ndarray], tuple[float, np.ndarray, np.ndarray | None]]
    name: str = "term"


def loss_value(params: NetworkParams, terms: Sequence[LossTerm]) -> float:
    total = 0.0
    for term in terms:
        values, jets = forward_jet_batch(params, term.points)
        loss, _, _ = term.fn(values, jets)
        total += loss
    return total


def loss_and_grad(params: NetworkParams, terms: Sequence[LossTerm]):
    """Composite loss and its exact flat gradient d(loss)/d(theta)."""
    total = 0.0
    grad = np.zeros(params.n_params)
    for term in terms:
        values, jets, caches = _forward_pass(params, term.points)
        loss, dv, dj = term.fn(values, jets)
        if not np.isfinite(loss):
            bad = ~(np.isfinite(values).all(axis=1) & np.isfinite(jets).all(axis=(1, 2)))
            idx = int(np.argmax(bad)) if bad.any() else 0
            raise NonFiniteLossError(
                f"non-finite loss in term '{term.name}' at point {term.points[idx]}",
                point=term.points[idx],
            )
        total += loss
        grad += _backward_pass(params, caches, dv, dj)
    return total, grad


def save_checkpoint(path, params: NetworkParams, seed: int, iteration: int) -> None:
    """Versioned text checkpoint: magic header, shapes, seed, iteration, flat params."""
    flat = flatten(params)
    with open(path, "w") as fh:
        fh.write(CHECKPOINT_MAGIC + "\n")
        fh.write("layer_sizes: " + ",".join(str(s) for s in params.layer_sizes) + "\n")
        fh.write(f"seed: {seed}\n")
        fh.write(f"iteration: {iteration}\n")
        fh.write(f"n_params: {flat.size}\n")
        for v in flat:
            fh.write(repr(float(v)) + "\n")


def load_checkpoint(path) -> tuple[NetworkParams, int, int]:
    """Load a checkpoint, returning (params, seed, iteration)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a recognized checkpoint (bad magic header)")
    header = {}
    for ln in lines[1:5]:
        key, _, val = ln.partition(":")
        header[key.strip()] = val.strip()
    sizes = tuple(int(s) for s in header["layer_sizes"].split(","))
    seed = int(header["seed"])
    iteration = int(header["iteration"])
    count = int(header["n_params"])
    flat = np.array([float(v) for v in lines[5:5 + count]])
    if flat.size != count:
        raise ValueError(f"{path}: expected {count} parameters, found {flat.size}")
    return unflatten(sizes, flat), seed, iteration
