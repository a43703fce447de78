"""The granularity router: an MLP mapping a query embedding to per-level
weights in (0, 1), trained with elementwise binary cross entropy against
soft labels.

Hidden layers use ReLU, the output layer sigmoid; each output is an
independent per-level weight (sigmoid rather than softmax, because the
loss treats levels as independent Bernoulli targets). Training is plain
mini-batch Adam, fully deterministic given the seed.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, DimMismatch, DomainError

DEFAULT_HIDDEN = (256, 64)

# Sigmoid outputs are clamped to this band inside the loss and gradients.
_EPS = 1e-7


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    early_stop_patience: int = 10
    min_improvement: float = 1e-5

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass
class TrainExample:
    embedding: np.ndarray
    soft_label: np.ndarray


@dataclass
class RouterModel:
    """Per-layer weight matrices (out x in) and bias vectors."""

    layer_dims: list[int]
    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)
    seed: int = 0

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_gra(self) -> int:
        return self.layer_dims[-1]


def new_model(
    input_dim: int,
    n_gra: int,
    hidden: tuple[int, ...] = DEFAULT_HIDDEN,
    seed: int = 0,
) -> RouterModel:
    """He-uniform init for ReLU layers, Xavier-uniform for the sigmoid output."""
    dims = [input_dim, *hidden, n_gra]
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        last = i == len(dims) - 2
        limit = np.sqrt(6.0 / (fan_in + fan_out)) if last else np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return RouterModel(dims, weights, biases, seed)


def _forward_trace(model: RouterModel, x: np.ndarray) -> list[np.ndarray]:
    """Activations per layer for a batch (rows = examples); last is sigmoid."""
    act = x
    trace = [act]
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = act @ w.T + b
        act = _sigmoid(z) if i == last else np.maximum(z, 0.0)
        trace.append(act)
    return trace


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(model: RouterModel, e_q: np.ndarray) -> np.ndarray:
    """Per-level weight vector w in (0, 1)^n_gra for one query embedding."""
    e_q = np.asarray(e_q, dtype=float)
    if e_q.shape != (model.input_dim,):
        raise DimMismatch(f"embedding shape {e_q.shape}, model expects ({model.input_dim},)")
    return _forward_trace(model, e_q[None, :])[-1][0]


def bce_loss(w: np.ndarray, sl: np.ndarray) -> float:
    """Summed binary cross entropy between weights w and soft label sl.

    Minimized over w at w = sl componentwise. Raises DomainError when any
    w component sits exactly on 0 or 1.
    """
    w = np.asarray(w, dtype=float)
    sl = np.asarray(sl, dtype=float)
    if w.shape != sl.shape:
        raise DimMismatch(f"w shape {w.shape} != soft label shape {sl.shape}")
    if np.any((w <= 0.0) | (w >= 1.0)):
        raise DomainError("w components must lie strictly inside (0, 1)")
    wc = np.clip(w, _EPS, 1.0 - _EPS)
    return float(-np.sum(sl * np.log(wc) + (1.0 - sl) * np.log(1.0 - wc)))


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def _backward_batch(model: RouterModel, trace: list[np.ndarray], sl: np.ndarray) -> Gradients:
    """Mean-over-batch gradients of the summed BCE loss."""
    n = trace[0].shape[0]
    w_out = np.clip(trace[-1], _EPS, 1.0 - _EPS)
    delta = w_out - sl  # sigmoid + BCE: dL/dz at the output layer
    grads_w, grads_b = [], []
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w.append(delta.T @ trace[i] / n)
        grads_b.append(delta.mean(axis=0))
        if i > 0:
            delta = (delta @ model.weights[i]) * (trace[i] > 0.0)
    return Gradients(grads_w[::-1], grads_b[::-1])


def backward(model: RouterModel, e_q: np.ndarray, sl: np.ndarray) -> Gradients:
    """Analytic gradients of bce_loss(forward(e_q), sl) for every parameter."""
    e_q = np.asarray(e_q, dtype=float)
    sl = np.asarray(sl, dtype=float)
    if e_q.shape != (model.input_dim,):
        raise DimMismatch(f"embedding shape {e_q.shape}, model expects ({model.input_dim},)")
    if sl.shape != (model.n_gra,):
        raise DimMismatch(f"soft label shape {sl.shape}, model outputs ({model.n_gra},)")
    trace = _forward_trace(model, e_q[None, :])
    return _backward_batch(model, trace, sl[None, :])


def train(
    model: RouterModel, examples: list[TrainExample], cfg: TrainConfig
) -> tuple[RouterModel, list[float]]:
    """Adam-train ``model`` in place; returns it with the per-epoch loss history.

    Stops early once the best epoch loss has not improved by
    ``cfg.min_improvement`` for ``cfg.early_stop_patience`` epochs.
    """
    if not examples:
        raise ValueError("examples must be non-empty")
    x = np.stack([np.asarray(e.embedding, dtype=float) for e in examples])
    y = np.stack([np.asarray(e.soft_label, dtype=float) for e in examples])
    if x.shape[1] != model.input_dim:
        raise DimMismatch(f"embedding dim {x.shape[1]}, model expects {model.input_dim}")
    if y.shape[1] != model.n_gra:
        raise DimMismatch(f"soft label dim {y.shape[1]}, model outputs {model.n_gra}")

    rng = np.random.default_rng(cfg.seed)
    m_w = [np.zeros_like(w) for w in model.weights]
    v_w = [np.zeros_like(w) for w in model.weights]
    m_b = [np.zeros_like(b) for b in model.biases]
    v_b = [np.zeros_like(b) for b in model.biases]
    step = 0

    history: list[float] = []
    best = np.inf
    stale = 0
    for _ in range(cfg.max_epochs):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        for lo in range(0, len(examples), cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            trace = _forward_trace(model, x[batch])
            out = np.clip(trace[-1], _EPS, 1.0 - _EPS)
            losses = -np.sum(
                y[batch] * np.log(out) + (1.0 - y[batch]) * np.log(1.0 - out), axis=1
            )
            epoch_loss += float(losses.sum())
            grads = _backward_batch(model, trace, y[batch])
            step += 1
            for params, grad_list, m, v in (
                (model.weights, grads.weights, m_w, v_w),
                (model.biases, grads.biases, m_b, v_b),
            ):
                for i, grad in enumerate(grad_list):
                    m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * grad
                    v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * grad**2
                    m_hat = m[i] / (1.0 - cfg.adam_beta1**step)
                    v_hat = v[i] / (1.0 - cfg.adam_beta2**step)
                    params[i] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        history.append(epoch_loss / len(examples))

        if history[-1] < best - cfg.min_improvement:
            best = history[-1]
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                break
    return model, history


def save_model(model: RouterModel, path: str) -> None:
    """JSON checkpoint; parameters round-trip bit-exact."""
    payload = {
        "layer_dims": model.layer_dims,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "seed": model.seed,
        "n_gra": model.n_gra,
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)


def load_model(path: str) -> RouterModel:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: invalid JSON: {exc}") from exc
    try:
        dims = [int(d) for d in payload["layer_dims"]]
        weights = [np.asarray(w, dtype=float) for w in payload["weights"]]
        biases = [np.asarray(b, dtype=float) for b in payload["biases"]]
        seed = int(payload.get("seed", 0))
        n_gra = int(payload["n_gra"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: missing or malformed field: {exc}") from exc
    if n_gra != dims[-1] or len(weights) != len(dims) - 1 or len(biases) != len(weights):
        raise CheckpointError(f"{path}: inconsistent layer structure")
    for i, (w, b) in enumerate(zip(weights, biases)):
        if w.shape != (dims[i + 1], dims[i]) or b.shape != (dims[i + 1],):
            raise CheckpointError(f"{path}: layer {i} has wrong shape")
    return RouterModel(dims, weights, biases, seed)
