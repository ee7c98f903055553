"""MLP shape estimator: nine normalised capacitances to five marker positions.

A plain numpy network (ReLU hidden layers, linear output) trained with Adam
on mean squared error.  Inputs are standardised with training-set statistics
and targets are marker coordinates divided by the chord length; both
scalings travel with the model so ``estimate_markers`` returns millimetres.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import TrainingError
from .ingestion import Dataset
from .streams import CapacitanceFrame, MarkerSet, N_CHANNELS, N_MARKERS

DEFAULT_SIZES = (9, 32, 128, 32, 10)
ACTIVATIONS = ("relu", "linear")


@dataclass(frozen=True)
class MlpModel:
    sizes: tuple
    weights: list = field(repr=False)  # (fan_in, fan_out) per layer
    biases: list = field(repr=False)
    activations: tuple = ()
    input_mean: np.ndarray = field(default=None, repr=False)
    input_std: np.ndarray = field(default=None, repr=False)
    output_scale: float = 1.0
    seed: int = 0

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def with_params(self, weights, biases) -> "MlpModel":
        return replace(self, weights=list(weights), biases=list(biases))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 5000
    batch_size: int = 256
    seed: int = 0
    patience: int = 500
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch size must be >= 1 and epochs >= 0")


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    initial_val_loss: float = float("nan")
    best_val_loss: float = float("inf")
    best_epoch: int = -1
    stopped_early: bool = False

    def rows(self):
        return [(i + 1, tr, va) for i, (tr, va) in enumerate(zip(self.train_loss, self.val_loss))]


# -- construction -----------------------------------------------------------------

def mlp_init(sizes=DEFAULT_SIZES, seed: int = 0) -> MlpModel:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"invalid layer sizes {sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    activations = ("relu",) * (len(sizes) - 2) + ("linear",)
    return MlpModel(sizes, weights, biases, activations,
                    np.zeros(sizes[0]), np.ones(sizes[0]), 1.0, seed)


# -- forward / loss / backward ------------------------------------------------------

def _standardize(model: MlpModel, x):
    return (x - model.input_mean) / model.input_std


def _layers(model: MlpModel, z):
    """Pre-activations and activations of every layer for standardized input z."""
    acts = [z]
    pre = []
    for w, b, act in zip(model.weights, model.biases, model.activations):
        h = acts[-1] @ w + b
        pre.append(h)
        acts.append(np.maximum(h, 0.0) if act == "relu" else h)
    return pre, acts


def forward(model: MlpModel, x) -> np.ndarray:
    """Network output in target units (chord-normalised) for input (..., 9)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite")
    return _layers(model, _standardize(model, x))[1][-1]


def loss_mse(pred, target) -> float:
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


def backward(model: MlpModel, inputs, targets):
    """Return (loss, weight gradients, bias gradients) of the batch MSE."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    pre, acts = _layers(model, _standardize(model, inputs))
    diff = acts[-1] - targets
    loss = float(np.mean(diff * diff))
    delta = 2.0 * diff / diff.size
    gw = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for k in range(len(model.weights) - 1, -1, -1):
        if model.activations[k] == "relu":
            delta = delta * (pre[k] > 0)
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k:
            delta = delta @ model.weights[k].T
    return loss, gw, gb


# -- training -----------------------------------------------------------------------

def with_input_stats(model: MlpModel, inputs, output_scale: float) -> MlpModel:
    mean = inputs.mean(axis=0)
    std = inputs.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return replace(model, input_mean=mean, input_std=std, output_scale=float(output_scale))


def train(model: MlpModel, dataset: Dataset, config: TrainConfig = TrainConfig(),
          log_every: int = 0) -> tuple[MlpModel, TrainReport]:
    """Mini-batch Adam on the training split; returns the best-validation model."""
    x_tr, y_tr = dataset.part("train")
    x_va, y_va = dataset.part("val")
    if len(x_tr) == 0 or len(x_va) == 0:
        raise ValueError("training and validation splits must be non-empty")
    model = with_input_stats(model, x_tr, dataset.scale)
    report = TrainReport(initial_val_loss=loss_mse(forward(model, x_va), y_va))
    best = model
    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    params = weights + biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(config.seed)
    b1, b2, lr, eps = config.beta1, config.beta2, config.learning_rate, config.eps
    step = 0
    since_best = 0
    n = len(x_tr)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            current = model.with_params(weights, biases)
            loss, gw, gb = backward(current, x_tr[idx], y_tr[idx])
            total += loss * len(idx)
            step += 1
            corr1 = 1 - b1**step
            corr2 = 1 - b2**step
            for p, g, mi, vi in zip(params, gw + gb, m, v):
                mi *= b1
                mi += (1 - b1) * g
                vi *= b2
                vi += (1 - b2) * g * g
                p -= lr * (mi / corr1) / (np.sqrt(vi / corr2) + eps)
        current = model.with_params(weights, biases)
        train_loss = total / n
        val_loss = loss_mse(forward(current, x_va), y_va)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise TrainingError(epoch, "loss diverged")
        report.train_loss.append(train_loss)
        report.val_loss.append(val_loss)
        if val_loss < report.best_val_loss:
            report.best_val_loss = val_loss
            report.best_epoch = epoch
            best = model.with_params([w.copy() for w in weights], [b.copy() for b in biases])
            since_best = 0
        else:
            since_best += 1
            if config.patience and since_best >= config.patience:
                report.stopped_early = True
                break
        if log_every and epoch % log_every == 0:
            print(f"epoch {epoch}: train {train_loss:.3e} val {val_loss:.3e}")
    return best, report


# -- inference ----------------------------------------------------------------------

def estimate_points(model: MlpModel, values) -> np.ndarray:
    """Marker positions in mm, shape (..., 5, 2), for normalised inputs (..., 9)."""
    out = forward(model, values) * model.output_scale
    return out.reshape(out.shape[:-1] + (N_MARKERS, 2))


def estimate_markers(model: MlpModel, frame: CapacitanceFrame) -> MarkerSet:
    if frame.kind != "normalized":
        raise ValueError("estimator expects a normalized frame")
    if model.sizes[0] != N_CHANNELS or model.sizes[-1] != 2 * N_MARKERS:
        raise ValueError(f"model shape {model.sizes} does not match the skin")
    return MarkerSet(frame.t, estimate_points(model, frame.values))


# -- persistence --------------------------------------------------------------------

def save_model(model: MlpModel, path) -> None:
    doc = {
        "sizes": list(model.sizes),
        "activations": list(model.activations),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "input_mean": model.input_mean.tolist(),
        "input_std": model.input_std.tolist(),
        "output_scale": model.output_scale,
        "seed": model.seed,
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_model(path) -> MlpModel:
    doc = json.loads(Path(path).read_text())
    sizes = tuple(doc["sizes"])
    weights = [np.array(w, dtype=float).reshape(a, b)
               for w, a, b in zip(doc["weights"], sizes[:-1], sizes[1:])]
    biases = [np.array(b, dtype=float) for b in doc["biases"]]
    acts = tuple(doc["activations"])
    if any(a not in ACTIVATIONS for a in acts) or len(acts) != len(weights):
        raise ValueError("bad activation tags in model file")
    return MlpModel(sizes, weights, biases, acts, np.array(doc["input_mean"], float),
                    np.array(doc["input_std"], float), float(doc["output_scale"]),
                    int(doc["seed"]))
