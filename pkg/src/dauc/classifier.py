"""Built-in prediction models.

Two model families, both trained with plain (full-batch by default) gradient
descent on the mean cross-entropy loss:

* :class:`LinearSoftmaxModel` - multinomial logistic regression. The feature
  extractor is the identity, so the latent space equals the input space.
* :class:`MlpModel` - one ReLU hidden layer followed by a linear map; the
  hidden activations are the latent space.

Training is deterministic: weights start uniform in [-0.1, 0.1] from a
PCG64 generator seeded by the config, and identical configs reproduce
bitwise-identical weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .data import DataError, LabeledFeatures, NormalizationStats


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    batch_size: int | None = None  # None = full batch
    seed: int = 0
    l2: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise DataError("learning_rate must be positive")
        if self.epochs < 1:
            raise DataError("epochs must be a positive integer")
        if self.batch_size is not None and self.batch_size < 1:
            raise DataError("batch_size must be a positive integer or None")
        if self.l2 < 0:
            raise DataError("l2 must be nonnegative")


@dataclass(frozen=True)
class LinearSoftmaxModel:
    """softmax((W x + b) / temperature); latents are the inputs themselves."""

    weights: np.ndarray  # (C, d)
    bias: np.ndarray  # (C,)
    temperature: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise DataError("weights must be C x d and bias length C")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise DataError("model parameters must be finite")
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise DataError("temperature must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def latent_dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class MlpModel:
    """softmax((W2 relu(W1 x + b1) + b2) / temperature); latents are the hidden activations."""

    w1: np.ndarray  # (H, d)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (C, H)
    b2: np.ndarray  # (C,)
    temperature: float = 1.0

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float64)
        b1 = np.asarray(self.b1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        b2 = np.asarray(self.b2, dtype=np.float64)
        if w1.ndim != 2 or b1.shape != (w1.shape[0],):
            raise DataError("w1 must be H x d and b1 length H")
        if w2.ndim != 2 or w2.shape[1] != w1.shape[0] or b2.shape != (w2.shape[0],):
            raise DataError("w2 must be C x H and b2 length C")
        for arr in (w1, b1, w2, b2):
            if not np.all(np.isfinite(arr)):
                raise DataError("model parameters must be finite")
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise DataError("temperature must be positive")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", b2)

    @property
    def num_classes(self) -> int:
        return self.w2.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def latent_dim(self) -> int:
        return self.w1.shape[0]


Model = LinearSoftmaxModel | MlpModel


class Prediction(NamedTuple):
    y_pred: np.ndarray  # (N,) argmax class, ties -> lowest index
    probs: np.ndarray  # (N, C)
    latents: np.ndarray  # (N, latent_dim)


def softmax(z: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Row-wise softmax of z / temperature, computed with max subtraction."""
    z = np.asarray(z, dtype=np.float64)
    if not math.isfinite(temperature) or temperature <= 0:
        raise DataError("temperature must be positive")
    scaled = z / temperature
    shift = scaled - np.max(scaled, axis=-1, keepdims=True)
    e = np.exp(shift)
    return e / np.sum(e, axis=-1, keepdims=True)


def one_hot(y: np.ndarray, num_classes: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    out = np.zeros((y.shape[0], num_classes), dtype=np.float64)
    out[np.arange(y.shape[0]), y] = 1.0
    return out


def _forward(model: Model, x: np.ndarray):
    """Return (probs, latents, relu_mask_or_None)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise DataError(
            f"dimension mismatch: model expects d={model.input_dim}, got shape {x.shape}"
        )
    if isinstance(model, LinearSoftmaxModel):
        logits = x @ model.weights.T + model.bias
        return softmax(logits, model.temperature), x, None
    pre = x @ model.w1.T + model.b1
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ model.w2.T + model.b2
    return softmax(logits, model.temperature), hidden, pre > 0


def predict(model: Model, x: np.ndarray) -> Prediction:
    """Class predictions, probabilities and latent rows for a batch of inputs."""
    probs, latents, _ = _forward(model, x)
    return Prediction(y_pred=np.argmax(probs, axis=1), probs=probs, latents=latents)


def entropy_uncertainty(probs: np.ndarray) -> np.ndarray:
    """Shannon entropy of each probability row, normalized to [0, 1] by log C."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[1] < 2:
        raise DataError("probs must be an N x C matrix with C >= 2")
    if np.any(probs < -1e-12) or np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
        raise DataError("rows of probs must be probability distributions")
    p = np.clip(probs, 0.0, 1.0)
    plogp = p * np.log(np.where(p > 0.0, p, 1.0))
    h = -plogp.sum(axis=1) / math.log(probs.shape[1])
    return np.clip(h, 0.0, 1.0)


def cross_entropy(model: Model, x: np.ndarray, y: np.ndarray, l2: float = 0.0) -> float:
    """Mean cross-entropy of true labels plus an optional L2 penalty on weights."""
    probs, _, _ = _forward(model, x)
    n = x.shape[0]
    picked = probs[np.arange(n), np.asarray(y, dtype=np.int64)]
    loss = -float(np.mean(np.log(np.maximum(picked, 1e-300))))
    if l2 > 0:
        if isinstance(model, LinearSoftmaxModel):
            loss += 0.5 * l2 * float(np.sum(model.weights**2))
        else:
            loss += 0.5 * l2 * float(np.sum(model.w1**2) + np.sum(model.w2**2))
    return loss


def loss_and_grads(model: Model, x: np.ndarray, y: np.ndarray, l2: float = 0.0):
    """Mean cross-entropy loss and its analytic gradients.

    Returns ``(loss, grads)`` where ``grads`` maps parameter names
    (``weights``/``bias`` or ``w1``/``b1``/``w2``/``b2``) to arrays.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = x.shape[0]
    probs, hidden, relu_mask = _forward(model, x)
    delta = (probs - one_hot(y, model.num_classes)) / (n * model.temperature)
    loss = cross_entropy(model, x, y, l2)
    if isinstance(model, LinearSoftmaxModel):
        g_w = delta.T @ x + l2 * model.weights
        g_b = delta.sum(axis=0)
        return loss, {"weights": g_w, "bias": g_b}
    g_w2 = delta.T @ hidden + l2 * model.w2
    g_b2 = delta.sum(axis=0)
    d_hidden = (delta @ model.w2) * relu_mask
    g_w1 = d_hidden.T @ x + l2 * model.w1
    g_b1 = d_hidden.sum(axis=0)
    return loss, {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2}


def _check_training_inputs(ds: LabeledFeatures, require_n_ge_c: bool):
    if np.any(ds.y < 0):
        raise DataError("training labels must lie in [0, num_classes); got OOD label -1")
    if require_n_ge_c and ds.n < ds.num_classes:
        raise DataError("need at least as many training rows as classes")


def _gd(model: Model, ds: LabeledFeatures, cfg: TrainConfig,
        loss_history: list | None = None) -> Model:
    rng = np.random.Generator(np.random.PCG64(cfg.seed + 1))  # separate stream from init
    params = {k: np.array(getattr(model, k)) for k in _param_names(model)}
    for _ in range(cfg.epochs):
        if cfg.batch_size is None or cfg.batch_size >= ds.n:
            batches = [np.arange(ds.n)]
        else:
            order = rng.permutation(ds.n)
            batches = [
                order[i : i + cfg.batch_size] for i in range(0, ds.n, cfg.batch_size)
            ]
        for idx in batches:
            current = _with_params(model, params)
            loss, grads = loss_and_grads(current, ds.x[idx], ds.y[idx], cfg.l2)
            if loss_history is not None:
                loss_history.append(loss)
            for name, g in grads.items():
                params[name] -= cfg.learning_rate * g
    return _with_params(model, params)


def _param_names(model: Model):
    return ("weights", "bias") if isinstance(model, LinearSoftmaxModel) else ("w1", "b1", "w2", "b2")


def _with_params(model: Model, params: dict) -> Model:
    return replace(model, **{k: v.copy() for k, v in params.items()})


def train_linear(ds: LabeledFeatures, cfg: TrainConfig, temperature: float = 1.0,
                 loss_history: list | None = None) -> LinearSoftmaxModel:
    """Train multinomial logistic regression by gradient descent."""
    _check_training_inputs(ds, require_n_ge_c=True)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    w = rng.uniform(-0.1, 0.1, size=(ds.num_classes, ds.dim))
    b = rng.uniform(-0.1, 0.1, size=ds.num_classes)
    model = LinearSoftmaxModel(weights=w, bias=b, temperature=temperature)
    return _gd(model, ds, cfg, loss_history)


def train_mlp(ds: LabeledFeatures, hidden_dim: int, cfg: TrainConfig,
              temperature: float = 1.0,
              loss_history: list | None = None) -> MlpModel:
    """Train the one-hidden-layer ReLU network by gradient descent."""
    _check_training_inputs(ds, require_n_ge_c=True)
    if hidden_dim < 1:
        raise DataError("hidden_dim must be a positive integer")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    w1 = rng.uniform(-0.1, 0.1, size=(hidden_dim, ds.dim))
    b1 = rng.uniform(-0.1, 0.1, size=hidden_dim)
    w2 = rng.uniform(-0.1, 0.1, size=(ds.num_classes, hidden_dim))
    b2 = rng.uniform(-0.1, 0.1, size=ds.num_classes)
    model = MlpModel(w1=w1, b1=b1, w2=w2, b2=b2, temperature=temperature)
    return _gd(model, ds, cfg, loss_history)


def spectral_norm(w: np.ndarray, iters: int = 100, tol: float = 1e-10) -> float:
    """Largest singular value of ``w`` via power iteration on ``w^T w``."""
    w = np.asarray(w, dtype=np.float64)
    if w.size == 0 or not np.any(w):
        return 0.0
    d = w.shape[1]
    v = np.ones(d) / math.sqrt(d)
    for _ in range(iters):
        z = w.T @ (w @ v)
        norm = float(np.linalg.norm(z))
        if norm == 0.0:
            return 0.0
        v_new = z / norm
        if float(np.linalg.norm(v_new - v)) < tol:
            v = v_new
            break
        v = v_new
    return float(np.linalg.norm(w @ v))


def lipschitz_check(model: LinearSoftmaxModel, pairs) -> float:
    """Largest violation of the prediction-smoothness bound over input pairs.

    For each pair computes ``||f(x1) - f(x2)||_2 - t * sigma_max(W) *
    ||x1 - x2||_2`` where ``t`` is the softmax temperature and ``sigma_max``
    the spectral norm of the weight matrix; a well-behaved model keeps every
    value at or below ~1e-9.
    """
    sigma = spectral_norm(model.weights)
    worst = -math.inf
    for x1, x2 in pairs:
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        f1 = predict(model, x1[None, :]).probs[0]
        f2 = predict(model, x2[None, :]).probs[0]
        lhs = float(np.linalg.norm(f1 - f2))
        rhs = model.temperature * sigma * float(np.linalg.norm(x1 - x2))
        worst = max(worst, lhs - rhs)
    return worst


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(model: Model, path, input_stats: NormalizationStats,
                    latent_stats: NormalizationStats, train_config: TrainConfig,
                    extra: dict | None = None) -> None:
    """Write the model plus both normalization stages as a JSON checkpoint."""
    if isinstance(model, LinearSoftmaxModel):
        payload = {
            "model_type": "linear",
            "shapes": {"weights": list(model.weights.shape), "bias": list(model.bias.shape)},
            "weights": {
                "weights": model.weights.ravel().tolist(),
                "bias": model.bias.tolist(),
            },
        }
    else:
        payload = {
            "model_type": "mlp",
            "shapes": {
                "w1": list(model.w1.shape),
                "b1": list(model.b1.shape),
                "w2": list(model.w2.shape),
                "b2": list(model.b2.shape),
            },
            "weights": {
                "w1": model.w1.ravel().tolist(),
                "b1": model.b1.tolist(),
                "w2": model.w2.ravel().tolist(),
                "b2": model.b2.tolist(),
            },
        }
    payload["temperature"] = model.temperature
    payload["num_classes"] = model.num_classes
    payload["normalization"] = {
        "input": input_stats.to_json(),
        "latent": latent_stats.to_json(),
    }
    payload["train_config"] = {
        "learning_rate": train_config.learning_rate,
        "epochs": train_config.epochs,
        "batch_size": train_config.batch_size,
        "seed": train_config.seed,
        "l2": train_config.l2,
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_checkpoint(path):
    """Load a checkpoint; returns (model, input_stats, latent_stats, payload)."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    shapes = payload["shapes"]
    weights = payload["weights"]
    t = float(payload["temperature"])
    if payload["model_type"] == "linear":
        model: Model = LinearSoftmaxModel(
            weights=np.asarray(weights["weights"]).reshape(shapes["weights"]),
            bias=np.asarray(weights["bias"]),
            temperature=t,
        )
    elif payload["model_type"] == "mlp":
        model = MlpModel(
            w1=np.asarray(weights["w1"]).reshape(shapes["w1"]),
            b1=np.asarray(weights["b1"]),
            w2=np.asarray(weights["w2"]).reshape(shapes["w2"]),
            b2=np.asarray(weights["b2"]),
            temperature=t,
        )
    else:
        raise DataError(f"unknown model_type {payload['model_type']!r}")
    input_stats = NormalizationStats.from_json(payload["normalization"]["input"])
    latent_stats = NormalizationStats.from_json(payload["normalization"]["latent"])
    return model, input_stats, latent_stats, payload
