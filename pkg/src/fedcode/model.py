"""Small dense classifier with hand-written gradients.

Parameters live in a single flat float64 vector laid out layer by layer,
weights then biases, so the clustering and transfer machinery can treat a
model as an anonymous value stream. Hidden layers use tanh; the head is a
linear layer trained with softmax cross-entropy. All arithmetic is float64;
the 32-bit wordlength elsewhere is an accounting convention only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

# A FlatParams value is a 1-D float64 ndarray of length ModelSpec.param_count.
FlatParams = np.ndarray

__all__ = [
    "AdamState",
    "FlatParams",
    "LabeledDataset",
    "ModelSpec",
    "TrainConfig",
    "evaluate",
    "init_params",
    "local_train",
    "loss_and_grad",
    "pack_layers",
    "unpack_layers",
]


@dataclass(frozen=True)
class ModelSpec:
    """Architecture of the dense classifier."""

    input_dim: int
    hidden_dims: tuple[int, ...] = (32,)
    num_classes: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ConfigurationError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.num_classes < 2:
            raise ConfigurationError(f"num_classes must be >= 2, got {self.num_classes}")
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigurationError(f"hidden_dims must all be >= 1, got {self.hidden_dims}")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.num_classes)

    @property
    def param_count(self) -> int:
        dims = self.layer_dims
        return sum(fi * fo + fo for fi, fo in zip(dims[:-1], dims[1:]))


@dataclass(frozen=True)
class TrainConfig:
    """Local optimizer settings for one client update."""

    local_epochs: int = 4
    batch_size: int = 32
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    optimizer: str = "adam"  # "adam" or plain "sgd"

    def __post_init__(self) -> None:
        if self.local_epochs < 0:
            raise ConfigurationError(f"local_epochs must be >= 0, got {self.local_epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 <= self.adam_beta1 < 1 or not 0 <= self.adam_beta2 < 1:
            raise ConfigurationError("adam betas must lie in [0, 1)")
        if self.adam_epsilon <= 0:
            raise ConfigurationError("adam_epsilon must be > 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")


@dataclass
class AdamState:
    """First/second moment estimates plus the bias-correction step counter."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros(cls, param_count: int) -> "AdamState":
        return cls(np.zeros(param_count), np.zeros(param_count), 0)


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix (n, d) float64 with integer labels (n,)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        labs = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2:
            raise ConfigurationError(f"features must be 2-D, got shape {feats.shape}")
        if labs.ndim != 1 or labs.shape[0] != feats.shape[0]:
            raise ConfigurationError(
                f"labels shape {labs.shape} does not match features shape {feats.shape}"
            )
        if feats.shape[0] < 1:
            raise ConfigurationError("dataset must contain at least one sample")
        if labs.min(initial=0) < 0:
            raise ConfigurationError("labels must be non-negative")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def sample_count(self) -> int:
        return int(self.features.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices: np.ndarray) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx])


def init_params(spec: ModelSpec, seed: int) -> FlatParams:
    """Deterministic zero-mean scaled-uniform init; biases start at zero."""
    rng = np.random.default_rng(seed)
    dims = spec.layer_dims
    chunks: list[np.ndarray] = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def unpack_layers(spec: ModelSpec, params: FlatParams) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views of the flat vector as per-layer (weights, bias) pairs."""
    flat = np.asarray(params, dtype=np.float64)
    if flat.ndim != 1 or flat.size != spec.param_count:
        raise ConfigurationError(
            f"parameter vector of length {flat.size} does not fit spec "
            f"requiring {spec.param_count}"
        )
    dims = spec.layer_dims
    layers = []
    offset = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = flat[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = flat[offset : offset + fan_out]
        offset += fan_out
        layers.append((w, b))
    return layers


def pack_layers(spec: ModelSpec, layers: list[tuple[np.ndarray, np.ndarray]]) -> FlatParams:
    """Inverse of unpack_layers."""
    chunks = []
    for w, b in layers:
        chunks.append(np.asarray(w, dtype=np.float64).ravel())
        chunks.append(np.asarray(b, dtype=np.float64).ravel())
    flat = np.concatenate(chunks)
    if flat.size != spec.param_count:
        raise ConfigurationError("layer shapes do not match the model spec")
    return flat


def _forward(spec: ModelSpec, params: FlatParams, features: np.ndarray) -> list[np.ndarray]:
    """Activations per layer; the last entry holds the raw logits."""
    layers = unpack_layers(spec, params)
    acts = [features]
    h = features
    for i, (w, b) in enumerate(layers):
        z = h @ w + b
        h = np.tanh(z) if i < len(layers) - 1 else z
        acts.append(h)
    return acts


def _check_batch(spec: ModelSpec, batch: LabeledDataset) -> None:
    if batch.input_dim != spec.input_dim:
        raise ConfigurationError(
            f"batch feature dim {batch.input_dim} does not match model input dim {spec.input_dim}"
        )
    if batch.labels.max(initial=0) >= spec.num_classes:
        raise ConfigurationError(
            f"label {int(batch.labels.max())} out of range for {spec.num_classes} classes"
        )


def loss_and_grad(spec: ModelSpec, params: FlatParams, batch: LabeledDataset) -> tuple[float, FlatParams]:
    """Mean softmax cross-entropy over the batch and its full gradient.

    Returns:
        (loss, grad) where grad has the same flat layout as params.
    """
    _check_batch(spec, batch)
    acts = _forward(spec, params, batch.features)
    logits = acts[-1]
    n = batch.sample_count

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    loss = float(-log_probs[np.arange(n), batch.labels].mean())

    delta = np.exp(log_probs)
    delta[np.arange(n), batch.labels] -= 1.0
    delta /= n

    layers = unpack_layers(spec, params)
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)  # type: ignore[list-item]
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        h_in = acts[i]
        grads[i] = (h_in.T @ delta, delta.sum(axis=0))
        if i > 0:
            # tanh'(z) expressed through the stored activation
            delta = (delta @ w.T) * (1.0 - acts[i] ** 2)
    return loss, pack_layers(spec, grads)


def local_train(
    spec: ModelSpec,
    params: FlatParams,
    data: LabeledDataset,
    cfg: TrainConfig,
    seed: int,
) -> FlatParams:
    """Run cfg.local_epochs of mini-batch training from a private copy of params.

    Shuffling is driven solely by the given seed, so equal inputs give
    bitwise-equal outputs regardless of caller scheduling. local_epochs=0
    returns an unchanged copy.
    """
    _check_batch(spec, data)
    theta = np.array(params, dtype=np.float64, copy=True)
    if cfg.local_epochs == 0:
        return theta

    rng = np.random.default_rng(seed)
    adam = AdamState.zeros(theta.size)
    lr = cfg.learning_rate
    for _ in range(cfg.local_epochs):
        order = rng.permutation(data.sample_count)
        for start in range(0, data.sample_count, cfg.batch_size):
            batch = data.subset(order[start : start + cfg.batch_size])
            _, grad = loss_and_grad(spec, theta, batch)
            if cfg.optimizer == "sgd":
                theta -= lr * grad
                continue
            adam.step_count += 1
            adam.first_moment = cfg.adam_beta1 * adam.first_moment + (1 - cfg.adam_beta1) * grad
            adam.second_moment = (
                cfg.adam_beta2 * adam.second_moment + (1 - cfg.adam_beta2) * grad * grad
            )
            m_hat = adam.first_moment / (1 - cfg.adam_beta1 ** adam.step_count)
            v_hat = adam.second_moment / (1 - cfg.adam_beta2 ** adam.step_count)
            theta -= lr * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon)
    return theta


def evaluate(spec: ModelSpec, params: FlatParams, data: LabeledDataset) -> float:
    """Top-1 accuracy; argmax ties resolve to the lowest class index."""
    _check_batch(spec, data)
    logits = _forward(spec, params, data.features)[-1]
    predictions = logits.argmax(axis=1)
    return float((predictions == data.labels).mean())
