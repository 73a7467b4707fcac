"""Local model representation and minibatch SGD training.

Models are flat float64 parameter vectors tagged with an architecture id,
so aggregation and similarity logic upstream never needs layer structure.
Two architectures are supported: multinomial logistic regression (default)
and a one-hidden-layer ReLU MLP with softmax output.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Mapping, TYPE_CHECKING

import numpy as np

from .errors import NumericDivergenceError

if TYPE_CHECKING:  # pragma: no cover
    from .synthdata import ClientDataset, Population

_BLOB_MAGIC = b"CFM1"


@dataclass(frozen=True)
class Architecture:
    kind: str  # "logreg" | "mlp"
    n_features: int
    n_classes: int
    n_hidden: int = 0

    def __post_init__(self):
        if self.kind not in ("logreg", "mlp"):
            raise ValueError(f"unknown architecture kind {self.kind!r}")
        if self.kind == "mlp" and self.n_hidden < 1:
            raise ValueError("mlp needs n_hidden >= 1")

    @property
    def tag(self) -> str:
        if self.kind == "logreg":
            return f"logreg-f{self.n_features}-c{self.n_classes}"
        return f"mlp-f{self.n_features}-h{self.n_hidden}-c{self.n_classes}"

    @property
    def n_params(self) -> int:
        f, c, h = self.n_features, self.n_classes, self.n_hidden
        if self.kind == "logreg":
            return f * c + c
        return f * h + h + h * c + c

    @classmethod
    def from_tag(cls, tag: str) -> "Architecture":
        parts = tag.split("-")
        fields = {p[0]: int(p[1:]) for p in parts[1:]}
        if parts[0] == "logreg":
            return cls("logreg", fields["f"], fields["c"])
        if parts[0] == "mlp":
            return cls("mlp", fields["f"], fields["c"], fields["h"])
        raise ValueError(f"unknown architecture tag {tag!r}")


@dataclass
class ModelParams:
    """Flat parameter vector; combinable only with a matching arch_tag."""

    values: np.ndarray
    arch_tag: str

    def copy(self) -> "ModelParams":
        return ModelParams(self.values.copy(), self.arch_tag)


@dataclass
class UpdateDelta:
    """Parameter change produced by one client in one round."""

    values: np.ndarray
    owner: int
    round: int
    sample_count: int


@dataclass
class TrainReport:
    delta: UpdateDelta
    iterations: int
    final_loss: float
    epochs: int
    batch: int


def init_model(arch: Architecture, seed: int = 0) -> ModelParams:
    """Initial model. Logistic regression starts at zero (uniform predictor);
    the MLP gets a seeded scaled-normal hidden layer and zero output layer,
    which also predicts uniformly at the start."""
    if arch.kind == "logreg":
        values = np.zeros(arch.n_params)
    else:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
        w1 = rng.normal(0.0, np.sqrt(2.0 / arch.n_features),
                        size=arch.n_features * arch.n_hidden)
        rest = np.zeros(arch.n_params - w1.size)
        values = np.concatenate([w1, rest])
    return ModelParams(values, arch.tag)


def _unpack_logreg(arch: Architecture, values: np.ndarray):
    f, c = arch.n_features, arch.n_classes
    return values[: f * c].reshape(f, c), values[f * c:]


def _unpack_mlp(arch: Architecture, values: np.ndarray):
    f, c, h = arch.n_features, arch.n_classes, arch.n_hidden
    i = 0
    w1 = values[i: i + f * h].reshape(f, h); i += f * h
    b1 = values[i: i + h]; i += h
    w2 = values[i: i + h * c].reshape(h, c); i += h * c
    b2 = values[i: i + c]
    return w1, b1, w2, b2


def predict_logits(arch: Architecture, values: np.ndarray,
                   features: np.ndarray) -> np.ndarray:
    if arch.kind == "logreg":
        w, b = _unpack_logreg(arch, values)
        return features @ w + b
    w1, b1, w2, b2 = _unpack_mlp(arch, values)
    hidden = np.maximum(features @ w1 + b1, 0.0)
    return hidden @ w2 + b2


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss(model: ModelParams, data: "ClientDataset") -> float:
    """Mean cross-entropy of the model over the dataset."""
    if len(data) == 0:
        raise ValueError("loss undefined on an empty dataset")
    arch = Architecture.from_tag(model.arch_tag)
    logp = _log_softmax(predict_logits(arch, model.values, data.features))
    return float(-logp[np.arange(len(data)), data.labels].mean())


def gradient(arch: Architecture, values: np.ndarray, features: np.ndarray,
             labels: np.ndarray) -> np.ndarray:
    """Analytic mean cross-entropy gradient, flat-packed like the model."""
    n = features.shape[0]
    if arch.kind == "logreg":
        w, b = _unpack_logreg(arch, values)
        logits = features @ w + b
        probs = np.exp(_log_softmax(logits))
        probs[np.arange(n), labels] -= 1.0
        probs /= n
        return np.concatenate([(features.T @ probs).ravel(), probs.sum(axis=0)])
    w1, b1, w2, b2 = _unpack_mlp(arch, values)
    pre = features @ w1 + b1
    hidden = np.maximum(pre, 0.0)
    probs = np.exp(_log_softmax(hidden @ w2 + b2))
    probs[np.arange(n), labels] -= 1.0
    probs /= n
    d_hidden = (probs @ w2.T) * (pre > 0.0)
    return np.concatenate([
        (features.T @ d_hidden).ravel(), d_hidden.sum(axis=0),
        (hidden.T @ probs).ravel(), probs.sum(axis=0),
    ])


def local_train(model: ModelParams, data: "ClientDataset", epochs: int,
                batch: int, lr: float, rng: np.random.Generator) -> TrainReport:
    """Run `epochs * ceil(D/b)` minibatch SGD steps and report the delta.

    The input model is not mutated; the last short batch of each epoch is
    kept. The reported final loss is evaluated on `model + delta` so that
    applying the delta reproduces the trained model exactly.
    """
    n = len(data)
    if batch < 1 or batch > n:
        raise ValueError(f"batch must be in [1, {n}]")
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    arch = Architecture.from_tag(model.arch_tag)
    w = model.values.copy()
    steps = 0
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start: start + batch]
            g = gradient(arch, w, data.features[idx], data.labels[idx])
            if not np.all(np.isfinite(g)):
                raise NumericDivergenceError(
                    "non-finite gradient", epoch=epoch, step=steps)
            w -= lr * g
            steps += 1
    delta_values = w - model.values
    final = ModelParams(model.values + delta_values, model.arch_tag)
    final_loss = loss(final, data)
    if not np.isfinite(final_loss):
        raise NumericDivergenceError("non-finite loss", epoch=epochs - 1,
                                     step=steps - 1)
    delta = UpdateDelta(delta_values, owner=data.owner, round=0, sample_count=n)
    return TrainReport(delta=delta, iterations=steps, final_loss=final_loss,
                       epochs=epochs, batch=batch)


def weighted_objective(models_by_client: Mapping[int, ModelParams],
                       population: "Population") -> float:
    """Sample-count weighted average of per-client losses."""
    total = sum(len(c.train) for c in population.clients)
    acc = 0.0
    for client in population.clients:
        if client.id not in models_by_client:
            raise ValueError(f"no model mapped for client {client.id}")
        acc += len(client.train) / total * loss(models_by_client[client.id],
                                                client.train)
    return acc


def evaluate_accuracy(model: ModelParams, testset: "ClientDataset") -> float:
    """Argmax prediction accuracy in [0, 1]."""
    if len(testset) == 0:
        raise ValueError("accuracy undefined on an empty dataset")
    arch = Architecture.from_tag(model.arch_tag)
    logits = predict_logits(arch, model.values, testset.features)
    return float((logits.argmax(axis=1) == testset.labels).mean())


def model_size_bits(arch: Architecture) -> int:
    """Wire size used by the cost model: 32 bits per parameter plus a
    64-bit header."""
    return arch.n_params * 32 + 64


def serialize_model(model: ModelParams) -> bytes:
    """Little-endian blob: magic, tag length, tag, float32 values."""
    tag = model.arch_tag.encode()
    return (_BLOB_MAGIC + struct.pack("<H", len(tag)) + tag
            + model.values.astype("<f4").tobytes())


def deserialize_model(blob: bytes) -> ModelParams:
    if blob[:4] != _BLOB_MAGIC:
        raise ValueError("bad model blob header")
    (tag_len,) = struct.unpack("<H", blob[4:6])
    tag = blob[6: 6 + tag_len].decode()
    values = np.frombuffer(blob[6 + tag_len:], dtype="<f4").astype(np.float64)
    arch = Architecture.from_tag(tag)
    if values.size != arch.n_params:
        raise ValueError("model blob size does not match its architecture")
    return ModelParams(values, tag)
