"""A small numpy MLP classifier: ReLU hidden layers, softmax output.

Attacks only need two capabilities from a model, class probabilities and the
gradient of the cross-entropy loss with respect to the encoded input, so that
is the whole interface (:class:`Classifier`). :class:`MlpParams` is the one
implementation shipped here.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from fairattack.dataset import Dataset, EncodedVector, FeatureSchema, Instance, encoder_for

log = logging.getLogger(__name__)

PROB_CLIP = 1e-12


class NumericalAbort(RuntimeError):
    """Training produced a non-finite loss."""


class Classifier(Protocol):
    n_inputs: int
    n_classes: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray: ...

    def loss_input_gradient(self, X: np.ndarray, targets: np.ndarray) -> np.ndarray: ...


def _as_dense(x) -> np.ndarray:
    return x.dense if isinstance(x, EncodedVector) else np.asarray(x, dtype=np.float64)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, target: int) -> float:
    """Cross-entropy with the probability clipped at 1e-12 before the log."""
    return -math.log(max(float(probs[target]), PROB_CLIP))


@dataclass(frozen=True, eq=False)
class MlpParams:
    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]  # weights[k] has shape (layer_dims[k], layer_dims[k+1])
    biases: tuple[np.ndarray, ...]
    seed: int = 0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        if len(dims) < 2 or len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("layer_dims, weights and biases do not chain")
        ws, bs = [], []
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.array(w, dtype=np.float64)
            b = np.array(b, dtype=np.float64).reshape(-1)
            if w.shape != (dims[k], dims[k + 1]) or b.shape != (dims[k + 1],):
                raise ValueError(f"layer {k}: expected {(dims[k], dims[k + 1])}, got {w.shape} / {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k}: non-finite parameters")
            w.setflags(write=False)
            b.setflags(write=False)
            ws.append(w)
            bs.append(b)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))

    @property
    def n_inputs(self) -> int:
        return self.layer_dims[0]

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    @classmethod
    def init(cls, layer_dims: Sequence[int], seed: int = 0) -> MlpParams:
        """Glorot-uniform weights and zero biases from a seeded generator."""
        rng = np.random.default_rng(seed)
        ws, bs = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            lim = math.sqrt(6.0 / (fan_in + fan_out))
            ws.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
            bs.append(np.zeros(fan_out))
        return cls(tuple(layer_dims), tuple(ws), tuple(bs), seed)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_inputs:
            raise ValueError(f"input has {X.shape[1]} positions, model expects {self.n_inputs}")
        return X

    def _forward_cache(self, X: np.ndarray):
        acts, pre = [X], []
        h = X
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            h = z if k == last else np.maximum(z, 0.0)
            acts.append(h)
        return acts, pre, softmax(acts[-1])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = self._check(X)
        return self._forward_cache(X)[2]

    def _backward(self, acts, pre, delta):
        """Backpropagate dL/dlogits; returns (input grad, weight grads, bias grads)."""
        gw, gb = [None] * len(self.weights), [None] * len(self.weights)
        for k in range(len(self.weights) - 1, -1, -1):
            gw[k] = acts[k].T @ delta
            gb[k] = delta.sum(axis=0)
            delta = delta @ self.weights[k].T
            if k > 0:
                # ReLU subgradient at 0 is 0
                delta = delta * (pre[k - 1] > 0.0)
        return delta, gw, gb

    def loss_input_gradient(self, X: np.ndarray, targets) -> np.ndarray:
        """Row-wise gradient of cross-entropy(f(x), target) with respect to x."""
        X = self._check(X)
        targets = np.broadcast_to(np.asarray(targets, dtype=np.int64), (X.shape[0],))
        acts, pre, probs = self._forward_cache(X)
        delta = probs.copy()
        delta[np.arange(X.shape[0]), targets] -= 1.0
        return self._backward(acts, pre, delta)[0]

    def relu_kink_distance(self, X: np.ndarray) -> float:
        """Smallest |pre-activation| over hidden units; small values mean a kink."""
        X = self._check(X)
        _, pre, _ = self._forward_cache(X)
        hidden = pre[:-1]
        return min((float(np.abs(z).min()) for z in hidden), default=math.inf)

    def to_json(self, schema_hash: str = "") -> dict:
        return {
            "layer_dims": list(self.layer_dims),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "seed": self.seed,
            "schema_hash": schema_hash,
        }

    @classmethod
    def from_json(cls, obj: dict) -> MlpParams:
        return cls(tuple(obj["layer_dims"]), tuple(obj["weights"]), tuple(obj["biases"]), int(obj.get("seed", 0)))


@dataclass(frozen=True, eq=False)
class Prediction:
    probs: np.ndarray
    label: int
    margin: float

    @classmethod
    def from_probs(cls, probs: np.ndarray) -> Prediction:
        probs = np.asarray(probs, dtype=np.float64)
        order = np.argsort(-probs, kind="stable")
        label = int(order[0])
        margin = float(probs[order[0]] - probs[order[1]]) if len(probs) > 1 else 1.0
        return cls(probs, label, margin)

    @property
    def positive(self) -> float:
        return float(self.probs[1])


def forward(params: Classifier, x: EncodedVector | np.ndarray) -> Prediction:
    return Prediction.from_probs(params.predict_proba(_as_dense(x))[0])


def input_gradient(params: Classifier, x: EncodedVector | np.ndarray, target: int) -> np.ndarray:
    if not 0 <= target < params.n_classes:
        raise ValueError(f"target class {target} out of range")
    return params.loss_input_gradient(_as_dense(x), target)[0]


def predict_label(params: Classifier, x, tau_dec: float = 0.5) -> int:
    """Binary decision: 1 iff the positive-class probability is >= tau_dec."""
    if params.n_classes != 2:
        raise ValueError("threshold decisions need a binary label domain")
    return int(params.predict_proba(_as_dense(x))[0, 1] >= tau_dec)


def threshold_labels(probs: np.ndarray, tau_dec: float = 0.5) -> np.ndarray:
    return (np.atleast_2d(probs)[:, 1] >= tau_dec).astype(np.int64)


@dataclass(frozen=True)
class TrainConfig:
    hidden: tuple[int, ...] = (64, 32)
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.01
    seed: int = 0
    l2: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainResult:
    params: MlpParams
    loss_log: list[float] = field(default_factory=list)


def train(train_set: Dataset | Sequence[Instance], schema: FeatureSchema, config: TrainConfig = TrainConfig()) -> TrainResult:
    """Mini-batch SGD on mean cross-entropy plus 0.5 * l2 * ||W||^2."""
    instances = train_set.instances if isinstance(train_set, Dataset) else tuple(train_set)
    if not instances:
        raise ValueError("training set is empty")
    X = encoder_for(schema).encode_many(instances)
    y = np.array([inst.label for inst in instances], dtype=np.int64)
    return train_arrays(X, y, schema.n_classes, config)


def train_arrays(X: np.ndarray, y: np.ndarray, n_classes: int, config: TrainConfig = TrainConfig()) -> TrainResult:
    dims = (X.shape[1], *config.hidden, n_classes)
    init = MlpParams.init(dims, config.seed)
    ws = [w.copy() for w in init.weights]
    bs = [b.copy() for b in init.biases]
    rng = np.random.default_rng(config.seed + 1)
    n = len(X)
    loss_log = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = X[idx], y[idx]
            cur = _Scratch(ws, bs)
            acts, pre, probs = cur._forward_cache(xb)
            p_true = np.maximum(probs[np.arange(len(idx)), yb], PROB_CLIP)
            batch_loss = float(-np.log(p_true).sum())
            if not math.isfinite(batch_loss):
                raise NumericalAbort(f"non-finite loss at epoch {epoch + 1}, batch starting at {start}")
            total += batch_loss
            delta = probs
            delta[np.arange(len(idx)), yb] -= 1.0
            delta /= len(idx)
            _, gw, gb = cur._backward(acts, pre, delta)
            for k in range(len(ws)):
                ws[k] -= config.learning_rate * (gw[k] + config.l2 * ws[k])
                bs[k] -= config.learning_rate * gb[k]
        epoch_loss = total / n
        if not all(np.all(np.isfinite(w)) for w in ws):
            raise NumericalAbort(f"non-finite weights after epoch {epoch + 1}")
        loss_log.append(epoch_loss)
        log.info("epoch %d loss %.6f", epoch + 1, epoch_loss)
    return TrainResult(MlpParams(dims, tuple(ws), tuple(bs), config.seed), loss_log)


class _Scratch(MlpParams):
    """Mutable view over in-training weights; skips validation."""

    def __init__(self, ws, bs):
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)
        object.__setattr__(self, "layer_dims", tuple([ws[0].shape[0]] + [w.shape[1] for w in ws]))


def accuracy(params: Classifier, dataset: Dataset) -> float:
    X = encoder_for(dataset.schema).encode_many(dataset.instances)
    pred = params.predict_proba(X).argmax(axis=1)
    return float((pred == dataset.labels).mean())


def save_checkpoint(params: MlpParams, path: str | Path, schema_hash: str) -> None:
    Path(path).write_text(json.dumps(params.to_json(schema_hash)) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[MlpParams, str]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"model checkpoint not found: {path}")
    obj = json.loads(path.read_text(encoding="utf-8"))
    return MlpParams.from_json(obj), obj.get("schema_hash", "")
