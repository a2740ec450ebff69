"""Grasped-object-count classifier: features, MLP, ensemble and file formats.

A grasp on a group of up to four objects is encoded as 65 numbers: for each
of four object slots, eight vertex (x, y) pairs in the grasp frame, then the
grasp angle. The grasp frame is centred on the gripper with its x axis along
the closing direction, so the encoding does not change when the scene and
the grasp move together. Short vertex lists repeat their last vertex and
short groups repeat their last object.

Each count c in 0..4 gets its own binary classifier (does this grasp hold
exactly c objects?). The ensemble answers with the most confident class.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import geometry as geo
from .errors import ConfigError, DegenerateDataset, EncodingError, SchemaError

N_SLOTS = 4
N_VERTS = 8
FEATURE_DIM = 2 * N_VERTS * N_SLOTS + 1
N_CLASSES = N_SLOTS + 1
LAYERS = (FEATURE_DIM, 500, 300, 150, 50, 1)
MODEL_SCHEMA = "mograsp-model/1"
MIN_POSITIVES = 10


# ---------------------------------------------------------------------------
# features

def _canonical_start(F: np.ndarray) -> np.ndarray:
    """Index of the min-y (then min-x) vertex for each polygon in (..., n, 2)."""
    y = F[..., 1]
    lowest = y <= y.min(axis=-1, keepdims=True) + 1e-9
    return np.argmin(np.where(lowest, F[..., 0], np.inf), axis=-1)


def encode_batch(scene, group: Sequence[int], poses: np.ndarray) -> np.ndarray:
    """Feature vectors (C, 65) for grasping ``group`` at each pose in (C, 3)."""
    group = list(group)
    if not 1 <= len(group) <= N_SLOTS:
        raise EncodingError(f"group size must be 1..{N_SLOTS}, got {len(group)}")
    poses = np.atleast_2d(np.asarray(poses, dtype=float))
    out = np.empty((len(poses), FEATURE_DIM))
    slots = []
    for i in group:
        v = scene[i].vertices
        n = v.shape[0]
        if n > N_VERTS:
            raise EncodingError(f"object {i} has {n} vertices, at most {N_VERTS} fit a slot")
        F = geo.to_grasp_frame(v[None], poses)  # (C, n, 2)
        start = _canonical_start(F)
        idx = (start[:, None] + np.arange(n)[None, :]) % n
        F = np.take_along_axis(F, idx[..., None], axis=1)
        F = np.concatenate([F, np.repeat(F[:, -1:, :], N_VERTS - n, axis=1)], axis=1)
        slots.append(F.reshape(len(poses), -1))
    slots += [slots[-1]] * (N_SLOTS - len(slots))
    out[:, :-1] = np.concatenate(slots, axis=1)
    out[:, -1] = poses[:, 2]
    return out


def encode_features(scene, group: Sequence[int], action) -> np.ndarray:
    pose = action.as_array() if hasattr(action, "as_array") else np.asarray(action, dtype=float)
    return encode_batch(scene, group, pose[None])[0]


# ---------------------------------------------------------------------------
# multilayer perceptron

@dataclass(frozen=True)
class TrainConfig:
    hidden: tuple = (500, 300, 150, 50)
    lr: float = 1e-3
    batch_size: int = 200
    l2: float = 1e-4
    max_epochs: int = 200
    patience: int = 10
    val_fraction: float = 0.2
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not self.hidden or min(self.hidden) < 1:
            raise ConfigError("hidden layer sizes must be positive")
        if self.lr <= 0 or self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("lr, batch_size, max_epochs and patience must be positive")
        if self.l2 < 0 or not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("l2 must be non-negative and val_fraction in (0, 1)")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class Mlp:
    """Feedforward binary classifier with ReLU hidden layers.

    Inputs are scaled inside the model: the 64 coordinates are divided by
    ``feature_scale`` (the gripper's maximum width), the angle is left as is.
    A model with ``trainable=False`` ignores its weights and returns
    ``prior`` for every input.
    """

    def __init__(self, weights, biases, feature_scale: float = 85.0,
                 trainable: bool = True, prior: float = 0.0):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.feature_scale = float(feature_scale)
        self.trainable = bool(trainable)
        self.prior = float(prior)
        for w, b, w_next in zip(self.weights, self.biases, self.weights[1:] + [None]):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError("inconsistent layer shapes")
            if w_next is not None and w_next.shape[0] != w.shape[1]:
                raise ValueError("consecutive layers do not chain")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("non-finite parameters")

    @classmethod
    def initialise(cls, sizes=LAYERS, seed: int = 0, feature_scale: float = 85.0) -> "Mlp":
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(seed)
        ws, bs = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            ws.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
            bs.append(np.zeros(fan_out))
        return cls(ws, bs, feature_scale)

    @classmethod
    def constant(cls, prior: float, sizes=LAYERS, feature_scale: float = 85.0) -> "Mlp":
        ws = [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
        bs = [np.zeros(b) for b in sizes[1:]]
        return cls(ws, bs, feature_scale, trainable=False, prior=prior)

    @property
    def sizes(self) -> tuple:
        return tuple([self.weights[0].shape[0]] + [w.shape[1] for w in self.weights])

    def scale_inputs(self, X: np.ndarray) -> np.ndarray:
        X = np.array(X, dtype=float, ndmin=2)
        X[:, :-1] /= self.feature_scale
        return X

    def _forward(self, X):
        acts = [X]
        h = X
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if k == last else np.maximum(z, 0.0)
            acts.append(h)
        return acts

    def logits(self, X: np.ndarray) -> np.ndarray:
        return self._forward(self.scale_inputs(X))[-1][:, 0]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.array(X, dtype=float, ndmin=2)
        if not self.trainable:
            return np.full(X.shape[0], self.prior)
        return _sigmoid(self.logits(X))

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray, l2: float = 0.0, scaled: bool = False):
        """Mean cross-entropy plus ``l2/2 * sum(W**2) / n`` and its gradients."""
        Xs = X if scaled else self.scale_inputs(X)
        n = Xs.shape[0]
        acts = self._forward(Xs)
        z = acts[-1][:, 0]
        # log(1 + e^z) - y z, written to stay finite for large |z|
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        loss += 0.5 * l2 * sum(float((w * w).sum()) for w in self.weights) / n
        delta = ((_sigmoid(z) - y) / n)[:, None]
        gw = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        for k in range(len(self.weights) - 1, -1, -1):
            gw[k] = acts[k].T @ delta + l2 * self.weights[k] / n
            gb[k] = delta.sum(axis=0)
            if k:
                delta = (delta @ self.weights[k].T) * (acts[k] > 0)
        return loss, gw, gb

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                   self.feature_scale, self.trainable, self.prior)

    def to_dict(self) -> dict:
        return {"trainable": self.trainable, "prior": self.prior,
                "weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases]}

    @classmethod
    def from_dict(cls, d: dict, feature_scale: float) -> "Mlp":
        return cls(d["weights"], d["biases"], feature_scale, d["trainable"], d["prior"])


def _split(n: int, val_fraction: float, rng: np.random.Generator):
    perm = rng.permutation(n)
    n_val = max(1, int(round(n * val_fraction)))
    return perm[n_val:], perm[:n_val]


def train_binary(X: np.ndarray, labels: np.ndarray, class_id: int, hyper: TrainConfig = TrainConfig(),
                 feature_scale: float = 85.0) -> Mlp:
    """Train the one-vs-rest classifier for ``labels == class_id``.

    Mini-batch Adam on cross-entropy with an L2 penalty. Returns the
    parameters with the lowest validation loss seen; training stops after
    ``patience`` epochs without improvement.
    """
    X = np.asarray(X, dtype=float)
    y = (np.asarray(labels) == class_id).astype(float)
    if X.shape[0] == 0:
        raise DegenerateDataset("empty dataset")
    n_pos = int(y.sum())
    if n_pos < MIN_POSITIVES or X.shape[0] - n_pos < 1:
        raise DegenerateDataset(f"class {class_id}: {n_pos} positives of {X.shape[0]}, need >= {MIN_POSITIVES}")
    rng = np.random.default_rng([hyper.seed, class_id])
    tr, va = _split(X.shape[0], hyper.val_fraction, rng)
    sizes = (X.shape[1],) + tuple(hyper.hidden) + (1,)
    model = Mlp.initialise(sizes, int(rng.integers(2**63)), feature_scale)
    Xs = model.scale_inputs(X)
    params = model.weights + model.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    best, best_loss, stall, t = model.copy(), math.inf, 0, 0
    for _epoch in range(hyper.max_epochs):
        order = tr[rng.permutation(tr.size)]
        for s in range(0, order.size, hyper.batch_size):
            b = order[s:s + hyper.batch_size]
            _, gw, gb = model.loss_and_grads(Xs[b], y[b], hyper.l2, scaled=True)
            t += 1
            c1 = 1.0 - hyper.beta1 ** t
            c2 = 1.0 - hyper.beta2 ** t
            for p, g, mk, vk in zip(params, gw + gb, m, v):
                mk *= hyper.beta1
                mk += (1.0 - hyper.beta1) * g
                vk *= hyper.beta2
                vk += (1.0 - hyper.beta2) * g * g
                p -= hyper.lr * (mk / c1) / (np.sqrt(vk / c2) + hyper.adam_eps)
        val_loss, _, _ = model.loss_and_grads(Xs[va], y[va], 0.0, scaled=True)
        if val_loss < best_loss - 1e-12:
            best, best_loss, stall = model.copy(), val_loss, 0
        else:
            stall += 1
            if stall >= hyper.patience:
                break
    return best


# ---------------------------------------------------------------------------
# ensemble

class MogNetEnsemble:
    """One binary classifier per grasped-object count 0..4."""

    def __init__(self, models: Sequence[Mlp], config: Optional[dict] = None):
        if len(models) != N_CLASSES:
            raise ValueError(f"need {N_CLASSES} class models, got {len(models)}")
        dims = {m.sizes[0] for m in models}
        if dims != {FEATURE_DIM}:
            raise ValueError(f"class models must take {FEATURE_DIM} inputs, got {sorted(dims)}")
        self.models = list(models)
        self.config = dict(config or {})

    @property
    def feature_scale(self) -> float:
        return self.models[0].feature_scale

    def class_probabilities(self, X: np.ndarray) -> np.ndarray:
        """Positive-class probability of each class model, shape (N, 5)."""
        X = np.array(X, dtype=float, ndmin=2)
        return np.column_stack([m.predict_proba(X) for m in self.models])

    def predict(self, X: np.ndarray, group_size) -> tuple:
        """Counts and their probabilities for feature rows ``X``.

        Only classes 0..group_size are considered, and only classes with a
        trained model unless none is trained. Ties go to the larger count.
        """
        P = self.class_probabilities(X)
        n = P.shape[0]
        sizes = np.broadcast_to(np.asarray(group_size), (n,))
        trained = np.array([m.trainable for m in self.models])
        allowed = np.arange(N_CLASSES)[None, :] <= sizes[:, None]
        usable = allowed & trained[None, :]
        usable = np.where(usable.any(axis=1, keepdims=True), usable, allowed)
        masked = np.where(usable, P, -np.inf)
        rev = masked[:, ::-1]
        counts = N_CLASSES - 1 - np.argmax(rev, axis=1)
        return counts, P[np.arange(n), counts]

    def to_dict(self) -> dict:
        return {"schema": MODEL_SCHEMA, "layers": list(self.models[0].sizes),
                "activations": {"hidden": "relu", "output": "logistic"},
                "feature_scale": self.feature_scale, "config": self.config,
                "classes": [m.to_dict() for m in self.models]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MogNetEnsemble":
        doc = json.loads(text)
        if not isinstance(doc, dict) or doc.get("schema") != MODEL_SCHEMA:
            raise SchemaError(f"expected schema {MODEL_SCHEMA!r}")
        if doc.get("activations") != {"hidden": "relu", "output": "logistic"}:
            raise SchemaError("unsupported activations")
        scale = float(doc["feature_scale"])
        models = [Mlp.from_dict(c, scale) for c in doc["classes"]]
        if any(list(m.sizes) != doc["layers"] for m in models if m.trainable):
            raise SchemaError("layer shapes do not match the header")
        return cls(models, doc.get("config"))


def train_ensemble(X: np.ndarray, labels: np.ndarray, hyper: TrainConfig = TrainConfig(),
                   feature_scale: float = 85.0) -> MogNetEnsemble:
    """Train all five class models; classes with too few positives get a prior model."""
    labels = np.asarray(labels)
    sizes = (FEATURE_DIM,) + tuple(hyper.hidden) + (1,)
    models = []
    for c in range(N_CLASSES):
        try:
            models.append(train_binary(X, labels, c, hyper, feature_scale))
        except DegenerateDataset:
            prior = float(np.mean(labels == c)) if labels.size else 0.0
            models.append(Mlp.constant(prior, sizes, feature_scale))
    return MogNetEnsemble(models, {"train": asdict(hyper), "n_samples": int(labels.size)})


def predict_count(ensemble: MogNetEnsemble, scene, group, action) -> tuple:
    """(count, probability) for one grasp on ``group``."""
    counts, probs = ensemble.predict(encode_features(scene, group, action)[None], len(group))
    return int(counts[0]), float(probs[0])


class MogNetPredictor:
    """Planner adapter: predicted count for every candidate pose."""

    def __init__(self, ensemble: MogNetEnsemble):
        self.ensemble = ensemble

    def __call__(self, scene, group, poses):
        counts, _ = self.ensemble.predict(encode_batch(scene, group, poses), len(group))
        return counts.astype(float)


def accuracy(ensemble: MogNetEnsemble, samples: Sequence["Sample"]) -> float:
    if not samples:
        return float("nan")
    X = np.array([s.features for s in samples])
    counts, _ = ensemble.predict(X, np.array([s.group_size for s in samples]))
    return float(np.mean(counts == np.array([s.label for s in samples])))


# ---------------------------------------------------------------------------
# datasets

@dataclass
class Sample:
    features: list
    label: int
    seed: int
    step: int
    group_size: int = N_SLOTS

    def __post_init__(self):
        if len(self.features) != FEATURE_DIM:
            raise EncodingError(f"feature vector must have {FEATURE_DIM} entries")
        if not 0 <= self.label <= self.group_size <= N_SLOTS:
            raise ValueError(f"label {self.label} exceeds group size {self.group_size}")

    def to_json(self) -> str:
        return json.dumps({"features": [float(f) for f in self.features], "label": int(self.label),
                           "seed": int(self.seed), "step": int(self.step),
                           "group_size": int(self.group_size)}, separators=(",", ":"))


def dumps_dataset(samples: Iterable[Sample]) -> str:
    return "".join(s.to_json() + "\n" for s in samples)


def loads_dataset(text: str) -> list:
    out = []
    for k, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        d = json.loads(line)
        missing = {"features", "label", "seed", "step"} - set(d)
        if missing:
            raise SchemaError(f"dataset line {k + 1} lacks {sorted(missing)}")
        out.append(Sample(d["features"], int(d["label"]), int(d["seed"]), int(d["step"]),
                          int(d.get("group_size", N_SLOTS))))
    return out


def dataset_arrays(samples: Sequence[Sample]):
    X = np.array([s.features for s in samples], dtype=float).reshape(-1, FEATURE_DIM)
    y = np.array([s.label for s in samples], dtype=int)
    return X, y


def label_histogram(samples: Sequence[Sample]) -> np.ndarray:
    return np.bincount([s.label for s in samples], minlength=N_CLASSES)[:N_CLASSES]


def label_entropy(samples: Sequence[Sample]) -> float:
    """Shannon entropy (nats) of the 5-class label histogram."""
    h = label_histogram(samples).astype(float)
    p = h[h > 0] / h.sum()
    return float(-(p * np.log(p)).sum())
