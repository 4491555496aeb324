"""Language identification: multinomial logistic regression over chunk embeddings.

Training minimizes the softmax cross-entropy plus an L2 penalty with
full-batch gradient descent and Armijo backtracking from a zero start, so a
given dataset always produces the same model.  Chunk predictions come back as
LID-schema segment records carrying a confidence.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .formats import EmbeddingSet, FormatError, SegmentRecord, canonical_key
from .validation import as_float_matrix, as_float_vector

__all__ = [
    "LogRegModel",
    "train",
    "predict",
    "predict_proba",
    "predict_segments",
    "save_model",
    "load_model",
    "LogisticLanguageID",
]

MODEL_MAGIC = b"LRM1"


@dataclass(frozen=True)
class LogRegModel:
    """A trained multinomial logistic-regression classifier.

    ``weights`` has one row per class over the features plus a folded-in bias
    as the final column.  Classes are kept in sorted label order so training
    is invariant to example order.
    """

    classes: tuple[str, ...]
    weights: np.ndarray
    l2: float
    losses: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        W = np.asarray(self.weights, dtype=np.float64)
        if len(self.classes) < 2:
            raise ValueError("a model needs at least 2 classes")
        if W.shape[0] != len(self.classes):
            raise ValueError(f"weights have {W.shape[0]} rows for {len(self.classes)} classes")
        if not np.all(np.isfinite(W)):
            raise ValueError("weights must be finite")
        W.flags.writeable = False
        object.__setattr__(self, "weights", W)

    @property
    def dim(self) -> int:
        return self.weights.shape[1] - 1


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _loss_grad(W, Xb, Y, l2):
    n = Xb.shape[0]
    P = _softmax(Xb @ W.T)
    ce = -np.log(np.maximum(P[np.arange(n), Y.argmax(axis=1)], 1e-300)).mean()
    loss = ce + 0.5 * l2 * float((W * W).sum())
    grad = (P - Y).T @ Xb / n + l2 * W
    return loss, grad


def train(
    X,
    y,
    l2: float = 1e-3,
    tol: float = 1e-7,
    max_iter: int = 500,
    seed: int = 0,
) -> LogRegModel:
    """Fit the classifier by full-batch gradient descent with backtracking.

    Deterministic: weights start at zero, so ``seed`` has no effect on the
    result and is accepted only for interface symmetry with the other
    estimators.
    """
    del seed
    rows = as_float_matrix(X.rows if isinstance(X, EmbeddingSet) else X, name="features")
    labels = [str(v) for v in y]
    if len(labels) != rows.shape[0]:
        raise ValueError(f"{rows.shape[0]} rows but {len(labels)} labels")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ValueError("training needs at least 2 distinct classes")
    if l2 < 0:
        raise ValueError(f"l2 must be non-negative, got {l2}")

    index = {c: k for k, c in enumerate(classes)}
    n, d = rows.shape
    Xb = np.hstack([rows, np.ones((n, 1))])
    Y = np.zeros((n, len(classes)))
    Y[np.arange(n), [index[label] for label in labels]] = 1.0

    W = np.zeros((len(classes), d + 1))
    loss, grad = _loss_grad(W, Xb, Y, l2)
    losses = [loss]
    for _ in range(max_iter):
        gnorm2 = float((grad * grad).sum())
        if np.sqrt(gnorm2) <= tol:
            break
        step = 1.0
        while step > 1e-20:
            candidate = W - step * grad
            new_loss, new_grad = _loss_grad(candidate, Xb, Y, l2)
            if new_loss <= loss - 1e-4 * step * gnorm2:
                break
            step *= 0.5
        else:
            break  # no productive step representable; treat as converged
        W, loss, grad = candidate, new_loss, new_grad
        losses.append(loss)
    return LogRegModel(classes=classes, weights=W, l2=l2, losses=tuple(losses))


def predict_proba(model: LogRegModel, X) -> np.ndarray:
    """Class probabilities, one row per input vector (rows sum to 1)."""
    rows = as_float_matrix(X.rows if isinstance(X, EmbeddingSet) else X, name="features")
    if rows.shape[1] != model.dim:
        raise ValueError(f"expected dim {model.dim}, got {rows.shape[1]}")
    Xb = np.hstack([rows, np.ones((rows.shape[0], 1))])
    return _softmax(Xb @ model.weights.T)


def predict(model: LogRegModel, x) -> tuple[str, float]:
    """Most probable language and its softmax confidence for one vector.

    Argmax ties resolve to the earliest class in sorted order.
    """
    vec = as_float_vector(x, name="x")
    proba = predict_proba(model, vec.reshape(1, -1))[0]
    k = int(np.argmax(proba))
    return model.classes[k], float(proba[k])


def predict_segments(model: LogRegModel, embeddings: EmbeddingSet) -> list[SegmentRecord]:
    """One LID-schema record per chunk in span order, with confidence."""
    if len(embeddings) == 0:
        return []
    proba = predict_proba(model, embeddings.rows)
    records = []
    for i in sorted(range(len(embeddings)), key=lambda i: canonical_key(embeddings.meta[i])):
        k = int(np.argmax(proba[i]))
        records.append(
            SegmentRecord(
                file_id=embeddings.meta[i].file_id,
                span=embeddings.meta[i].span,
                language=model.classes[k],
                confidence=float(proba[i][k]),
            )
        )
    return records


def save_model(model: LogRegModel) -> bytes:
    """Serialize to the LRM1 binary layout (weights at float32 precision)."""
    parts = [MODEL_MAGIC, struct.pack("<I", len(model.classes))]
    for name in model.classes:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    parts.append(struct.pack("<I", model.dim))
    parts.append(struct.pack("<d", model.l2))
    parts.append(model.weights.astype("<f4").tobytes(order="C"))
    return b"".join(parts)


def load_model(data: bytes) -> LogRegModel:
    """Parse LRM1 bytes back into a model."""
    view = memoryview(data)
    if len(view) < 4 or bytes(view[:4]) != MODEL_MAGIC:
        raise FormatError("bad magic: not an LRM1 model file")
    offset = 4

    def unpack(fmt):
        nonlocal offset
        size = struct.calcsize(fmt)
        if len(view) < offset + size:
            raise FormatError("truncated LRM1 model file")
        value = struct.unpack_from(fmt, view, offset)[0]
        offset += size
        return value

    n_classes = unpack("<I")
    classes = []
    for _ in range(n_classes):
        length = unpack("<I")
        if len(view) < offset + length:
            raise FormatError("truncated LRM1 model file")
        classes.append(bytes(view[offset : offset + length]).decode("utf-8"))
        offset += length
    dim = unpack("<I")
    l2 = unpack("<d")
    nbytes = n_classes * (dim + 1) * 4
    if len(view) != offset + nbytes:
        raise FormatError("truncated LRM1 model file")
    weights = np.frombuffer(view[offset:], dtype="<f4").reshape(n_classes, dim + 1)
    return LogRegModel(classes=tuple(classes), weights=weights.astype(np.float64), l2=l2)


class LogisticLanguageID(BaseEstimator, ClassifierMixin):
    """Estimator wrapper over train/predict for pipeline composition."""

    def __init__(self, l2: float = 1e-3, tol: float = 1e-7, max_iter: int = 500):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        self.model_ = train(X, y, l2=self.l2, tol=self.tol, max_iter=self.max_iter)
        self.classes_ = np.array(self.model_.classes)
        return self

    def predict(self, X) -> np.ndarray:
        proba = predict_proba(self.model_, X)
        return self.classes_[proba.argmax(axis=1)]

    def predict_proba(self, X) -> np.ndarray:
        return predict_proba(self.model_, X)
