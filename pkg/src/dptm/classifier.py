"""Multinomial logistic regression on flattened grids.

Gradients of the softmax cross-entropy are written out by hand; training is
minibatch SGD with heavy-ball momentum and L2 weight decay on all
parameters (the PyTorch ``SGD`` convention).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DimensionError, ValidationError


@dataclass(frozen=True)
class SoftmaxClassifier:
    W: np.ndarray  # (C, n*n)
    b: np.ndarray  # (C,)

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64)
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise DimensionError(f"W {W.shape} and b {b.shape} are inconsistent")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ValidationError("classifier parameters must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def C(self) -> int:
        return self.W.shape[0]

    @property
    def n_features(self) -> int:
        return self.W.shape[1]

    @classmethod
    def zeros(cls, C: int, n: int) -> SoftmaxClassifier:
        return cls(np.zeros((C, n * n)), np.zeros(C))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 0.0
    epochs: int = 30
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("must be positive", "learning_rate")
        if not 0 <= self.momentum < 1:
            raise ConfigError("must lie in [0, 1)", "momentum")
        if self.weight_decay < 0:
            raise ConfigError("must be nonnegative", "weight_decay")
        if int(self.epochs) != self.epochs or self.epochs < 0:
            raise ConfigError("must be a nonnegative integer", "epochs")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ConfigError("must be a positive integer", "batch_size")


def _features(model: SoftmaxClassifier, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2 and x.size == model.n_features:
        return x.reshape(1, -1)
    flat = x.reshape(x.shape[0], -1) if x.ndim >= 2 else None
    if flat is None or flat.shape[1] != model.n_features:
        raise DimensionError(f"input {x.shape} does not match {model.n_features} features")
    return flat


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def logits(model: SoftmaxClassifier, x) -> np.ndarray:
    return _features(model, x) @ model.W.T + model.b


def predict_probs(model: SoftmaxClassifier, x) -> np.ndarray:
    """Class probabilities; a single grid gives shape (C,), a stack (N, C)."""
    x = np.asarray(x, dtype=np.float64)
    p = softmax(logits(model, x))
    single = x.ndim == 2 and x.size == model.n_features
    return p[0] if single else p


def pseudo_label(model: SoftmaxClassifier, x):
    """Argmax class; ``np.argmax`` returns the first maximum, i.e. ties go to the lowest index."""
    return np.argmax(predict_probs(model, x), axis=-1)


def entropy(p, validate: bool = True):
    """Shannon entropy in nats along the last axis, with ``0 ln 0 = 0``."""
    p = np.asarray(p, dtype=np.float64)
    if validate:
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-6):
            raise ValidationError("entropy needs nonnegative rows summing to 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def _check_labels(y, C: int, N: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if y.shape[0] != N:
        raise DimensionError(f"{N} samples but {y.shape[0]} labels")
    if np.any(y < 0) or np.any(y >= C):
        raise ValidationError(f"labels must lie in [0, {C})")
    return y


def ce_loss_and_grad(model: SoftmaxClassifier, X, y):
    """Mean cross-entropy and its gradient w.r.t. (W, b).

    With ``P = softmax(XW^T + b)`` and one-hot ``Y``:
    ``dL/dW = (P - Y)^T X / N`` and ``dL/db = sum(P - Y) / N``.
    """
    F = _features(model, X)
    y = _check_labels(y, model.C, F.shape[0])
    N = F.shape[0]
    L = F @ model.W.T + model.b
    L = L - L.max(axis=1, keepdims=True)
    logZ = np.log(np.exp(L).sum(axis=1))
    loss = float(np.mean(logZ - L[np.arange(N), y]))
    G = np.exp(L - logZ[:, None])
    G[np.arange(N), y] -= 1.0
    G /= N
    return loss, G.T @ F, G.sum(axis=0)


def train_ce(model: SoftmaxClassifier, X, y, cfg: TrainConfig) -> SoftmaxClassifier:
    """Fine-tune ``model`` on ``(X, y)``; the input model is not modified."""
    F = _features(model, X) if np.asarray(X).size else np.empty((0, model.n_features))
    if F.shape[0] == 0:
        raise ValidationError("training set is empty")
    y = _check_labels(y, model.C, F.shape[0])
    W, b = model.W.copy(), model.b.copy()
    vW, vb = np.zeros_like(W), np.zeros_like(b)
    rng = np.random.default_rng(cfg.seed)
    N = F.shape[0]
    rows = np.arange(cfg.batch_size)
    for _ in range(cfg.epochs):
        order = rng.permutation(N)
        for start in range(0, N, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, yb = F[idx], y[idx]
            G = softmax(xb @ W.T + b)
            G[rows[: len(idx)], yb] -= 1.0
            G /= len(idx)
            gW = G.T @ xb + cfg.weight_decay * W
            gb = G.sum(axis=0) + cfg.weight_decay * b
            vW = cfg.momentum * vW + gW
            vb = cfg.momentum * vb + gb
            W -= cfg.learning_rate * vW
            b -= cfg.learning_rate * vb
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise FloatingPointError("training diverged to non-finite parameters")
    return replace(model, W=W, b=b)


def accuracy(model: SoftmaxClassifier, X, y) -> float:
    y = np.asarray(y).reshape(-1)
    if y.size == 0:
        return float("nan")
    return float(np.mean(pseudo_label(model, X).reshape(-1) == y))


def nuclear_norm(P) -> float:
    """Sum of singular values of the (N, C) probability matrix."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.size == 0:
        raise ValidationError("nuclear norm needs a nonempty 2-D matrix")
    return float(np.linalg.svd(P, compute_uv=False).sum())
