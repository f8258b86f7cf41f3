"""Classical comparison models over bag-of-words features: per-aspect
multinomial Naive Bayes, per-aspect logistic regression, and a single
hidden-layer MLP with a sigmoid multi-label head.

All three are one-vs-rest across the five scoring aspects. Fits are
deterministic functions of (data, hyperparameters, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import N_ASPECTS
from .errors import ConfigError, ContractError, TrainingError
from .hnn import bce_loss
from .numeric import Rng, sigmoid, uniform_init

ALPHA_DEFAULT = 1.0
L2_DEFAULT = 1e-4
LR_DEFAULT = 0.1
EPOCHS_DEFAULT = 500

TrainPair = tuple[np.ndarray, tuple[int, ...]]  # (bow vector, 5 labels)


def _stack(train: list[TrainPair]) -> tuple[np.ndarray, np.ndarray]:
    if not train:
        raise ContractError("training set must be non-empty")
    X = np.stack([x for x, _ in train]).astype(np.float64)
    Y = np.array([labels for _, labels in train], dtype=np.float64)
    if Y.shape[1] != N_ASPECTS:
        raise ContractError(f"labels must have {N_ASPECTS} entries")
    return X, Y


# --------------------------------------------------------------------------
# Naive Bayes
# --------------------------------------------------------------------------


@dataclass
class NaiveBayesModel:
    """Per aspect: log class priors (2,) and log token likelihoods (2, V).

    Axis 0 of both arrays is the aspect, axis 1 the class (0, 1).
    """

    log_prior: np.ndarray  # (N_ASPECTS, 2)
    log_lik: np.ndarray  # (N_ASPECTS, 2, V)
    alpha: float


def nb_fit(train: list[TrainPair], alpha: float = ALPHA_DEFAULT) -> NaiveBayesModel:
    """Multinomial NB with Laplace-alpha token smoothing, fitted
    independently per aspect.

    Class priors use add-one smoothing on the document counts so an
    aspect whose training labels are all one class still yields a valid
    (strictly positive) prior.
    """
    if alpha <= 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    X, Y = _stack(train)
    n, V = X.shape
    log_prior = np.zeros((N_ASPECTS, 2))
    log_lik = np.zeros((N_ASPECTS, 2, V))
    for aspect in range(N_ASPECTS):
        y = Y[:, aspect]
        for cls in (0, 1):
            docs = X[y == cls]
            n_cls = docs.shape[0]
            log_prior[aspect, cls] = math.log((n_cls + 1.0) / (n + 2.0))
            counts = docs.sum(axis=0) if n_cls else np.zeros(V)
            log_lik[aspect, cls] = np.log(
                (counts + alpha) / (counts.sum() + alpha * V)
            )
    return NaiveBayesModel(log_prior=log_prior, log_lik=log_lik, alpha=alpha)


def nb_predict(m: NaiveBayesModel, x: np.ndarray) -> np.ndarray:
    """Per-aspect posterior P(y=1 | x); always strictly inside (0, 1)."""
    if x.shape[0] != m.log_lik.shape[2]:
        raise ContractError(
            f"feature length {x.shape[0]} does not match vocabulary {m.log_lik.shape[2]}"
        )
    s0 = m.log_prior[:, 0] + m.log_lik[:, 0, :] @ x
    s1 = m.log_prior[:, 1] + m.log_lik[:, 1, :] @ x
    return sigmoid(s1 - s0)


# --------------------------------------------------------------------------
# logistic regression
# --------------------------------------------------------------------------


@dataclass
class LogRegModel:
    W: np.ndarray  # (N_ASPECTS, V)
    b: np.ndarray  # (N_ASPECTS,)
    l2: float


def logreg_fit(
    train: list[TrainPair],
    l2: float = L2_DEFAULT,
    lr: float = LR_DEFAULT,
    epochs: int = EPOCHS_DEFAULT,
    seed: int = 0,
) -> LogRegModel:
    """Full-batch gradient descent on per-aspect binary cross-entropy with
    an L2 penalty on the weights (not the bias). Weights start at zero,
    so the fit is trivially deterministic; ``seed`` is accepted for
    interface symmetry with the other fits."""
    if lr <= 0:
        raise ConfigError(f"lr must be positive, got {lr}")
    if l2 < 0:
        raise ConfigError(f"l2 must be non-negative, got {l2}")
    X, Y = _stack(train)
    n, V = X.shape
    W = np.zeros((N_ASPECTS, V))
    b = np.zeros(N_ASPECTS)
    # overflow on the way to the explicit divergence check is expected noise
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(epochs):
            P = sigmoid(X @ W.T + b)
            diff = P - Y  # (n, N_ASPECTS)
            loss = float(
                -np.mean(Y * np.log(np.clip(P, 1e-12, None))
                         + (1 - Y) * np.log(np.clip(1 - P, 1e-12, None)))
            )
            if not np.isfinite(loss) or not np.all(np.isfinite(W)):
                raise TrainingError(f"logistic regression diverged at epoch {epoch + 1}")
            W -= lr * (diff.T @ X / n + l2 * W)
            b -= lr * diff.mean(axis=0)
    return LogRegModel(W=W, b=b, l2=l2)


def logreg_predict(m: LogRegModel, x: np.ndarray) -> np.ndarray:
    if x.shape[0] != m.W.shape[1]:
        raise ContractError(
            f"feature length {x.shape[0]} does not match vocabulary {m.W.shape[1]}"
        )
    return sigmoid(m.W @ x + m.b)


# --------------------------------------------------------------------------
# MLP
# --------------------------------------------------------------------------


@dataclass
class MlpConfig:
    d_mlp: int = 32
    learning_rate: float = LR_DEFAULT
    epochs: int = EPOCHS_DEFAULT

    def __post_init__(self):
        if self.d_mlp < 1:
            raise ConfigError(f"d_mlp must be >= 1, got {self.d_mlp}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")


@dataclass
class MlpModel:
    W1: np.ndarray  # (d_mlp, V)
    b1: np.ndarray  # (d_mlp,)
    W2: np.ndarray  # (N_ASPECTS, d_mlp)
    b2: np.ndarray  # (N_ASPECTS,)

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        return [("W1", self.W1), ("b1", self.b1), ("W2", self.W2), ("b2", self.b2)]


def init_mlp(n_features: int, config: MlpConfig, seed: int = 0) -> MlpModel:
    """Glorot-uniform hidden layer; the output layer starts at zero so
    initial predictions are exactly 0.5 on every aspect."""
    rng = Rng(seed)
    bound = math.sqrt(6.0 / (n_features + config.d_mlp))
    return MlpModel(
        W1=uniform_init(rng, config.d_mlp, n_features, bound),
        b1=np.zeros(config.d_mlp),
        W2=np.zeros((N_ASPECTS, config.d_mlp)),
        b2=np.zeros(N_ASPECTS),
    )


def mlp_forward(m: MlpModel, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Single-sample forward pass; the cache feeds ``mlp_backward``."""
    h = np.tanh(m.W1 @ x + m.b1)
    probs = sigmoid(m.W2 @ h + m.b2)
    return probs, {"x": x, "h": h, "probs": probs}


def mlp_backward(m: MlpModel, cache: dict, labels) -> dict[str, np.ndarray]:
    """Analytic gradients of the mean-over-aspects BCE for one sample."""
    y = np.asarray(labels, dtype=np.float64)
    du = (cache["probs"] - y) / N_ASPECTS
    dh = m.W2.T @ du
    da = dh * (1.0 - cache["h"] ** 2)
    return {
        "W1": np.outer(da, cache["x"]),
        "b1": da,
        "W2": np.outer(du, cache["h"]),
        "b2": du,
    }


def mlp_fit(
    train: list[TrainPair], config: MlpConfig | None = None, seed: int = 0
) -> MlpModel:
    """Full-batch gradient descent on the mean BCE (over items and aspects)."""
    config = config or MlpConfig()
    X, Y = _stack(train)
    n, V = X.shape
    m = init_mlp(V, config, seed)
    lr = config.learning_rate
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            A = X @ m.W1.T + m.b1
            Hh = np.tanh(A)
            P = sigmoid(Hh @ m.W2.T + m.b2)
            loss = bce_batch(P, Y)
            if not np.isfinite(loss) or not np.all(np.isfinite(m.W1)):
                raise TrainingError(f"mlp diverged at epoch {epoch + 1}")
            dU = (P - Y) / (N_ASPECTS * n)
            dW2 = dU.T @ Hh
            db2 = dU.sum(axis=0)
            dHh = dU @ m.W2
            dA = dHh * (1.0 - Hh**2)
            m.W2 -= lr * dW2
            m.b2 -= lr * db2
            m.W1 -= lr * (dA.T @ X)
            m.b1 -= lr * dA.sum(axis=0)
    return m


def mlp_predict(m: MlpModel, x: np.ndarray) -> np.ndarray:
    probs, _ = mlp_forward(m, x)
    return probs


def bce_batch(P: np.ndarray, Y: np.ndarray) -> float:
    """Mean binary cross-entropy over a whole (n, N_ASPECTS) batch."""
    return float(np.mean([bce_loss(p, y) for p, y in zip(P, Y)]))
