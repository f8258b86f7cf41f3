"""Optimizers, the epoch loop with validation tracking and early stopping,
the cross-validation driver, and the finite-difference gradient checker.

Determinism contract: a training run is a pure function of (data, config,
seed). Batch order for epoch e is derived from (seed, e) alone, all
parameter initialization and shuffling goes through the seeded splitmix
stream, and no wall-clock value ever feeds back into the math.
"""

from __future__ import annotations

import copy
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import N_ASPECTS
from .corpus import DataSplit, LabeledResponse, kfold
from .errors import ConfigError, ContractError, ParseError, TrainingError
from .hnn import HnnModel, backward, bce_loss, forward
from .numeric import Rng, derive_seed
from .text import TokenSequence, cap_text, encode, tokenize

_CONFIG_FIELDS = (
    "epochs", "batch_size", "learning_rate", "optimizer", "beta1", "beta2",
    "eps", "seed", "clip_norm", "early_stop_patience",
)


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    clip_norm: float | None = None
    early_stop_patience: int | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"optimizer must be sgd or adam, got {self.optimizer!r}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("beta1 and beta2 must lie strictly in (0, 1)")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigError("clip_norm must be positive when set")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ConfigError("early_stop_patience must be >= 1 when set")

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in _CONFIG_FIELDS}

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        unknown = set(obj) - set(_CONFIG_FIELDS)
        if unknown:
            raise ConfigError(f"unknown train config fields: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_file(cls, path: str | Path) -> "TrainConfig":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: train config must be a JSON object")
        return cls.from_json(obj)


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: list[tuple[str, np.ndarray]]) -> "AdamState":
        return cls(
            m={name: np.zeros_like(p) for name, p in params},
            v={name: np.zeros_like(p) for name, p in params},
        )


@dataclass
class EpochStats:
    train_loss: float
    val_loss: float | None
    val_accuracy: float | None
    seconds: float


@dataclass
class TrainRecord:
    epochs: list[EpochStats] = field(default_factory=list)
    stopped_early: bool = False
    best_epoch: int | None = None

    def to_json(self) -> dict:
        return {
            "stopped_early": self.stopped_early,
            "best_epoch": self.best_epoch,
            "epochs": [
                {
                    "epoch": i + 1,
                    "train_loss": e.train_loss,
                    "val_loss": e.val_loss,
                    "val_accuracy": e.val_accuracy,
                    "seconds": e.seconds,
                }
                for i, e in enumerate(self.epochs)
            ],
        }


def _check_shapes(params, grads):
    for name, p in params:
        g = grads.get(name)
        if g is None or g.shape != p.shape:
            got = None if g is None else g.shape
            raise ContractError(f"gradient for {name}: expected {p.shape}, got {got}")


def sgd_step(params: list[tuple[str, np.ndarray]], grads: dict[str, np.ndarray], lr: float) -> None:
    """In-place p <- p - lr * g for every parameter tensor."""
    _check_shapes(params, grads)
    for name, p in params:
        p -= lr * grads[name]


def adam_step(
    params: list[tuple[str, np.ndarray]],
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> None:
    """One bias-corrected Adam update, in place; advances the step counter."""
    _check_shapes(params, grads)
    if set(state.m) != {name for name, _ in params}:
        raise ContractError("Adam state does not cover the given parameters")
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, p in params:
        g = grads[name]
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / c1
        v_hat = state.v[name] / c2
        p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)


def _clip_global(grads: dict[str, np.ndarray], threshold: float) -> None:
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > threshold:
        scale = threshold / total
        for g in grads.values():
            g *= scale


def encode_items(
    items: list[LabeledResponse], model: HnnModel
) -> list[tuple[TokenSequence, tuple[int, ...]]]:
    """Preprocess responses with the model's own vocabulary and max_len."""
    out = []
    for it in items:
        seq = encode(tokenize(cap_text(it.text)), model.vocab, model.dims.max_len)
        out.append((seq, it.labels))
    return out


def _evaluate_encoded(model: HnnModel, encoded) -> tuple[float, float]:
    """Mean loss and exact-aspect accuracy over already-encoded items."""
    total_loss = 0.0
    correct = 0
    for seq, labels in encoded:
        probs, _ = forward(seq, model)
        total_loss += bce_loss(probs, labels)
        preds = probs >= 0.5
        correct += int((preds == np.asarray(labels, dtype=bool)).sum())
    n = len(encoded)
    return total_loss / n, correct / (n * N_ASPECTS)


def train(
    model: HnnModel, data: DataSplit, config: TrainConfig
) -> tuple[HnnModel, TrainRecord]:
    """Mini-batch training of the scoring network.

    Batches are formed by a seeded shuffle each epoch (the last partial
    batch is kept). Validation metrics are recorded when a validation
    split exists; with ``early_stop_patience`` set, training stops after
    that many epochs without a validation-loss improvement and the
    best-validation parameters are restored.
    """
    if not data.train:
        raise TrainingError("empty training split")
    train_enc = encode_items(data.train, model)
    val_enc = encode_items(data.validation, model) if data.validation else None

    params = model.parameters()
    adam = AdamState.for_params(params)
    record = TrainRecord()
    best_val = float("inf")
    best_snapshot = None
    best_epoch = None
    since_best = 0
    n = len(train_enc)

    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = Rng(derive_seed(config.seed, epoch)).permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = [train_enc[i] for i in order[start : start + config.batch_size]]
            grads_sum: dict[str, np.ndarray] | None = None
            batch_loss = 0.0
            for seq, labels in batch:
                probs, cache = forward(seq, model)
                batch_loss += bce_loss(probs, labels)
                g = backward(cache, labels)
                if grads_sum is None:
                    grads_sum = g
                else:
                    for name in grads_sum:
                        grads_sum[name] += g[name]
            if not np.isfinite(batch_loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch + 1}, batch {start // config.batch_size + 1}"
                )
            for name in grads_sum:
                grads_sum[name] /= len(batch)
            if config.clip_norm is not None:
                _clip_global(grads_sum, config.clip_norm)
            if config.optimizer == "adam":
                adam_step(params, grads_sum, adam, config)
            else:
                sgd_step(params, grads_sum, config.learning_rate)
            epoch_loss += batch_loss
        epoch_loss /= n

        val_loss = val_acc = None
        if val_enc:
            val_loss, val_acc = _evaluate_encoded(model, val_enc)
            if val_loss < best_val:
                best_val = val_loss
                best_epoch = epoch + 1
                since_best = 0
                if config.early_stop_patience is not None:
                    best_snapshot = {name: p.copy() for name, p in params}
            else:
                since_best += 1
        record.epochs.append(
            EpochStats(
                train_loss=epoch_loss,
                val_loss=val_loss,
                val_accuracy=val_acc,
                seconds=time.perf_counter() - t0,
            )
        )
        if (
            config.early_stop_patience is not None
            and val_enc
            and since_best >= config.early_stop_patience
        ):
            record.stopped_early = True
            break

    record.best_epoch = best_epoch
    if best_snapshot is not None:
        for name, p in params:
            p[...] = best_snapshot[name]
    return model, record


def cross_validate(
    model_factory: Callable[[list[LabeledResponse], int], object],
    data: list[LabeledResponse],
    k: int = 10,
    seed: int = 0,
) -> list:
    """k-fold cross-validation: a fresh model per fold (seed+fold_index),
    trained on k-1 folds and evaluated on the held-out fold."""
    from .evaluation import report_for_model

    reports = []
    for fold_index, (train_items, test_items) in enumerate(kfold(data, k, seed)):
        fitted = model_factory(train_items, seed + fold_index)
        reports.append(report_for_model(fitted, test_items))
    return reports


# --------------------------------------------------------------------------
# gradient checking
# --------------------------------------------------------------------------


def _hnn_check_target(model: HnnModel, seq: TokenSequence, labels):
    def loss() -> float:
        probs, _ = forward(seq, model)
        return bce_loss(probs, labels)

    def analytic() -> dict[str, np.ndarray]:
        _, cache = forward(seq, model)
        return backward(cache, labels)

    return model.parameters(), loss, analytic


def _mlp_check_target(model, x: np.ndarray, labels):
    from .baselines import MlpModel, mlp_backward, mlp_forward

    assert isinstance(model, MlpModel)

    def loss() -> float:
        probs, _ = mlp_forward(model, x)
        return bce_loss(probs, labels)

    def analytic() -> dict[str, np.ndarray]:
        _, cache = mlp_forward(model, x)
        return mlp_backward(model, cache, labels)

    return model.parameters(), loss, analytic


def grad_check(
    model,
    x,
    labels,
    h: float = 1e-5,
    analytic_grads: dict[str, np.ndarray] | None = None,
) -> float:
    """Max relative error between analytic gradients and central finite
    differences, taken over every scalar parameter.

    Works on the scoring network (``x`` is a TokenSequence) and the MLP
    baseline (``x`` is a bag-of-words vector). Intended for tiny dims;
    the cost is two loss evaluations per parameter. ``analytic_grads``
    may be supplied to probe the checker itself with corrupted values.
    """
    if isinstance(model, HnnModel):
        params, loss, analytic = _hnn_check_target(model, x, labels)
    else:
        params, loss, analytic = _mlp_check_target(model, x, labels)
    grads = analytic() if analytic_grads is None else analytic_grads
    worst = 0.0
    for name, p in params:
        g = grads[name]
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for idx in range(flat.size):
            keep = flat[idx]
            flat[idx] = keep + h
            up = loss()
            flat[idx] = keep - h
            down = loss()
            flat[idx] = keep
            numeric = (up - down) / (2.0 * h)
            a = gflat[idx]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
