"""One place that knows how to build, fit, and run each model kind
("hnn", "nb", "logreg", "mlp") from raw labeled responses.

A fitted model is bundled with the vocabulary it was fitted under, so
prediction takes raw text and reproduces the exact preprocessing used at
fit time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baselines import (
    ALPHA_DEFAULT,
    EPOCHS_DEFAULT,
    L2_DEFAULT,
    LR_DEFAULT,
    LogRegModel,
    MlpConfig,
    MlpModel,
    NaiveBayesModel,
    logreg_fit,
    logreg_predict,
    mlp_fit,
    mlp_predict,
    nb_fit,
    nb_predict,
)
from .corpus import DataSplit, LabeledResponse
from .errors import ConfigError
from .hnn import HnnDims, HnnModel, forward, init_hnn
from .text import Vocabulary, bow_features, build_vocab, cap_text, encode, tokenize
from .training import TrainConfig, TrainRecord, train

MODEL_KINDS = ("hnn", "nb", "logreg", "mlp")
DEEP_KINDS = ("hnn", "mlp")  # trained under the 60/15/15 protocol


@dataclass
class FittedModel:
    kind: str
    vocab: Vocabulary
    model: HnnModel | NaiveBayesModel | LogRegModel | MlpModel

    def predict_probs(self, texts: list[str]) -> np.ndarray:
        """(n, 5) aspect probabilities for raw response texts."""
        out = np.empty((len(texts), 5))
        if self.kind == "hnn":
            for i, text in enumerate(texts):
                seq = encode(
                    tokenize(cap_text(text)), self.vocab, self.model.dims.max_len
                )
                out[i], _ = forward(seq, self.model)
            return out
        predict = {
            "nb": nb_predict,
            "logreg": logreg_predict,
            "mlp": mlp_predict,
        }[self.kind]
        for i, text in enumerate(texts):
            x = bow_features(tokenize(cap_text(text)), self.vocab)
            out[i] = predict(self.model, x)
        return out


def _bow_pairs(items: list[LabeledResponse], vocab: Vocabulary):
    return [
        (bow_features(tokenize(cap_text(it.text)), vocab), it.labels) for it in items
    ]


def resolve_config(kind: str, overrides: dict | None) -> dict:
    """Kind-appropriate hyperparameters: module defaults overlaid with any
    user-supplied values. Unknown keys are rejected."""
    overrides = dict(overrides or {})
    if kind == "hnn":
        dims = overrides.pop("dims", {})
        base = TrainConfig().to_json()
        unknown = set(overrides) - set(base)
        if unknown:
            raise ConfigError(f"unknown hnn config fields: {sorted(unknown)}")
        base.update(overrides)
        base["dims"] = {**HnnDims().__dict__, **dims}
        return base
    if kind == "nb":
        base = {"alpha": ALPHA_DEFAULT}
    elif kind == "logreg":
        base = {"l2": L2_DEFAULT, "lr": LR_DEFAULT, "epochs": EPOCHS_DEFAULT}
    elif kind == "mlp":
        cfg = MlpConfig()
        base = {
            "d_mlp": cfg.d_mlp,
            "learning_rate": cfg.learning_rate,
            "epochs": cfg.epochs,
        }
    else:
        raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    unknown = set(overrides) - set(base)
    if unknown:
        raise ConfigError(f"unknown {kind} config fields: {sorted(unknown)}")
    base.update(overrides)
    return base


def fit_model(
    kind: str,
    items: list[LabeledResponse],
    seed: int = 0,
    config: dict | None = None,
    validation: list[LabeledResponse] | None = None,
) -> tuple[FittedModel, TrainRecord | None, dict]:
    """Fit one model kind on raw responses.

    Returns (fitted model, per-epoch record where the kind has epochs,
    the fully resolved hyperparameter dict). The resolved dict records the
    effective seed, so a run is reproducible from it alone.
    """
    resolved = resolve_config(kind, config)
    resolved["seed"] = seed
    vocab = build_vocab([tokenize(cap_text(it.text)) for it in items])
    if kind == "hnn":
        dims = HnnDims(**resolved["dims"])
        model = init_hnn(vocab, dims, seed=seed)
        tc = TrainConfig(
            **{k: v for k, v in resolved.items() if k != "dims"} | {"seed": seed}
        )
        model, record = train(
            model, DataSplit(train=items, validation=validation or [], test=[]), tc
        )
        return FittedModel(kind, vocab, model), record, resolved
    pairs = _bow_pairs(items, vocab)
    if kind == "nb":
        model = nb_fit(pairs, alpha=resolved["alpha"])
        return FittedModel(kind, vocab, model), None, resolved
    if kind == "logreg":
        model = logreg_fit(
            pairs,
            l2=resolved["l2"],
            lr=resolved["lr"],
            epochs=resolved["epochs"],
            seed=seed,
        )
        return FittedModel(kind, vocab, model), None, resolved
    model = mlp_fit(
        pairs,
        MlpConfig(
            d_mlp=resolved["d_mlp"],
            learning_rate=resolved["learning_rate"],
            epochs=resolved["epochs"],
        ),
        seed=seed,
    )
    return FittedModel(kind, vocab, model), None, resolved


def model_factory(kind: str, config: dict | None = None):
    """Factory suitable for the cross-validation driver: binds a kind and
    config, leaving (train items, seed) to the driver."""

    def build(items: list[LabeledResponse], seed: int) -> FittedModel:
        fitted, _, _ = fit_model(kind, items, seed=seed, config=config)
        return fitted

    return build
