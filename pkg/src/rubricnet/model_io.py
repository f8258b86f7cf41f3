"""Versioned JSON model files.

One container for all model kinds, discriminated by ``model_kind``:

    {"format_version": 1, "model_kind": "hnn" | "nb" | "logreg" | "mlp",
     "vocab": {...}, ...kind-specific scalars...,
     "params": {name: {"rows": int, "cols": int, "data": [floats]}}}

Floats ride through ``repr`` so serialize -> deserialize -> serialize is
byte-identical, and a reloaded model scores bit-identically to the one
that was saved.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .baselines import LogRegModel, MlpModel, NaiveBayesModel
from .errors import FormatError, ParseError
from .hnn import (
    AttentionParams,
    EmbeddingTable,
    HeadParams,
    HnnDims,
    HnnModel,
    LstmDirectionParams,
)
from .registry import MODEL_KINDS, FittedModel
from .text import Vocabulary

FORMAT_VERSION = 1


def vocab_fingerprint(vocab: Vocabulary) -> str:
    return hashlib.sha256(
        json.dumps(vocab.to_json(), sort_keys=True).encode("utf-8")
    ).hexdigest()


def _arr_to_json(a: np.ndarray) -> dict:
    if a.ndim == 1:
        return {"rows": 1, "cols": int(a.shape[0]), "data": [float(v) for v in a]}
    return {
        "rows": int(a.shape[0]),
        "cols": int(a.shape[1]),
        "data": [float(v) for v in a.reshape(-1)],
    }


def _arr_from_json(obj: dict, name: str) -> np.ndarray:
    try:
        rows, cols, data = obj["rows"], obj["cols"], obj["data"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"parameter {name!r}: expected rows/cols/data") from exc
    a = np.asarray(data, dtype=np.float64)
    if a.size != rows * cols:
        raise FormatError(
            f"parameter {name!r}: {a.size} values for a {rows}x{cols} tensor"
        )
    return a.reshape(rows, cols)


def _vec(obj: dict, name: str) -> np.ndarray:
    return _arr_from_json(obj, name).reshape(-1)


def _hnn_payload(m: HnnModel) -> dict:
    return {
        "dims": {
            "d_emb": m.dims.d_emb,
            "d_hid": m.dims.d_hid,
            "d_att": m.dims.d_att,
            "max_len": m.dims.max_len,
        },
        "version": m.version,
        "embedding_trainable": m.embedding.trainable,
        "params": {
            "embedding.table": _arr_to_json(m.embedding.table),
            "forward_lstm.W": _arr_to_json(m.forward_lstm.W),
            "forward_lstm.U": _arr_to_json(m.forward_lstm.U),
            "forward_lstm.b": _arr_to_json(m.forward_lstm.b),
            "backward_lstm.W": _arr_to_json(m.backward_lstm.W),
            "backward_lstm.U": _arr_to_json(m.backward_lstm.U),
            "backward_lstm.b": _arr_to_json(m.backward_lstm.b),
            "attention.W_a": _arr_to_json(m.attention.W_a),
            "attention.b_a": _arr_to_json(m.attention.b_a),
            "attention.v": _arr_to_json(m.attention.v),
            "head.W_o": _arr_to_json(m.head.W_o),
            "head.b_o": _arr_to_json(m.head.b_o),
        },
    }


def _check_hnn_shapes(m: HnnModel, path) -> None:
    V = len(m.vocab)
    E, H, A = m.dims.d_emb, m.dims.d_hid, m.dims.d_att
    expected = {
        "embedding.table": (V, E),
        "forward_lstm.W": (4 * H, E),
        "forward_lstm.U": (4 * H, H),
        "forward_lstm.b": (4 * H,),
        "backward_lstm.W": (4 * H, E),
        "backward_lstm.U": (4 * H, H),
        "backward_lstm.b": (4 * H,),
        "attention.W_a": (A, 2 * H),
        "attention.b_a": (A,),
        "attention.v": (A,),
        "head.W_o": (5, 2 * H),
        "head.b_o": (5,),
    }
    actual = {
        "embedding.table": m.embedding.table.shape,
        "forward_lstm.W": m.forward_lstm.W.shape,
        "forward_lstm.U": m.forward_lstm.U.shape,
        "forward_lstm.b": m.forward_lstm.b.shape,
        "backward_lstm.W": m.backward_lstm.W.shape,
        "backward_lstm.U": m.backward_lstm.U.shape,
        "backward_lstm.b": m.backward_lstm.b.shape,
        "attention.W_a": m.attention.W_a.shape,
        "attention.b_a": m.attention.b_a.shape,
        "attention.v": m.attention.v.shape,
        "head.W_o": m.head.W_o.shape,
        "head.b_o": m.head.b_o.shape,
    }
    for name, want in expected.items():
        if actual[name] != want:
            raise FormatError(
                f"{path}: tensor {name} has shape {actual[name]}, expected {want}"
            )


def _hnn_from_payload(obj: dict, vocab: Vocabulary) -> HnnModel:
    p = obj["params"]
    dims = HnnDims(**obj["dims"])
    return HnnModel(
        embedding=EmbeddingTable(
            table=_arr_from_json(p["embedding.table"], "embedding.table"),
            trainable=bool(obj.get("embedding_trainable", True)),
        ),
        forward_lstm=LstmDirectionParams(
            W=_arr_from_json(p["forward_lstm.W"], "forward_lstm.W"),
            U=_arr_from_json(p["forward_lstm.U"], "forward_lstm.U"),
            b=_vec(p["forward_lstm.b"], "forward_lstm.b"),
        ),
        backward_lstm=LstmDirectionParams(
            W=_arr_from_json(p["backward_lstm.W"], "backward_lstm.W"),
            U=_arr_from_json(p["backward_lstm.U"], "backward_lstm.U"),
            b=_vec(p["backward_lstm.b"], "backward_lstm.b"),
        ),
        attention=AttentionParams(
            W_a=_arr_from_json(p["attention.W_a"], "attention.W_a"),
            b_a=_vec(p["attention.b_a"], "attention.b_a"),
            v=_vec(p["attention.v"], "attention.v"),
        ),
        head=HeadParams(
            W_o=_arr_from_json(p["head.W_o"], "head.W_o"),
            b_o=_vec(p["head.b_o"], "head.b_o"),
        ),
        dims=dims,
        vocab=vocab,
        version=str(obj.get("version", "1")),
    )


def save_model(fitted: FittedModel, path: str | Path) -> None:
    obj: dict = {
        "format_version": FORMAT_VERSION,
        "model_kind": fitted.kind,
        "vocab": fitted.vocab.to_json(),
        "vocab_fingerprint": vocab_fingerprint(fitted.vocab),
    }
    m = fitted.model
    if fitted.kind == "hnn":
        obj.update(_hnn_payload(m))
    elif fitted.kind == "nb":
        obj["alpha"] = m.alpha
        obj["params"] = {
            "log_prior": _arr_to_json(m.log_prior),
            "log_lik_0": _arr_to_json(m.log_lik[:, 0, :]),
            "log_lik_1": _arr_to_json(m.log_lik[:, 1, :]),
        }
    elif fitted.kind == "logreg":
        obj["l2"] = m.l2
        obj["params"] = {"W": _arr_to_json(m.W), "b": _arr_to_json(m.b)}
    elif fitted.kind == "mlp":
        obj["params"] = {
            "W1": _arr_to_json(m.W1),
            "b1": _arr_to_json(m.b1),
            "W2": _arr_to_json(m.W2),
            "b2": _arr_to_json(m.b2),
        }
    else:
        raise FormatError(f"unknown model kind {fitted.kind!r}")
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_model(path: str | Path) -> FittedModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: model file must be a JSON object")
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(
            f"{path}: unsupported format_version {version!r} (expected {FORMAT_VERSION})"
        )
    kind = obj.get("model_kind")
    if kind not in MODEL_KINDS:
        raise FormatError(f"{path}: unknown model_kind {kind!r}")
    vocab = Vocabulary.from_json(obj.get("vocab", {}))
    want = obj.get("vocab_fingerprint")
    if want is not None and vocab_fingerprint(vocab) != want:
        raise FormatError(
            f"{path}: vocabulary does not match its recorded fingerprint"
        )
    p = obj.get("params", {})
    if kind == "hnn":
        model = _hnn_from_payload(obj, vocab)
        _check_hnn_shapes(model, path)
        return FittedModel(kind, vocab, model)
    if kind == "nb":
        lik0 = _arr_from_json(p["log_lik_0"], "log_lik_0")
        lik1 = _arr_from_json(p["log_lik_1"], "log_lik_1")
        model = NaiveBayesModel(
            log_prior=_arr_from_json(p["log_prior"], "log_prior"),
            log_lik=np.stack([lik0, lik1], axis=1),
            alpha=float(obj["alpha"]),
        )
        if model.log_lik.shape != (5, 2, len(vocab)) or model.log_prior.shape != (5, 2):
            raise FormatError(f"{path}: NB tensors inconsistent with vocabulary size")
        return FittedModel(kind, vocab, model)
    if kind == "logreg":
        model = LogRegModel(
            W=_arr_from_json(p["W"], "W"), b=_vec(p["b"], "b"), l2=float(obj["l2"])
        )
        if model.W.shape != (5, len(vocab)) or model.b.shape != (5,):
            raise FormatError(f"{path}: logreg tensors inconsistent with vocabulary size")
        return FittedModel(kind, vocab, model)
    model = MlpModel(
        W1=_arr_from_json(p["W1"], "W1"),
        b1=_vec(p["b1"], "b1"),
        W2=_arr_from_json(p["W2"], "W2"),
        b2=_vec(p["b2"], "b2"),
    )
    d_mlp = model.W1.shape[0]
    if (
        model.W1.shape != (d_mlp, len(vocab))
        or model.b1.shape != (d_mlp,)
        or model.W2.shape != (5, d_mlp)
        or model.b2.shape != (5,)
    ):
        raise FormatError(f"{path}: mlp tensors inconsistent with vocabulary size")
    return FittedModel(kind, vocab, model)
