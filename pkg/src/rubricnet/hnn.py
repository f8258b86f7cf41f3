"""The hybrid scoring network: embedding lookup -> bidirectional LSTM ->
additive attention -> weighted aggregation -> sigmoid 5-way multi-label head.

Conventions used throughout this module:

* LSTM gate pre-activations are stacked in the order i | f | g | o, so the
  input weights W are (4H x E), recurrent weights U are (4H x H) and the
  bias is (4H,). A step computes i=sig, f=sig, g=tanh, o=sig of the four
  slices, then c = f*c_prev + i*g and h = o*tanh(c).
* Both directions start from zero h and c and run only over the real
  (unmasked) positions; the backward direction processes the sequence
  reversed. Output rows at padded positions are zero.
* Attention scores real positions with v . tanh(W_a s_t + b_a) and the
  masked softmax from the numeric kernel; padded positions get weight 0.
* ``forward`` returns the five aspect probabilities plus a cache of every
  intermediate that ``backward`` needs; gradients are fully analytic and
  are validated against central finite differences by the training module.

An empty sequence (true_length 0) is still scorable: the context vector is
zero, so the output is sigmoid of the head bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import N_ASPECTS
from .errors import ContractError, FormatError, ParseError
from .numeric import Rng, sigmoid, softmax_masked, tanh_map, uniform_init
from .text import PAD_ID, TokenSequence, Vocabulary

BCE_EPS = 1e-12


@dataclass
class EmbeddingTable:
    table: np.ndarray  # (V, d_emb); PAD row all-zero, never updated
    trainable: bool = True


@dataclass
class LstmDirectionParams:
    W: np.ndarray  # (4H, d_emb)
    U: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)


@dataclass
class AttentionParams:
    W_a: np.ndarray  # (d_att, 2H)
    b_a: np.ndarray  # (d_att,)
    v: np.ndarray  # (d_att,)


@dataclass
class HeadParams:
    W_o: np.ndarray  # (N_ASPECTS, 2H)
    b_o: np.ndarray  # (N_ASPECTS,)


@dataclass
class HnnDims:
    d_emb: int = 32
    d_hid: int = 32
    d_att: int = 16
    max_len: int = 40


@dataclass
class HnnModel:
    embedding: EmbeddingTable
    forward_lstm: LstmDirectionParams
    backward_lstm: LstmDirectionParams
    attention: AttentionParams
    head: HeadParams
    dims: HnnDims
    vocab: Vocabulary
    version: str = "1"

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        """Trainable tensors in a fixed, documented order."""
        out: list[tuple[str, np.ndarray]] = []
        if self.embedding.trainable:
            out.append(("embedding.table", self.embedding.table))
        out += [
            ("forward_lstm.W", self.forward_lstm.W),
            ("forward_lstm.U", self.forward_lstm.U),
            ("forward_lstm.b", self.forward_lstm.b),
            ("backward_lstm.W", self.backward_lstm.W),
            ("backward_lstm.U", self.backward_lstm.U),
            ("backward_lstm.b", self.backward_lstm.b),
            ("attention.W_a", self.attention.W_a),
            ("attention.b_a", self.attention.b_a),
            ("attention.v", self.attention.v),
            ("head.W_o", self.head.W_o),
            ("head.b_o", self.head.b_o),
        ]
        return out


def _glorot(rng: Rng, rows: int, cols: int) -> np.ndarray:
    return uniform_init(rng, rows, cols, math.sqrt(6.0 / (rows + cols)))


def init_hnn(
    vocab: Vocabulary,
    dims: HnnDims | None = None,
    seed: int = 0,
    forget_bias: float = 1.0,
) -> HnnModel:
    """Fresh model: Glorot-uniform weights, zero biases except the forget
    gate (initialized to ``forget_bias``), zeroed PAD embedding row."""
    dims = dims or HnnDims()
    rng = Rng(seed)
    V, E, H, A = len(vocab), dims.d_emb, dims.d_hid, dims.d_att

    emb = _glorot(rng, V, E)
    emb[PAD_ID, :] = 0.0

    def direction() -> LstmDirectionParams:
        W = _glorot(rng, 4 * H, E)
        U = _glorot(rng, 4 * H, H)
        b = np.zeros(4 * H)
        b[H : 2 * H] = forget_bias
        return LstmDirectionParams(W=W, U=U, b=b)

    fwd = direction()
    bwd = direction()
    att = AttentionParams(
        W_a=_glorot(rng, A, 2 * H),
        b_a=np.zeros(A),
        v=_glorot(rng, 1, A).reshape(A),
    )
    head = HeadParams(W_o=_glorot(rng, N_ASPECTS, 2 * H), b_o=np.zeros(N_ASPECTS))
    return HnnModel(
        embedding=EmbeddingTable(table=emb, trainable=True),
        forward_lstm=fwd,
        backward_lstm=bwd,
        attention=att,
        head=head,
        dims=dims,
        vocab=vocab,
    )


def embed(seq: TokenSequence, emb: EmbeddingTable) -> np.ndarray:
    """Row-per-position lookup; padded positions yield the zero PAD row."""
    if seq.ids.max(initial=0) >= emb.table.shape[0]:
        raise IndexError(
            f"token id {int(seq.ids.max())} out of range for vocabulary of "
            f"{emb.table.shape[0]}"
        )
    return emb.table[seq.ids]


def lstm_cell(
    x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, p: LstmDirectionParams
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM step; returns (h, c)."""
    H = h_prev.shape[0]
    z = p.W @ x + p.U @ h_prev + p.b
    i = sigmoid(z[:H])
    f = sigmoid(z[H : 2 * H])
    g = tanh_map(z[2 * H : 3 * H])
    o = sigmoid(z[3 * H :])
    c = f * c_prev + i * g
    h = o * tanh_map(c)
    return h, c


def _run_direction(x_dir: np.ndarray, p: LstmDirectionParams) -> dict:
    """Run one direction over ``x_dir`` (already in processing order).

    Returns the stacked per-step quantities the analytic backward pass
    consumes. The input-weight product is hoisted out of the step loop.
    """
    T = x_dir.shape[0]
    H = p.U.shape[1]
    zx = x_dir @ p.W.T  # (T, 4H)
    i_s = np.empty((T, H)); f_s = np.empty((T, H))
    g_s = np.empty((T, H)); o_s = np.empty((T, H))
    tanhc_s = np.empty((T, H))
    h_prev_s = np.empty((T, H)); c_prev_s = np.empty((T, H))
    h_s = np.empty((T, H))
    h = np.zeros(H); c = np.zeros(H)
    for t in range(T):
        z = zx[t] + p.U @ h + p.b
        i = sigmoid(z[:H])
        f = sigmoid(z[H : 2 * H])
        g = tanh_map(z[2 * H : 3 * H])
        o = sigmoid(z[3 * H :])
        h_prev_s[t] = h; c_prev_s[t] = c
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        i_s[t] = i; f_s[t] = f; g_s[t] = g; o_s[t] = o
        tanhc_s[t] = tc; h_s[t] = h
    return {
        "x": x_dir, "i": i_s, "f": f_s, "g": g_s, "o": o_s,
        "tanhc": tanhc_s, "h_prev": h_prev_s, "c_prev": c_prev_s, "h": h_s,
    }


def _direction_backward(pass_: dict, d_h: np.ndarray, p: LstmDirectionParams) -> dict:
    """Backpropagate through one direction run.

    ``d_h`` holds the loss gradient w.r.t. each step's emitted hidden
    state, in processing order. Returns gradients for W, U, b and the
    direction's inputs.
    """
    T, H = d_h.shape
    i_s, f_s, g_s, o_s = pass_["i"], pass_["f"], pass_["g"], pass_["o"]
    tanhc_s, c_prev_s, h_prev_s = pass_["tanhc"], pass_["c_prev"], pass_["h_prev"]
    dz = np.empty((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        dh = d_h[t] + dh_next
        do = dh * tanhc_s[t]
        dc = dc_next + dh * o_s[t] * (1.0 - tanhc_s[t] ** 2)
        di = dc * g_s[t]
        df = dc * c_prev_s[t]
        dg = dc * i_s[t]
        dz[t, :H] = di * i_s[t] * (1.0 - i_s[t])
        dz[t, H : 2 * H] = df * f_s[t] * (1.0 - f_s[t])
        dz[t, 2 * H : 3 * H] = dg * (1.0 - g_s[t] ** 2)
        dz[t, 3 * H :] = do * o_s[t] * (1.0 - o_s[t])
        dh_next = p.U.T @ dz[t]
        dc_next = dc * f_s[t]
    return {
        "W": dz.T @ pass_["x"],
        "U": dz.T @ h_prev_s,
        "b": dz.sum(axis=0),
        "x": dz @ p.W,
    }


def bilstm(
    embedded: np.ndarray,
    mask: np.ndarray,
    fwd: LstmDirectionParams,
    bwd: LstmDirectionParams,
) -> np.ndarray:
    """Concatenated forward/backward hidden states per position.

    Expects a left-aligned mask (real tokens first). Padded rows are zero.
    """
    L = embedded.shape[0]
    H = fwd.U.shape[1]
    T = int(mask.sum())
    out = np.zeros((L, 2 * H))
    if T == 0:
        return out
    x = embedded[:T]
    out[:T, :H] = _run_direction(x, fwd)["h"]
    out[:T, H:] = _run_direction(x[::-1], bwd)["h"][::-1]
    return out


def attention_weights(
    states: np.ndarray, mask: np.ndarray, p: AttentionParams
) -> np.ndarray:
    """Additive-attention distribution over positions; masked entries are 0."""
    T = int(mask.sum())
    scores = np.zeros(states.shape[0])
    if T > 0:
        act = tanh_map(states[:T] @ p.W_a.T + p.b_a)
        scores[:T] = act @ p.v
    return softmax_masked(scores, mask)


def aggregate(states: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Attention-weighted sum of the per-position states."""
    return weights @ states


@dataclass
class HnnCache:
    """Everything ``backward`` needs, captured by ``forward``."""

    model: HnnModel
    seq: TokenSequence
    x: np.ndarray
    fwd_pass: dict | None
    bwd_pass: dict | None
    states: np.ndarray
    att_act: np.ndarray | None  # (T, d_att) tanh activations
    weights: np.ndarray
    ctx: np.ndarray
    probs: np.ndarray


def forward(seq: TokenSequence, m: HnnModel) -> tuple[np.ndarray, HnnCache]:
    """Score one encoded sequence; returns (5 probabilities, cache)."""
    H = m.dims.d_hid
    T = seq.true_length
    x = embed(seq, m.embedding)
    L = x.shape[0]
    states = np.zeros((L, 2 * H))
    fwd_pass = bwd_pass = None
    att_act = None
    weights = np.zeros(L)
    if T > 0:
        xr = x[:T]
        fwd_pass = _run_direction(xr, m.forward_lstm)
        bwd_pass = _run_direction(xr[::-1], m.backward_lstm)
        states[:T, :H] = fwd_pass["h"]
        states[:T, H:] = bwd_pass["h"][::-1]
        att_act = tanh_map(states[:T] @ m.attention.W_a.T + m.attention.b_a)
        scores = np.zeros(L)
        scores[:T] = att_act @ m.attention.v
        weights = softmax_masked(scores, seq.mask)
    ctx = weights @ states
    probs = sigmoid(m.head.W_o @ ctx + m.head.b_o)
    cache = HnnCache(
        model=m, seq=seq, x=x, fwd_pass=fwd_pass, bwd_pass=bwd_pass,
        states=states, att_act=att_act, weights=weights, ctx=ctx, probs=probs,
    )
    return probs, cache


def bce_loss(probs: np.ndarray, labels) -> float:
    """Mean binary cross-entropy over the five aspects, probability clamped
    to [eps, 1-eps] so the log never sees 0."""
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (N_ASPECTS,):
        raise ContractError(f"labels must have length {N_ASPECTS}")
    p = np.clip(probs, BCE_EPS, 1.0 - BCE_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def backward(cache: HnnCache, labels) -> dict[str, np.ndarray]:
    """Analytic gradients of the mean BCE w.r.t. every model tensor.

    Returns a dict keyed like ``HnnModel.parameters()`` names (the
    embedding gradient is always present; the update step skips it when
    the table is frozen). The PAD embedding row's gradient is forced to
    zero. Recurrent gradients stop at position ``true_length``.
    """
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (N_ASPECTS,):
        raise ContractError(f"labels must have length {N_ASPECTS}")
    m = cache.model
    if cache.probs.shape != (N_ASPECTS,) or cache.states.shape[1] != 2 * m.dims.d_hid:
        raise ContractError("cache does not match the model it claims to come from")
    H = m.dims.d_hid
    T = cache.seq.true_length

    grads: dict[str, np.ndarray] = {
        "embedding.table": np.zeros_like(m.embedding.table),
        "forward_lstm.W": np.zeros_like(m.forward_lstm.W),
        "forward_lstm.U": np.zeros_like(m.forward_lstm.U),
        "forward_lstm.b": np.zeros_like(m.forward_lstm.b),
        "backward_lstm.W": np.zeros_like(m.backward_lstm.W),
        "backward_lstm.U": np.zeros_like(m.backward_lstm.U),
        "backward_lstm.b": np.zeros_like(m.backward_lstm.b),
        "attention.W_a": np.zeros_like(m.attention.W_a),
        "attention.b_a": np.zeros_like(m.attention.b_a),
        "attention.v": np.zeros_like(m.attention.v),
        "head.W_o": np.zeros_like(m.head.W_o),
        "head.b_o": np.zeros_like(m.head.b_o),
    }

    # head: d loss / d logit = (p - y) / n_aspects
    du = (cache.probs - y) / N_ASPECTS
    grads["head.W_o"] = np.outer(du, cache.ctx)
    grads["head.b_o"] = du
    if T == 0:
        return grads
    dctx = m.head.W_o.T @ du

    # aggregation: ctx = sum_t w_t s_t
    dweights = cache.states @ dctx
    ds = np.outer(cache.weights, dctx)

    # masked softmax over the first T (left-aligned) positions
    wl = cache.weights[:T]
    dwl = dweights[:T]
    dscores = wl * (dwl - float(wl @ dwl))

    # additive attention: score_t = v . tanh(W_a s_t + b_a)
    act = cache.att_act
    grads["attention.v"] = act.T @ dscores
    dq = np.outer(dscores, m.attention.v) * (1.0 - act**2)
    grads["attention.W_a"] = dq.T @ cache.states[:T]
    grads["attention.b_a"] = dq.sum(axis=0)
    ds[:T] += dq @ m.attention.W_a

    # split per-position state gradients into the two directions
    d_fwd = _direction_backward(cache.fwd_pass, ds[:T, :H], m.forward_lstm)
    d_bwd = _direction_backward(cache.bwd_pass, ds[:T, H:][::-1], m.backward_lstm)
    grads["forward_lstm.W"] = d_fwd["W"]
    grads["forward_lstm.U"] = d_fwd["U"]
    grads["forward_lstm.b"] = d_fwd["b"]
    grads["backward_lstm.W"] = d_bwd["W"]
    grads["backward_lstm.U"] = d_bwd["U"]
    grads["backward_lstm.b"] = d_bwd["b"]

    dx = d_fwd["x"] + d_bwd["x"][::-1]
    np.add.at(grads["embedding.table"], cache.seq.ids[:T], dx)
    grads["embedding.table"][PAD_ID, :] = 0.0
    return grads


def load_pretrained_embeddings(
    path, vocab: Vocabulary, seed: int = 0
) -> EmbeddingTable:
    """Frozen embedding table from a text file of ``token v1 .. vd`` lines.

    Tokens absent from the file get reproducible seeded-uniform rows; the
    PAD row stays zero. The dimension is taken from the first line and
    every line must match it.
    """
    vectors: dict[str, np.ndarray] = {}
    d = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            tok, vals = parts[0], parts[1:]
            if d is None:
                d = len(vals)
                if d == 0:
                    raise FormatError(f"{path}:{lineno}: no vector components")
            elif len(vals) != d:
                raise FormatError(
                    f"{path}:{lineno}: expected {d} components, got {len(vals)}"
                )
            try:
                vectors[tok] = np.array([float(v) for v in vals])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad float ({exc})") from exc
    if d is None:
        raise FormatError(f"{path}: empty embedding file")
    rng = Rng(seed)
    bound = math.sqrt(6.0 / (len(vocab) + d))
    table = np.zeros((len(vocab), d))
    for tok, idx in vocab.token_to_id.items():
        if idx == PAD_ID:
            continue
        if tok in vectors:
            table[idx] = vectors[tok]
        else:
            table[idx] = uniform_init(rng, 1, d, bound).reshape(d)
    return EmbeddingTable(table=table, trainable=False)
