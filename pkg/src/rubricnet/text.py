"""Text preprocessing: byte cap, tokenization, vocabulary, fixed-length
integer encoding, and bag-of-words features for the classical baselines.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, ParseError, ValidationError

PAD_ID = 0
UNK_ID = 1
_RESERVED = ("<pad>", "<unk>")

DEFAULT_TEXT_CAP_BYTES = 150
DEFAULT_MAX_LEN = 40

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def cap_text(text: str, cap: int = DEFAULT_TEXT_CAP_BYTES) -> str:
    """UTF-8 prefix of at most ``cap`` bytes, cut back to a character boundary."""
    raw = text.encode("utf-8")
    if len(raw) <= cap:
        return text
    # input is valid UTF-8, so the only undecodable part is a trailing
    # partial character, which "ignore" drops
    return raw[:cap].decode("utf-8", errors="ignore")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on maximal runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    """Immutable token <-> id mapping with reserved PAD=0 and UNK=1 slots.

    Ids are contiguous; non-reserved tokens are ordered by (frequency
    descending, token ascending) at build time so the mapping is a pure
    function of the corpus.
    """

    def __init__(self, tokens: list[str], min_freq: int = 1):
        if len(set(tokens)) != len(tokens):
            raise ValidationError("vocabulary tokens must be unique")
        if any(t in _RESERVED for t in tokens):
            raise ValidationError("reserved tokens cannot be re-added")
        self.min_freq = min_freq
        self.id_to_token: list[str] = list(_RESERVED) + list(tokens)
        self.token_to_id: dict[str, int] = {
            t: i for i, t in enumerate(self.id_to_token)
        }

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id_for(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def to_json(self) -> dict:
        return {"min_freq": self.min_freq, "tokens": self.id_to_token[len(_RESERVED):]}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocabulary":
        if not isinstance(obj, dict) or "tokens" not in obj:
            raise ParseError("vocabulary JSON must be an object with a 'tokens' array")
        return cls(list(obj["tokens"]), min_freq=int(obj.get("min_freq", 1)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc.msg})") from exc
        return cls.from_json(obj)


def build_vocab(corpus: list[list[str]], min_freq: int = 1) -> Vocabulary:
    """Vocabulary over all tokens with corpus frequency >= min_freq."""
    if min_freq < 1:
        raise ContractError(f"min_freq must be >= 1, got {min_freq}")
    counts: Counter[str] = Counter()
    for tokens in corpus:
        counts.update(tokens)
    kept = sorted(
        (t for t, c in counts.items() if c >= min_freq),
        key=lambda t: (-counts[t], t),
    )
    return Vocabulary(kept, min_freq=min_freq)


@dataclass
class TokenSequence:
    """Fixed-length encoded sequence: left-aligned real tokens, PAD after."""

    ids: np.ndarray  # int64, length max_len
    mask: np.ndarray  # bool, length max_len; True = real token
    true_length: int

    def __post_init__(self):
        if self.ids.shape != self.mask.shape or self.ids.ndim != 1:
            raise ValidationError("ids and mask must be equal-length vectors")
        n = len(self.ids)
        if not (0 <= self.true_length <= n):
            raise ValidationError("true_length out of range")
        if not np.array_equal(self.mask, np.arange(n) < self.true_length):
            raise ValidationError("mask must be True exactly on the first true_length positions")
        if np.any(self.ids[~self.mask] != PAD_ID):
            raise ValidationError("padded positions must hold PAD")


def encode(tokens: list[str], vocab: Vocabulary, max_len: int = DEFAULT_MAX_LEN) -> TokenSequence:
    """Map tokens to ids (UNK for out-of-vocab), truncate/pad to max_len."""
    if max_len < 1:
        raise ContractError(f"max_len must be >= 1, got {max_len}")
    kept = tokens[:max_len]
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    for i, tok in enumerate(kept):
        ids[i] = vocab.id_for(tok)
    mask = np.arange(max_len) < len(kept)
    return TokenSequence(ids=ids, mask=mask, true_length=len(kept))


def bow_features(tokens: list[str], vocab: Vocabulary) -> np.ndarray:
    """Token occurrence counts over the vocabulary (UNK bucket included).

    Unlike :func:`encode`, this path never truncates to max_len; only the
    upstream byte cap limits what it sees.
    """
    counts = np.zeros(len(vocab), dtype=np.float64)
    for tok in tokens:
        counts[vocab.id_for(tok)] += 1.0
    return counts
