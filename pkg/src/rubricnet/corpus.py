"""Dataset model, JSONL ingestion, train/validation/test splitting, k-fold
partitioning, and a synthetic rubric-aligned response generator.

A dataset is a list of :class:`LabeledResponse`: one free-text answer plus
five binary labels, one per scoring aspect. All randomized operations are
pure functions of (input, seed); splits move whole responses, never
individual aspect labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import N_ASPECTS
from .errors import ParseError, SizeError, ValidationError
from .numeric import Rng


@dataclass(frozen=True)
class LabeledResponse:
    id: str
    text: str
    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) != N_ASPECTS:
            raise ValidationError(
                f"response {self.id!r}: expected {N_ASPECTS} labels, got {len(self.labels)}"
            )
        if any(v not in (0, 1) for v in self.labels):
            raise ValidationError(f"response {self.id!r}: labels must be 0 or 1")
        if not self.text:
            raise ValidationError(f"response {self.id!r}: text must be non-empty")


@dataclass
class DataSplit:
    train: list[LabeledResponse]
    validation: list[LabeledResponse]
    test: list[LabeledResponse]

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)


def load_dataset(path: str | Path) -> list[LabeledResponse]:
    """Parse a JSONL dataset file, preserving line order.

    Each line is ``{"id": str, "text": str, "labels": [int x 5]}``. Blank
    lines are not allowed mid-file and ids must be unique.
    """
    items: list[LabeledResponse] = []
    seen: set[str] = set()
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict) or not {"id", "text", "labels"} <= obj.keys():
            raise ParseError(f"{path}:{lineno}: expected object with id/text/labels")
        rid = obj["id"]
        if not isinstance(rid, str):
            raise ValidationError(f"{path}:{lineno}: id must be a string")
        if rid in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate id {rid!r}")
        labels = obj["labels"]
        if (
            not isinstance(labels, list)
            or len(labels) != N_ASPECTS
            or any(v not in (0, 1) for v in labels)
        ):
            raise ValidationError(
                f"{path}:{lineno}: labels must be {N_ASPECTS} binary values"
            )
        if not isinstance(obj["text"], str) or not obj["text"]:
            raise ValidationError(f"{path}:{lineno}: text must be a non-empty string")
        seen.add(rid)
        items.append(LabeledResponse(id=rid, text=obj["text"], labels=tuple(labels)))
    return items


def dump_dataset(items: list[LabeledResponse], path: str | Path) -> None:
    """Write a dataset as JSONL (inverse of :func:`load_dataset`)."""
    with open(path, "w", encoding="utf-8") as fh:
        for it in items:
            fh.write(
                json.dumps(
                    {"id": it.id, "text": it.text, "labels": list(it.labels)},
                    ensure_ascii=False,
                )
                + "\n"
            )


def _shuffled(data: list[LabeledResponse], seed: int) -> list[LabeledResponse]:
    out = list(data)
    Rng(seed).shuffle(out)
    return out


def _stratified_order(data: list[LabeledResponse], seed: int) -> list[LabeledResponse]:
    """Shuffle within the two aspect-1 strata, then interleave them so the
    head/tail cuts used by the split functions hit both strata proportionally."""
    rng = Rng(seed)
    pos = [r for r in data if r.labels[0] == 1]
    neg = [r for r in data if r.labels[0] == 0]
    rng.shuffle(pos)
    rng.shuffle(neg)
    merged: list[LabeledResponse] = []
    np_, nn = len(pos), len(neg)
    i = j = 0
    for k in range(len(data)):
        # largest-remainder interleave keeps both strata spread evenly
        if j >= nn or (i < np_ and i * (np_ + nn) <= k * np_):
            merged.append(pos[i])
            i += 1
        else:
            merged.append(neg[j])
            j += 1
    return merged


def split_shallow(
    data: list[LabeledResponse], seed: int, stratify: bool = False
) -> DataSplit:
    """80/20 train/test split (no validation part).

    Test size is floor(20%); the remainder goes to train.
    """
    n = len(data)
    if n < 5:
        raise SizeError(f"shallow split needs at least 5 items, got {n}")
    order = _stratified_order(data, seed) if stratify else _shuffled(data, seed)
    n_test = (n * 20) // 100
    return DataSplit(train=order[n_test:], validation=[], test=order[:n_test])


def split_deep(
    data: list[LabeledResponse], seed: int, stratify: bool = False
) -> DataSplit:
    """60/15/15 train/validation/test split.

    The ratios cover only 90% of the data; the residual 10% is assigned to
    train (so a 100-item dataset splits 70/15/15). Validation and test
    sizes are floor(15%) each.
    """
    n = len(data)
    if n < 10:
        raise SizeError(f"deep split needs at least 10 items, got {n}")
    order = _stratified_order(data, seed) if stratify else _shuffled(data, seed)
    n_val = (n * 15) // 100
    n_test = (n * 15) // 100
    return DataSplit(
        train=order[n_val + n_test :],
        validation=order[:n_val],
        test=order[n_val : n_val + n_test],
    )


def kfold(
    data: list[LabeledResponse], k: int, seed: int
) -> list[tuple[list[LabeledResponse], list[LabeledResponse]]]:
    """k disjoint (train, test) pairs whose test parts partition the data.

    Fold test sizes differ by at most one; the first ``n % k`` folds get
    the extra item.
    """
    n = len(data)
    if k < 2:
        raise SizeError(f"k must be at least 2, got {k}")
    if k > n:
        raise SizeError(f"cannot make {k} folds from {n} items")
    order = _shuffled(data, seed)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        test = order[start : start + size]
        train = order[:start] + order[start + size :]
        folds.append((train, test))
        start += size
    return folds


# --------------------------------------------------------------------------
# synthetic responses
# --------------------------------------------------------------------------

# Marker phrases mirror the five rubric aspects for the gas-filled-balloon
# item: (1) A and D same substance, (2) flammability pattern, (3) density
# pattern, (4) flammability as characteristic property, (5) density as
# characteristic property. No phrase contains another aspect's phrase as a
# contiguous token run, and the noise vocabulary shares no token with any
# phrase, so label recovery by phrase presence is exact.
DEFAULT_MARKER_PHRASES: tuple[tuple[str, ...], ...] = (
    ("gas a and gas d are the same", "a and d could be the same gas"),
    ("flammability of a matches d", "same flammability pattern"),
    ("density of a matches d", "same density pattern"),
    ("flammability is a characteristic", "flammability identifies a substance"),
    ("density is a characteristic", "density identifies a substance"),
)

DEFAULT_NOISE_VOCAB: tuple[str, ...] = (
    "balloon", "red", "blue", "because", "i", "think", "it", "looks",
    "like", "so", "my", "answer", "was", "different", "number", "table",
)


@dataclass
class SyntheticSpec:
    n: int
    seed: int
    aspect_marker_phrases: tuple[tuple[str, ...], ...] = DEFAULT_MARKER_PHRASES
    noise_vocab: tuple[str, ...] = DEFAULT_NOISE_VOCAB
    label_prior: tuple[float, ...] = field(default=(0.5,) * N_ASPECTS)

    def __post_init__(self):
        if self.n < 0:
            raise ValidationError(f"n must be non-negative, got {self.n}")
        if len(self.aspect_marker_phrases) != N_ASPECTS:
            raise ValidationError(
                f"aspect_marker_phrases needs {N_ASPECTS} lists, "
                f"got {len(self.aspect_marker_phrases)}"
            )
        for i, phrases in enumerate(self.aspect_marker_phrases):
            if len(phrases) < 2:
                raise ValidationError(
                    f"aspect {i + 1} needs at least 2 marker phrases, got {len(phrases)}"
                )
        if len(self.label_prior) != N_ASPECTS:
            raise ValidationError(
                f"label_prior needs {N_ASPECTS} entries, got {len(self.label_prior)}"
            )
        if any(not (0.0 < p < 1.0) for p in self.label_prior):
            raise ValidationError("label_prior entries must lie strictly in (0, 1)")
        if not self.noise_vocab:
            raise ValidationError("noise_vocab must be non-empty")

    @classmethod
    def from_json(cls, obj: dict) -> "SyntheticSpec":
        known = {"n", "seed", "aspect_marker_phrases", "noise_vocab", "label_prior"}
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown synthetic spec fields: {sorted(unknown)}")
        if "n" not in obj or "seed" not in obj:
            raise ValidationError("synthetic spec requires 'n' and 'seed'")
        kwargs = {"n": int(obj["n"]), "seed": int(obj["seed"])}
        if "aspect_marker_phrases" in obj:
            kwargs["aspect_marker_phrases"] = tuple(
                tuple(p) for p in obj["aspect_marker_phrases"]
            )
        if "noise_vocab" in obj:
            kwargs["noise_vocab"] = tuple(obj["noise_vocab"])
        if "label_prior" in obj:
            kwargs["label_prior"] = tuple(float(p) for p in obj["label_prior"])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "SyntheticSpec":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise ValidationError(f"{path}: synthetic spec must be a JSON object")
        return cls.from_json(obj)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "aspect_marker_phrases": [list(p) for p in self.aspect_marker_phrases],
            "noise_vocab": list(self.noise_vocab),
            "label_prior": list(self.label_prior),
        }


def generate_synthetic(spec: SyntheticSpec) -> list[LabeledResponse]:
    """Generate ``spec.n`` labeled responses whose labels are recoverable by
    marker-phrase presence.

    Each positive aspect contributes one marker phrase; phrases appear in a
    shuffled order, separated by single noise words so no token run can
    span two phrases, followed by a short noise tail. Markers lead the text
    so a 150-byte cap rarely destroys them.
    """
    rng = Rng(spec.seed)
    items: list[LabeledResponse] = []
    for i in range(spec.n):
        labels = tuple(
            1 if rng.next_float() < p else 0 for p in spec.label_prior
        )
        chosen: list[str] = []
        for aspect, lab in enumerate(labels):
            if lab == 1:
                phrases = spec.aspect_marker_phrases[aspect]
                chosen.append(phrases[rng.below(len(phrases))])
        rng.shuffle(chosen)
        words: list[str] = []
        for k, phrase in enumerate(chosen):
            if k > 0:
                words.append(spec.noise_vocab[rng.below(len(spec.noise_vocab))])
            words.extend(phrase.split())
        for _ in range(1 + rng.below(2)):
            words.append(spec.noise_vocab[rng.below(len(spec.noise_vocab))])
        items.append(
            LabeledResponse(id=f"syn-{i:05d}", text=" ".join(words), labels=labels)
        )
    return items


def marker_labels(text: str, spec: SyntheticSpec) -> tuple[int, ...]:
    """Rule-based label recovery: aspect j is 1 iff one of its marker
    phrases occurs as a contiguous token run in the tokenized text."""
    from .text import tokenize

    tokens = tokenize(text)
    out = []
    for phrases in spec.aspect_marker_phrases:
        hit = 0
        for phrase in phrases:
            ptok = phrase.split()
            m = len(ptok)
            if m and any(tokens[s : s + m] == ptok for s in range(len(tokens) - m + 1)):
                hit = 1
                break
        out.append(hit)
    return tuple(out)
