"""Dense float64 kernel: matrix product, elementwise nonlinearities, masked
softmax, and a deterministic seeded random generator.

Matrices are plain 2-D ``numpy`` arrays of dtype float64, row-major. The
random generator is a counter-based splitmix64 stream implemented with
integer arithmetic only, so the same seed yields the same stream on every
platform; tests pin its output. System RNGs are never used.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, EmptyAttentionError, ShapeError

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class Rng:
    """splitmix64 stream; the state is the seed plus a call counter."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._state = self.seed

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        # 53-bit mantissa, offset by half a step: strictly inside (0, 1).
        return ((self.next_u64() >> 11) + 0.5) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next_float()

    def below(self, n: int) -> int:
        """Integer in [0, n). Modulo bias is ~n/2**64, irrelevant here."""
        if n <= 0:
            raise ContractError(f"below() needs n >= 1, got {n}")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        idx = list(range(n))
        self.shuffle(idx)
        return idx


def derive_seed(seed: int, index: int) -> int:
    """Decorrelated child seed for fold/epoch ``index`` of a run seeded with
    ``seed``; a pure function of its two arguments."""
    return Rng((seed ^ ((index + 1) * _GAMMA)) & _MASK64).next_u64()


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Elementwise logistic function, stable across the float64 range.

    Computed piecewise so exp() is only ever called on non-positive
    arguments; large negative inputs underflow to 0.0 rather than NaN.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh_map(x: np.ndarray) -> np.ndarray:
    """Elementwise tanh (numpy's is already saturation-safe)."""
    return np.tanh(np.asarray(x, dtype=np.float64))


def softmax_masked(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over the unmasked positions only; masked entries are exactly 0.

    Masked scores are dropped before exponentiation (rather than set to
    -inf afterwards), so no Inf-Inf can arise during the max subtraction.
    """
    scores = np.asarray(scores, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if scores.shape != mask.shape or scores.ndim != 1:
        raise ShapeError(
            f"scores {scores.shape} and mask {mask.shape} must be equal-length vectors"
        )
    if not mask.any():
        raise EmptyAttentionError("softmax over an all-masked sequence")
    live = scores[mask]
    e = np.exp(live - live.max())
    out = np.zeros_like(scores)
    out[mask] = e / e.sum()
    return out


def uniform_init(rng: Rng, rows: int, cols: int, bound: float) -> np.ndarray:
    """rows x cols matrix with i.i.d. entries in the open interval (-bound, bound).

    Entries are drawn row-major from ``rng``, so the result is a pure
    function of (rng state, rows, cols, bound).
    """
    if bound <= 0:
        raise ContractError(f"bound must be positive, got {bound}")
    flat = [rng.uniform(-bound, bound) for _ in range(rows * cols)]
    return np.array(flat, dtype=np.float64).reshape(rows, cols)
