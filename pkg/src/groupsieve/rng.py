"""Counter-based pseudo-randomness.

Every draw is a pure function of (seed, step, sample index) through the
splitmix64 finalizer, so walks are embarrassingly parallel and results are
independent of chunking or worker count. The scalar and vectorized paths
compute bit-identical values; tests rely on that to cross-check the batched
sampler against an exact big-integer walk.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def mix64(x: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def mix64_np(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer over uint64."""
    with np.errstate(over="ignore"):
        z = (x + np.uint64(_GOLDEN)).astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def draw_u64(seed: int, step: int, sample: int) -> int:
    """The (seed, step, sample) word of the stream, scalar path."""
    return mix64(mix64(mix64(seed & _MASK) ^ (step & _MASK)) ^ (sample & _MASK))


def draw_u64_np(seed: int, step: int, samples: np.ndarray) -> np.ndarray:
    """The (seed, step, *) words of the stream for a batch of sample indices."""
    step_key = np.uint64(mix64(mix64(seed & _MASK) ^ (step & _MASK)))
    return mix64_np(step_key ^ samples.astype(np.uint64))


def choice_index(seed: int, step: int, sample: int, n: int) -> int:
    """Scalar choice in [0, n); bias is below 2^-60 for the n used here."""
    return draw_u64(seed, step, sample) % n


def choice_index_np(seed: int, step: int, samples: np.ndarray, n: int) -> np.ndarray:
    return (draw_u64_np(seed, step, samples) % np.uint64(n)).astype(np.int64)


def sign_vector(n: int, salt: int) -> np.ndarray:
    """Deterministic +-1 start vector derived from hashed indices."""
    bits = mix64_np(np.arange(n, dtype=np.uint64) ^ np.uint64(salt & _MASK))
    return np.where((bits >> np.uint64(63)).astype(bool), 1.0, -1.0)


def uniform_vector(n: int, salt: int) -> np.ndarray:
    """Deterministic start vector with hashed entries in [-0.5, 0.5).

    Sign patterns can be exactly orthogonal to a small eigenspace (on a
    4-cycle more than a third of them are); continuous entries make that a
    measure-zero accident.
    """
    bits = mix64_np(np.arange(n, dtype=np.uint64) ^ np.uint64(salt & _MASK))
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0 ** -53) - 0.5
