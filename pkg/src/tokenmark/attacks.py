"""Token-level perturbation simulators for robustness sweeps.

All attacks are pure functions of (tokens, ratio, seed) and keep every id
inside the vocabulary. Counts use round-half-away-from-zero on ratio*T.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .types import RangeError


def _count(ratio: float, length: int) -> int:
    if not 0.0 <= ratio <= 1.0:
        raise RangeError(f"ratio={ratio} outside [0, 1]")
    return int(math.floor(ratio * length + 0.5))


def random_replace(
    tokens: Sequence[int], ratio: float, seed: int, vocab_size: int
) -> np.ndarray:
    """Substitute round(ratio*T) distinct positions with uniform ids drawn
    from the vocabulary minus the current id."""
    tokens = np.asarray(tokens, dtype=np.int64).copy()
    k = _count(ratio, len(tokens))
    if k == 0:
        return tokens
    rng = np.random.Generator(np.random.PCG64(seed))
    positions = rng.choice(len(tokens), size=k, replace=False)
    draws = rng.integers(0, vocab_size - 1, size=k)
    draws += draws >= tokens[positions]  # skip the current id
    tokens[positions] = draws
    return tokens


def random_delete(tokens: Sequence[int], ratio: float, seed: int) -> np.ndarray:
    """Remove round(ratio*T) uniformly chosen positions."""
    tokens = np.asarray(tokens, dtype=np.int64)
    k = _count(ratio, len(tokens))
    if k == 0:
        return tokens.copy()
    rng = np.random.Generator(np.random.PCG64(seed))
    positions = rng.choice(len(tokens), size=k, replace=False)
    return np.delete(tokens, positions)


def random_insert(
    tokens: Sequence[int], ratio: float, seed: int, vocab_size: int
) -> np.ndarray:
    """Insert round(ratio*T) uniform ids, one at a time at uniform positions."""
    out = [int(t) for t in tokens]
    k = _count(ratio, len(tokens))
    rng = np.random.Generator(np.random.PCG64(seed))
    for _ in range(k):
        pos = int(rng.integers(0, len(out) + 1))
        out.insert(pos, int(rng.integers(0, vocab_size)))
    return np.asarray(out, dtype=np.int64)
