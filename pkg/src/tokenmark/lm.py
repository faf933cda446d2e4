"""Synthetic next-token providers: seeded Dirichlet draws and n-gram models.

These stand in for a real language model so every experiment runs on the
desk. Both are deterministic functions of the context and their
construction parameters, and immutable after construction.
"""

from __future__ import annotations

import hashlib
import struct
from collections import Counter, defaultdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .types import EmptyCorpus, RangeError, TokenDistribution


def _context_seed(seed: int, context: Sequence[int]) -> int:
    h = hashlib.sha256()
    h.update(struct.pack("<q", seed))
    for t in context:
        h.update(struct.pack("<I", int(t)))
    return int.from_bytes(h.digest()[:8], "little")


class DirichletLM:
    """Each distinct trailing context gets its own Dirichlet(concentration)
    draw; the concentration knob sets the entropy regime."""

    def __init__(
        self,
        vocab_size: int,
        concentration: float = 5.0,
        seed: int = 0,
        context_order: int = 2,
    ):
        if vocab_size < 2:
            raise RangeError(f"vocab_size={vocab_size} must be >= 2")
        if concentration <= 0:
            raise RangeError(f"concentration={concentration} must be > 0")
        if context_order < 0:
            raise RangeError(f"context_order={context_order} must be >= 0")
        self.vocab_size = vocab_size
        self.concentration = float(concentration)
        self.seed = int(seed)
        self.context_order = int(context_order)

    def __call__(self, context: Sequence[int]) -> TokenDistribution:
        trailing = list(context[-self.context_order :]) if self.context_order else []
        rng = np.random.Generator(np.random.PCG64(_context_seed(self.seed, trailing)))
        probs = rng.dirichlet(np.full(self.vocab_size, self.concentration))
        return TokenDistribution(probs)


class NGramLM:
    """Order-k counts with additive smoothing; unseen contexts fall back to
    the uniform smoothed distribution."""

    def __init__(self, order: int, vocab_size: int, smoothing: float,
                 counts: dict[tuple, Counter], totals: dict[tuple, int]):
        self.order = order
        self.vocab_size = vocab_size
        self.smoothing = smoothing
        self._counts = counts
        self._totals = totals

    def __call__(self, context: Sequence[int]) -> TokenDistribution:
        ctx = tuple(int(t) for t in context[-self.order :]) if self.order else ()
        denom_base = self._totals.get(ctx, 0) + self.smoothing * self.vocab_size
        probs = np.full(self.vocab_size, self.smoothing / denom_base)
        for token, count in self._counts.get(ctx, {}).items():
            probs[token] += count / denom_base
        return TokenDistribution(probs)


def ngram_train(
    corpus: Sequence[int],
    order: int,
    smoothing: float,
    vocab_size: int | None = None,
) -> NGramLM:
    """Tally (context, successor) pairs over the corpus."""
    corpus = [int(t) for t in corpus]
    if not corpus:
        raise EmptyCorpus("corpus has no tokens")
    if smoothing <= 0:
        raise RangeError(f"smoothing={smoothing} must be > 0")
    if order < 0:
        raise RangeError(f"order={order} must be >= 0")
    if vocab_size is None:
        vocab_size = max(corpus) + 1
    if max(corpus) >= vocab_size or min(corpus) < 0:
        raise RangeError("corpus token outside [0, vocab_size)")
    counts: dict[tuple, Counter] = defaultdict(Counter)
    totals: dict[tuple, int] = defaultdict(int)
    for i in range(order, len(corpus)):
        ctx = tuple(corpus[i - order : i])
        counts[ctx][corpus[i]] += 1
        totals[ctx] += 1
    return NGramLM(order, vocab_size, float(smoothing), dict(counts), dict(totals))


def load_token_file(path: str | Path) -> list[int]:
    """Whitespace- or newline-separated integer token ids."""
    text = Path(path).read_text()
    tokens = [int(tok) for tok in text.split()]
    if not tokens:
        raise EmptyCorpus(f"no tokens in {path}")
    return tokens


def load_text_bytes(path: str | Path) -> list[int]:
    """Byte-level tokenization of a text file: each byte is one id, N=256."""
    data = Path(path).read_bytes()
    if not data:
        raise EmptyCorpus(f"empty file {path}")
    return list(data)
