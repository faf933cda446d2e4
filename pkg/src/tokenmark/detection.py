"""Message recovery from a bare token sequence by evidence accumulation.

For every scored position and layer the detector re-derives the generation
material from the observed sequence alone, looks up which subset the next
token landed in, and converts "that subset was green" into evidence for the
bit value implied by the mask. Opportunity counters record, per bit and
hypothesis, how often the mask configuration could have produced such
evidence at all; comparing the two normalized hit rates decodes each bit,
with ties going to 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .keys import derive_step_material
from .types import DecodedMessage, TokenOutOfRange, WatermarkConfig, validate_config


@dataclass(eq=False)
class EvidenceCounters:
    """Hit and opportunity counts for both bit hypotheses; additive."""

    hit0: np.ndarray
    hit1: np.ndarray
    total0: np.ndarray
    total1: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "EvidenceCounters":
        return cls(*(np.zeros(n, dtype=np.int64) for _ in range(4)))

    def __add__(self, other: "EvidenceCounters") -> "EvidenceCounters":
        return EvidenceCounters(
            self.hit0 + other.hit0,
            self.hit1 + other.hit1,
            self.total0 + other.total0,
            self.total1 + other.total1,
        )


def accumulate(
    tokens: Sequence[int],
    cfg: WatermarkConfig,
    start: int = 1,
    end: int | None = None,
    backend: str = "auto",
) -> EvidenceCounters:
    """Scan positions [start, end) of the observed sequence (default: all
    scoreable ones, i.e. every token except the first).

    Counters over disjoint position ranges of the same sequence sum to the
    full-sequence counters, so accumulation can be split and merged.
    Sequences shorter than 2 yield all-zero counters.
    """
    validate_config(cfg)
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.size and (tokens.min() < 0 or tokens.max() >= cfg.vocab_size):
        bad = tokens[(tokens < 0) | (tokens >= cfg.vocab_size)][0]
        raise TokenOutOfRange(f"token id {bad} outside [0, {cfg.vocab_size})")
    counters = EvidenceCounters.zeros(cfg.message_bits)
    nprime = cfg.segment_bits
    length = len(tokens)
    stop = length if end is None else min(end, length)
    local = np.arange(nprime)
    for pos in range(max(start, 1), stop):
        context = tokens[:pos]
        observed = int(tokens[pos])
        for layer in range(1, cfg.num_layers + 1):
            material = derive_step_material(
                cfg.secret_key, layer, context, cfg, backend=backend
            )
            subset = int(material.partition[observed])
            base = material.segment_index * nprime
            if material.mask[subset]:
                counters.hit0[base + subset] += 1
            else:
                counters.hit1[base + subset] += 1
            masked = material.mask.astype(bool)
            counters.total0[base + local[masked]] += 1
            counters.total1[base + local[~masked]] += 1
    return counters


def decode(counters: EvidenceCounters) -> DecodedMessage:
    """Compare normalized hit rates per bit; ties (including no evidence)
    decode to 0 with margin 0."""
    rate0 = counters.hit0 / np.maximum(1, counters.total0)
    rate1 = counters.hit1 / np.maximum(1, counters.total1)
    margins = rate1 - rate0
    bits = (margins > 0).astype(np.uint8)
    return DecodedMessage(
        bits=bits,
        margins=margins,
        evidence_count=counters.total0 + counters.total1,
    )


def detect(
    tokens: Sequence[int], cfg: WatermarkConfig, backend: str = "auto"
) -> DecodedMessage:
    """Full pass: accumulate evidence over the sequence, then decode."""
    return decode(accumulate(tokens, cfg, backend=backend))
