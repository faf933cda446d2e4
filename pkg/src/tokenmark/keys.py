"""Deterministic per-(step, layer) randomness: segment index, mask, partition.

Wire-format contract (normative, frozen by data/test-vectors.json):

  digest = SHA-256( secret || 0x01 || LE64(layer) || LE64(w) || pad || ids )

where ids are the last min(w, available) context token ids, each LE32, and
pad is (w - available) copies of the 4-byte sentinel FF FF FF FF prepended
before the ids when fewer than w generated tokens precede the step. The
prompt never enters key derivation, so the detector can reproduce every
digest from the bare generated sequence.

The keystream reads successive 8-byte little-endian words from

  block_i = SHA-256( digest || LE64(i) ),   i = 0, 1, 2, ...

Bounded draws use rejection sampling: a word v is rejected when
v >= floor(2^64 / M) * M, otherwise the draw is v mod M (unbiased).

Material is drawn in this order: (1) segment index, bound g; (2) the n' mask
bits, bound 2 each; (3) a Fisher-Yates shuffle of [0..N-1], iterating
position i from N-1 down to 1 and swapping with index drawn at bound i+1.
The shuffled array is cut into n' contiguous slices, the first (N mod n')
of size ceil(N/n') and the rest floor(N/n'); tokens in slice s get subset
index s.

Two interchangeable backends produce bit-identical material: a pure
hashlib reference (this module) and a compiled fast path (_fastkeys).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .types import RangeError, WatermarkConfig

SENTINEL = b"\xff\xff\xff\xff"
DOMAIN_TAG = b"\x01"
_WORD_LIMIT = 1 << 64


def derive_digest(secret: bytes, layer: int, context: Sequence[int], w: int) -> bytes:
    """32-byte digest binding the secret, layer and recent token context."""
    if layer < 1:
        raise RangeError(f"layer={layer} must be >= 1")
    if w < 0:
        raise RangeError(f"context window {w} must be >= 0")
    ids = [int(t) for t in context[-w:]] if w > 0 else []
    h = hashlib.sha256()
    h.update(secret)
    h.update(DOMAIN_TAG)
    h.update(struct.pack("<QQ", layer, w))
    h.update(SENTINEL * (w - len(ids)))
    for t in ids:
        h.update(struct.pack("<I", t))
    return h.digest()


class KeyStream:
    """Reference cursor over the counter-mode word stream of one digest."""

    def __init__(self, digest: bytes):
        if len(digest) != 32:
            raise RangeError("digest must be 32 bytes")
        self._digest = digest
        self._counter = 0
        self._block = b""
        self._offset = 0
        self.words_read = 0

    def _next_word(self) -> int:
        if self._offset >= len(self._block):
            self._block = hashlib.sha256(
                self._digest + struct.pack("<Q", self._counter)
            ).digest()
            self._counter += 1
            self._offset = 0
        word = int.from_bytes(self._block[self._offset : self._offset + 8], "little")
        self._offset += 8
        self.words_read += 1
        return word

    def next_uint(self, bound: int) -> int:
        """Unbiased draw in [0, bound) via rejection sampling."""
        if bound < 1:
            raise RangeError(f"bound={bound} must be >= 1")
        limit = (_WORD_LIMIT // bound) * bound
        while True:
            v = self._next_word()
            if v < limit:
                return v % bound


@dataclass(frozen=True, eq=False)
class StepKeyMaterial:
    """Everything one (step, layer) needs: pure function of (secret, layer, context)."""

    layer: int
    segment_index: int
    mask: np.ndarray       # uint8, length n'
    partition: np.ndarray  # int32, length N, values in [0, n')

    def __post_init__(self):
        self.mask.flags.writeable = False
        self.partition.flags.writeable = False


def slice_sizes(vocab_size: int, nprime: int) -> list[int]:
    """Subset sizes: the first (N mod n') get the ceiling, the rest the floor."""
    base, extra = divmod(vocab_size, nprime)
    return [base + 1 if s < extra else base for s in range(nprime)]


def _material_reference(digest: bytes, g: int, nprime: int, vocab_size: int):
    stream = KeyStream(digest)
    ind = stream.next_uint(g)
    mask = np.array([stream.next_uint(2) for _ in range(nprime)], dtype=np.uint8)
    order = list(range(vocab_size))
    for i in range(vocab_size - 1, 0, -1):
        j = stream.next_uint(i + 1)
        order[i], order[j] = order[j], order[i]
    partition = np.empty(vocab_size, dtype=np.int32)
    pos = 0
    for s, size in enumerate(slice_sizes(vocab_size, nprime)):
        partition[np.asarray(order[pos : pos + size], dtype=np.int64)] = s
        pos += size
    return ind, mask, partition


def derive_step_material(
    secret: bytes,
    layer: int,
    context: Sequence[int],
    cfg: WatermarkConfig,
    backend: str = "auto",
) -> StepKeyMaterial:
    """Derive the full per-(step, layer) material.

    Regenerating with identical inputs yields identical material, on either
    backend; generator and detector both call this.
    """
    digest = derive_digest(secret, layer, context, cfg.context_window)
    if backend == "auto":
        from . import _fastkeys

        backend = "fast" if _fastkeys.AVAILABLE else "reference"
    if backend == "fast":
        from . import _fastkeys

        ind, mask, partition = _fastkeys.material_fast(
            digest, cfg.num_segments, cfg.segment_bits, cfg.vocab_size
        )
    elif backend == "reference":
        ind, mask, partition = _material_reference(
            digest, cfg.num_segments, cfg.segment_bits, cfg.vocab_size
        )
    else:
        raise RangeError(f"unknown backend {backend!r}")
    return StepKeyMaterial(layer=layer, segment_index=ind, mask=mask, partition=partition)
