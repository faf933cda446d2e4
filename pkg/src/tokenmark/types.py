"""Shared domain types: configuration, messages, distributions, decode results.

All types are immutable value objects after construction and safe to share
across threads.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields

import numpy as np

SUM_TOLERANCE = 1e-9
INGEST_TOLERANCE = 1e-6
MIN_KEY_BYTES = 16


class WatermarkError(Exception):
    """Base class for all toolkit errors."""

    @property
    def kind(self) -> str:
        return type(self).__name__


class DivisibilityError(WatermarkError):
    """message_bits is not a multiple of segment_bits."""


class RangeError(WatermarkError):
    """A numeric parameter is outside its documented range."""


class KeyTooShort(WatermarkError):
    """Secret key shorter than the 16-byte minimum."""


class LengthMismatch(WatermarkError):
    """Vector arguments disagree on length."""


class InvalidHexDigit(WatermarkError):
    """Message hex string failed to decode."""


class DegenerateWeight(WatermarkError):
    """Scale computation requested for an all-zero payload."""


class TokenOutOfRange(WatermarkError):
    """A token id lies outside [0, vocab_size)."""


class EmptyCorpus(WatermarkError):
    """Corpus ingestion received no tokens."""


class ProviderFailure(WatermarkError):
    """The next-token distribution provider raised; carries the step index."""


class InvalidDistribution(WatermarkError):
    """Probability vector rejected (negative entries or sum too far from 1)."""


class ConfigNotFound(WatermarkError):
    """Config file path does not exist."""


@dataclass(frozen=True)
class WatermarkConfig:
    """All scheme parameters.

    secret_key drives every piece of per-step randomness except token
    sampling; sampling_seed drives token sampling only.
    """

    secret_key: bytes
    vocab_size: int
    message_bits: int
    segment_bits: int
    num_segments: int
    num_layers: int = 10
    context_window: int = 2
    sampling_seed: int = 0

    @classmethod
    def create(
        cls,
        secret_key: bytes,
        vocab_size: int,
        message_bits: int,
        segment_bits: int = 8,
        num_layers: int = 10,
        context_window: int = 2,
        sampling_seed: int = 0,
    ) -> "WatermarkConfig":
        """Build a validated config, deriving num_segments from the bit counts."""
        if segment_bits <= 0 or message_bits % segment_bits != 0:
            raise DivisibilityError(
                f"message_bits={message_bits} not divisible by segment_bits={segment_bits}"
            )
        cfg = cls(
            secret_key=secret_key,
            vocab_size=vocab_size,
            message_bits=message_bits,
            segment_bits=segment_bits,
            num_segments=message_bits // segment_bits,
            num_layers=num_layers,
            context_window=context_window,
            sampling_seed=sampling_seed,
        )
        return validate_config(cfg)

    @classmethod
    def from_dict(cls, d: dict) -> "WatermarkConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise RangeError(f"unknown config fields: {sorted(unknown)}")
        missing = names - set(d)
        if missing:
            raise RangeError(f"missing config fields: {sorted(missing)}")
        try:
            secret = bytes.fromhex(d["secret_key"])
        except (ValueError, TypeError) as e:
            raise InvalidHexDigit(f"secret_key is not valid hex: {e}") from e
        kwargs = {k: int(v) for k, v in d.items() if k != "secret_key"}
        return cls(secret_key=secret, **kwargs)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["secret_key"] = self.secret_key.hex()
        return d

    def config_hash(self) -> str:
        """Stable hash of the full parameter set, for run provenance."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def validate_config(cfg: WatermarkConfig) -> WatermarkConfig:
    """Return cfg unchanged iff every invariant holds; raise otherwise.

    Idempotent and side-effect free.
    """
    if len(cfg.secret_key) < MIN_KEY_BYTES:
        raise KeyTooShort(f"secret key has {len(cfg.secret_key)} bytes, need >= {MIN_KEY_BYTES}")
    if cfg.vocab_size < 2:
        raise RangeError(f"vocab_size={cfg.vocab_size} must be >= 2")
    if cfg.message_bits < 1:
        raise RangeError(f"message_bits={cfg.message_bits} must be >= 1")
    if cfg.segment_bits < 1:
        raise RangeError(f"segment_bits={cfg.segment_bits} must be >= 1")
    if cfg.message_bits % cfg.segment_bits != 0:
        raise DivisibilityError(
            f"message_bits={cfg.message_bits} not divisible by segment_bits={cfg.segment_bits}"
        )
    if cfg.num_segments != cfg.message_bits // cfg.segment_bits:
        raise DivisibilityError(
            f"num_segments={cfg.num_segments} != message_bits/segment_bits="
            f"{cfg.message_bits // cfg.segment_bits}"
        )
    if cfg.segment_bits > cfg.vocab_size:
        raise RangeError(
            f"segment_bits={cfg.segment_bits} exceeds vocab_size={cfg.vocab_size}"
        )
    if cfg.num_layers < 1:
        raise RangeError(f"num_layers={cfg.num_layers} must be >= 1")
    if cfg.context_window < 0:
        raise RangeError(f"context_window={cfg.context_window} must be >= 0")
    return cfg


def _frozen_bits(values) -> np.ndarray:
    bits = np.asarray(values, dtype=np.uint8)
    if bits.ndim != 1 or not np.isin(bits, (0, 1)).all():
        raise RangeError("bits must be a flat vector of 0/1")
    bits.flags.writeable = False
    return bits


@dataclass(frozen=True, eq=False)
class Message:
    """An n-bit payload, big-endian with respect to its hex form."""

    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", _frozen_bits(self.bits))

    def __len__(self) -> int:
        return len(self.bits)

    def __eq__(self, other) -> bool:
        return isinstance(other, Message) and np.array_equal(self.bits, other.bits)

    def segment(self, index: int, segment_bits: int) -> np.ndarray:
        return self.bits[index * segment_bits : (index + 1) * segment_bits]

    @classmethod
    def from_hex(cls, hex_string: str, n: int) -> "Message":
        """Decode ceil(n/8) bytes of hex and keep the first n bits (big-endian
        bit order within each byte)."""
        if n < 1:
            raise RangeError(f"message length {n} must be >= 1")
        try:
            raw = bytes.fromhex(hex_string)
        except ValueError as e:
            raise InvalidHexDigit(f"bad message hex {hex_string!r}: {e}") from e
        expected = (n + 7) // 8
        if len(raw) != expected:
            raise LengthMismatch(
                f"hex decodes to {len(raw)} bytes, expected {expected} for n={n}"
            )
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:n]
        return cls(bits)

    def to_hex(self) -> str:
        return np.packbits(self.bits).tobytes().hex()

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Message":
        return cls(rng.integers(0, 2, size=n, dtype=np.uint8))


@dataclass(frozen=True, eq=False)
class TokenDistribution:
    """A probability vector over the vocabulary at one generation step.

    Renormalized on construction when the sum is within 1e-6 of 1, rejected
    otherwise; entries must be non-negative.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise InvalidDistribution("probs must be a non-empty flat vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidDistribution("probs must be finite and non-negative")
        total = float(p.sum())
        if abs(total - 1.0) > INGEST_TOLERANCE:
            raise InvalidDistribution(f"probs sum to {total}, outside 1 +/- {INGEST_TOLERANCE}")
        if total != 1.0:
            p = p / total
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return len(self.probs)


@dataclass(frozen=True, eq=False)
class DecodedMessage:
    """Recovered bits plus per-bit hit-rate margins and evidence volume.

    bits[i] = 1 exactly when margins[i] > 0; ties decode to 0.
    """

    bits: np.ndarray
    margins: np.ndarray
    evidence_count: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", _frozen_bits(self.bits))
        margins = np.asarray(self.margins, dtype=np.float64)
        counts = np.asarray(self.evidence_count, dtype=np.int64)
        if len(margins) != len(self.bits) or len(counts) != len(self.bits):
            raise LengthMismatch("bits, margins, evidence_count must share length")
        margins.flags.writeable = False
        counts.flags.writeable = False
        object.__setattr__(self, "margins", margins)
        object.__setattr__(self, "evidence_count", counts)

    @property
    def bits_hex(self) -> str:
        return np.packbits(self.bits).tobytes().hex()

    def accuracy_against(self, message: Message) -> float:
        if len(message.bits) != len(self.bits):
            raise LengthMismatch("message length differs from decoded length")
        return float(np.mean(self.bits == message.bits))

    def to_dict(self) -> dict:
        return {
            "bits_hex": self.bits_hex,
            "margins": self.margins.tolist(),
            "evidence_count": self.evidence_count.tolist(),
        }
