"""Multi-bit watermark embedding and extraction for token sequences.

The scheme reweights next-token distributions through keyed vocabulary
partitions so that an n-bit message can be recovered from the bare token
sequence, while the expected distribution over the key space stays exactly
equal to the unwatermarked one.
"""

from .types import (
    ConfigNotFound,
    DecodedMessage,
    DegenerateWeight,
    DivisibilityError,
    EmptyCorpus,
    InvalidDistribution,
    InvalidHexDigit,
    KeyTooShort,
    LengthMismatch,
    Message,
    ProviderFailure,
    RangeError,
    TokenDistribution,
    TokenOutOfRange,
    WatermarkConfig,
    WatermarkError,
    validate_config,
)
from .keys import KeyStream, StepKeyMaterial, derive_digest, derive_step_material
from .reweight import (
    apply_scales,
    green_mass,
    overflow_masses,
    reweight_all_channels,
    reweight_function,
    reweight_layer,
    scales,
)
from .generation import GenerationSession, generate, watermark_step
from .detection import EvidenceCounters, accumulate, decode, detect
from .lm import DirichletLM, NGramLM, load_token_file, ngram_train
from .attacks import random_delete, random_insert, random_replace

__version__ = "0.1.0"

__all__ = [
    "ConfigNotFound",
    "DecodedMessage",
    "DegenerateWeight",
    "DirichletLM",
    "DivisibilityError",
    "EmptyCorpus",
    "EvidenceCounters",
    "GenerationSession",
    "InvalidDistribution",
    "InvalidHexDigit",
    "KeyStream",
    "KeyTooShort",
    "LengthMismatch",
    "Message",
    "NGramLM",
    "ProviderFailure",
    "RangeError",
    "StepKeyMaterial",
    "TokenDistribution",
    "TokenOutOfRange",
    "WatermarkConfig",
    "WatermarkError",
    "accumulate",
    "apply_scales",
    "decode",
    "derive_digest",
    "derive_step_material",
    "detect",
    "generate",
    "green_mass",
    "load_token_file",
    "ngram_train",
    "overflow_masses",
    "random_delete",
    "random_insert",
    "random_replace",
    "reweight_all_channels",
    "reweight_function",
    "reweight_layer",
    "scales",
    "validate_config",
    "watermark_step",
]
