"""Watermarked autoregressive generation over any distribution provider.

A provider is any callable mapping a token-id context to a
TokenDistribution. Each step pulls the base distribution, applies the
m reweighting layers (keyed off the last w generated tokens, prompt
excluded), then samples by inverse CDF with a single uniform draw.
Cumulative sums run in token-id order and the sampled index is the first
whose cumulative reaches the draw, so generation is bit-reproducible.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .keys import derive_step_material
from .reweight import reweight_layer
from .types import (
    LengthMismatch,
    Message,
    ProviderFailure,
    TokenDistribution,
    WatermarkConfig,
    validate_config,
)

Provider = Callable[[Sequence[int]], TokenDistribution]


def watermark_step(
    dist: TokenDistribution,
    context: Sequence[int],
    message: Message,
    cfg: WatermarkConfig,
    backend: str = "auto",
) -> TokenDistribution:
    """Compose all reweighting layers for one step.

    context holds the generated tokens so far (no prompt); key derivation
    windows and pads it internally.
    """
    for layer in range(1, cfg.num_layers + 1):
        material = derive_step_material(cfg.secret_key, layer, context, cfg, backend=backend)
        segment = message.segment(material.segment_index, cfg.segment_bits)
        payload = segment ^ material.mask
        dist = reweight_layer(dist, material, payload)
    return dist


def _sample_inverse_cdf(probs: np.ndarray, u: float) -> int:
    cumulative = np.cumsum(probs)
    idx = int(np.searchsorted(cumulative, u, side="left"))
    return min(idx, len(probs) - 1)


class GenerationSession:
    """One autoregressive run: owns the sampler state and the emitted tokens.

    Sampler state evolves only through token sampling; key derivation never
    touches it. Sessions are single-threaded; run several for parallelism.
    """

    def __init__(
        self,
        lm: Provider,
        message: Message,
        cfg: WatermarkConfig,
        prompt: Sequence[int] = (),
        backend: str = "auto",
    ):
        validate_config(cfg)
        if len(message) != cfg.message_bits:
            raise LengthMismatch(
                f"message has {len(message)} bits, config expects {cfg.message_bits}"
            )
        self.cfg = cfg
        self.message = message
        self.lm = lm
        self.prompt = tuple(int(t) for t in prompt)
        self.emitted: list[int] = []
        self._rng = np.random.Generator(np.random.PCG64(cfg.sampling_seed))
        self._backend = backend

    def step(self) -> int:
        lm_context = self.prompt + tuple(self.emitted)
        try:
            dist = self.lm(lm_context)
        except Exception as e:
            raise ProviderFailure(f"provider failed at step {len(self.emitted)}: {e}") from e
        if not isinstance(dist, TokenDistribution):
            dist = TokenDistribution(dist)
        dist = watermark_step(dist, self.emitted, self.message, self.cfg, backend=self._backend)
        token = _sample_inverse_cdf(dist.probs, self._rng.random())
        self.emitted.append(token)
        return token

    def run(self, num_tokens: int) -> np.ndarray:
        for _ in range(num_tokens):
            self.step()
        return np.asarray(self.emitted, dtype=np.int32)


def generate(
    lm: Provider,
    prompt: Sequence[int],
    message: Message,
    num_tokens: int,
    cfg: WatermarkConfig,
    backend: str = "auto",
) -> np.ndarray:
    """Generate num_tokens watermarked tokens; returns the emitted ids only."""
    session = GenerationSession(lm, message, cfg, prompt=prompt, backend=backend)
    return session.run(num_tokens)
