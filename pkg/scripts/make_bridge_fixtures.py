#!/usr/bin/env python3
"""Freeze golden fixtures for the frontend bridge client's parity suite.

Runs the primary in process and records, for one session config: 100
reweight steps (input probs + expected output) and a handful of detect
cases, all after a JSON round-trip so the frozen floats are exactly what
the wire carries.
"""

import json
from pathlib import Path

import numpy as np

from tokenmark import Message, TokenDistribution, WatermarkConfig, detect, generate, watermark_step
from tokenmark.lm import DirichletLM

CONFIG = {
    "secret_key": "00112233445566778899aabbccddeeff",
    "vocab_size": 64,
    "message_bits": 16,
    "segment_bits": 8,
    "num_segments": 2,
    "num_layers": 3,
    "context_window": 2,
    "sampling_seed": 5,
}
MESSAGE_HEX = "b00f"


def main():
    cfg = WatermarkConfig.from_dict(CONFIG)
    message = Message.from_hex(MESSAGE_HEX, cfg.message_bits)
    rng = np.random.Generator(np.random.PCG64(424242))

    reweight_cases = []
    for _ in range(100):
        probs = rng.dirichlet(np.full(cfg.vocab_size, rng.uniform(0.3, 2.0)))
        context = rng.integers(0, cfg.vocab_size, size=int(rng.integers(0, 6))).tolist()
        # round-trip through the wire encoding before computing expectations
        wire_probs = json.loads(json.dumps(probs.tolist()))
        out = watermark_step(TokenDistribution(np.array(wire_probs)), context, message, cfg)
        reweight_cases.append({
            "context": context,
            "probs": wire_probs,
            "expected": out.probs.tolist(),
        })

    detect_cases = []
    lm = DirichletLM(cfg.vocab_size, concentration=3.0, seed=8)
    watermarked = generate(lm, [], message, 160, cfg)
    for tokens in (watermarked.tolist(), rng.integers(0, 64, size=80).tolist(), []):
        decoded = detect(tokens, cfg)
        detect_cases.append({"tokens": tokens, **decoded.to_dict()})

    out_path = Path(__file__).resolve().parent.parent / "frontend/test/fixtures/bridge-fixtures.json"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps({
        "config": CONFIG,
        "message_hex": MESSAGE_HEX,
        "reweight_cases": reweight_cases,
        "detect_cases": detect_cases,
    }) + "\n")
    print(f"wrote {out_path}")


if __name__ == "__main__":
    main()
