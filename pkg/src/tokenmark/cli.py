"""Command-line front end: embed, detect, attack, bench, vectors, serve.

Exit codes: 0 ok, 1 detection mismatch in verify mode, 2 usage/config
errors. Failures print one machine-readable JSON object to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .attacks import random_delete, random_insert, random_replace
from .bridge import serve as bridge_serve
from .detection import detect
from .generation import generate
from .lm import DirichletLM, load_text_bytes, load_token_file, ngram_train
from .types import (
    ConfigNotFound,
    Message,
    RangeError,
    WatermarkConfig,
    WatermarkError,
    validate_config,
)


def load_config(path: str) -> WatermarkConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigNotFound(f"config file {path} does not exist")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise RangeError(f"config file {path} is not valid JSON: {e}") from e
    return validate_config(WatermarkConfig.from_dict(data))


def _read_tokens(path: str) -> list[int]:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    stripped = text.strip()
    if stripped.startswith("["):
        return [int(t) for t in json.loads(stripped)]
    return [int(t) for t in stripped.split()]


def _write_tokens(tokens, path: str) -> None:
    Path(path).write_text(" ".join(str(int(t)) for t in tokens) + "\n")


def _make_lm(args, cfg: WatermarkConfig):
    spec = args.lm
    if spec == "dirichlet":
        return DirichletLM(
            cfg.vocab_size,
            concentration=args.concentration,
            seed=args.lm_seed,
            context_order=args.lm_order,
        )
    if spec.startswith("ngram:"):
        corpus = load_token_file(spec.split(":", 1)[1])
        return ngram_train(corpus, args.lm_order, args.smoothing, vocab_size=cfg.vocab_size)
    if spec.startswith("ngram-bytes:"):
        corpus = load_text_bytes(spec.split(":", 1)[1])
        return ngram_train(corpus, args.lm_order, args.smoothing, vocab_size=cfg.vocab_size)
    raise RangeError(f"unknown LM spec {spec!r}; use dirichlet, ngram:PATH or ngram-bytes:PATH")


def cmd_embed(args) -> int:
    cfg = load_config(args.config)
    if args.tokens < 1:
        raise RangeError(f"--tokens {args.tokens} must be >= 1")
    message = Message.from_hex(args.message, cfg.message_bits)
    lm = _make_lm(args, cfg)
    prompt = [int(t) for t in args.prompt.split()] if args.prompt else []
    tokens = generate(lm, prompt, message, args.tokens, cfg)
    _write_tokens(tokens, args.out)
    sidecar = {
        "config_hash": cfg.config_hash(),
        "message_hex": message.to_hex(),
        "tokens": args.tokens,
        "lm": args.lm,
        "seeds": {"sampling_seed": cfg.sampling_seed, "lm_seed": args.lm_seed},
        "created_unix": time.time(),
    }
    Path(args.out + ".meta.json").write_text(json.dumps(sidecar, indent=2) + "\n")
    print(json.dumps({"written": args.out, "config_hash": cfg.config_hash()}))
    return 0


def cmd_detect(args) -> int:
    cfg = load_config(args.config)
    tokens = _read_tokens(args.infile)
    decoded = detect(tokens, cfg)
    payload = json.dumps(decoded.to_dict())
    if args.out:
        Path(args.out).write_text(payload + "\n")
    else:
        print(payload)
    if args.expect is not None:
        expected = Message.from_hex(args.expect, cfg.message_bits)
        accuracy = decoded.accuracy_against(expected)
        print(json.dumps({"expected_hex": expected.to_hex(), "bit_accuracy": accuracy}),
              file=sys.stderr)
        if accuracy < 1.0:
            return 1
    return 0


def cmd_attack(args) -> int:
    if args.vocab is None and args.config is None:
        raise RangeError("attack needs --vocab or --config for the vocabulary size")
    vocab = args.vocab if args.vocab is not None else load_config(args.config).vocab_size
    tokens = _read_tokens(args.infile)
    if args.kind == "replace":
        out = random_replace(tokens, args.ratio, args.seed, vocab)
    elif args.kind == "delete":
        out = random_delete(tokens, args.ratio, args.seed)
    elif args.kind == "insert":
        out = random_insert(tokens, args.ratio, args.seed, vocab)
    else:
        raise RangeError(f"unknown attack kind {args.kind!r}")
    _write_tokens(out, args.out)
    print(json.dumps({"written": args.out, "kind": args.kind, "ratio": args.ratio,
                      "length": int(len(out))}))
    return 0


def _parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _parse_attacks(text: str) -> list[tuple[str, float]]:
    if not text or text == "none":
        return [("none", 0.0)]
    kind, _, ratios = text.partition(":")
    if not ratios:
        raise RangeError(f"attack spec {text!r} must look like replace:0.1,0.3")
    return [("none", 0.0)] + [(kind, float(r)) for r in ratios.split(",")]


def cmd_bench(args) -> int:
    profile = bench_mod.BenchProfile(
        vocab_size=args.vocab,
        segment_bits=args.segment_bits,
        context_window=args.window,
        tokens=args.tokens,
        concentration=args.concentration,
        lm_order=args.lm_order,
        base_seed=args.seed,
    )
    rows = bench_mod.run_grid(
        profile,
        message_lengths=_parse_int_list(args.grid),
        layer_counts=_parse_int_list(args.layers),
        attacks=_parse_attacks(args.attack),
        runs=args.runs,
    )
    bench_mod.write_rows(rows, args.out)
    sidecar = {"profile": profile.__dict__, "grid": args.grid, "layers": args.layers,
               "attack": args.attack, "runs": args.runs}
    Path(args.out + ".meta.json").write_text(json.dumps(sidecar, indent=2) + "\n")
    agg = bench_mod.aggregate(rows)
    print(bench_mod.format_aggregate(agg))
    failed = [r for r in rows if "error" in r and r["error"]]
    if failed:
        print(json.dumps({"failed_rows": len(failed)}), file=sys.stderr)
    return 0


def cmd_vectors(args) -> int:
    text = resources.files("tokenmark").joinpath("data/test-vectors.json").read_text()
    print(text.rstrip())
    return 0


def cmd_serve(args) -> int:
    return bridge_serve()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tokenmark",
        description="Embed and extract multi-bit messages in token sequences.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="generate watermarked tokens")
    p.add_argument("--config", required=True)
    p.add_argument("--message", required=True, help="payload as hex")
    p.add_argument("--tokens", type=int, required=True)
    p.add_argument("--lm", default="dirichlet", help="dirichlet or ngram:PATH")
    p.add_argument("--out", required=True)
    p.add_argument("--prompt", default="", help="space-separated prompt token ids")
    p.add_argument("--concentration", type=float, default=5.0)
    p.add_argument("--lm-seed", type=int, default=1)
    p.add_argument("--lm-order", type=int, default=2)
    p.add_argument("--smoothing", type=float, default=0.5)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("detect", help="recover the message from a token file")
    p.add_argument("--config", required=True)
    p.add_argument("--in", dest="infile", required=True, help="token file or - for stdin")
    p.add_argument("--out", default="")
    p.add_argument("--expect", default=None, help="verify against this hex message")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("attack", help="perturb a token file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=["replace", "delete", "insert"], required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="accuracy/robustness sweep, CSV output")
    p.add_argument("--grid", default="16,64", help="message lengths, comma-separated")
    p.add_argument("--layers", default="10", help="layer counts, comma-separated")
    p.add_argument("--attack", default="none", help="e.g. replace:0.1,0.3")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--tokens", type=int, default=512)
    p.add_argument("--vocab", type=int, default=256)
    p.add_argument("--segment-bits", type=int, default=8)
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--concentration", type=float, default=5.0)
    p.add_argument("--lm-order", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="bench_results.csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("vectors", help="print the frozen known-answer vectors")
    p.set_defaults(func=cmd_vectors)

    p = sub.add_parser("serve", help="line-delimited JSON bridge on stdin/stdout")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except WatermarkError as e:
        print(json.dumps({"error": {"kind": e.kind, "detail": str(e)}}), file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(json.dumps({"error": {"kind": "ConfigNotFound", "detail": str(e)}}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
