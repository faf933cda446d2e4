"""Experiment harness: seeded embed/attack/detect runs over a parameter grid.

Every row is reproducible from its recorded seeds plus the config hash.
Runs for the same (message length, run index) share secret, message and
sampling seed across layer counts and attack ratios, so comparisons along
those axes are paired.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attacks import random_delete, random_insert, random_replace
from .detection import detect
from .generation import generate
from .lm import DirichletLM
from .types import Message, RangeError, WatermarkConfig

ROW_FIELDS = [
    "n", "m", "attack", "ratio", "run", "sampling_seed", "attack_seed",
    "config_hash", "message_hex", "tokens", "bit_accuracy",
    "margin_mean", "margin_min", "ms_per_token",
]


@dataclass(frozen=True)
class BenchProfile:
    """Fixed environment for one sweep; the grid varies n, m and attacks."""

    vocab_size: int = 256
    segment_bits: int = 8
    context_window: int = 2
    tokens: int = 512
    concentration: float = 5.0
    lm_order: int = 2
    base_seed: int = 0

    def lm(self) -> DirichletLM:
        return DirichletLM(
            self.vocab_size,
            concentration=self.concentration,
            seed=self.base_seed + 1,
            context_order=self.lm_order,
        )


def _run_secret(base_seed: int, n: int, run: int) -> bytes:
    return hashlib.sha256(struct.pack("<qqq", base_seed, n, run)).digest()[:16]


def _run_message(base_seed: int, n: int, run: int) -> Message:
    seed = int.from_bytes(
        hashlib.sha256(struct.pack("<qqqB", base_seed, n, run, 1)).digest()[:8], "little"
    )
    return Message.random(n, np.random.Generator(np.random.PCG64(seed)))


def run_config(profile: BenchProfile, n: int, m: int, run: int) -> WatermarkConfig:
    return WatermarkConfig.create(
        secret_key=_run_secret(profile.base_seed, n, run),
        vocab_size=profile.vocab_size,
        message_bits=n,
        segment_bits=profile.segment_bits,
        num_layers=m,
        context_window=profile.context_window,
        sampling_seed=profile.base_seed * 1_000_003 + run,
    )


def _apply_attack(tokens, kind: str, ratio: float, seed: int, vocab_size: int):
    if kind == "none" or ratio == 0.0:
        return np.asarray(tokens)
    if kind == "replace":
        return random_replace(tokens, ratio, seed, vocab_size)
    if kind == "delete":
        return random_delete(tokens, ratio, seed)
    if kind == "insert":
        return random_insert(tokens, ratio, seed, vocab_size)
    raise RangeError(f"unknown attack kind {kind!r}")


def run_cell(profile: BenchProfile, n: int, m: int, run: int,
             attacks: list[tuple[str, float]]) -> list[dict]:
    """One generation, detected once per attack setting."""
    cfg = run_config(profile, n, m, run)
    message = _run_message(profile.base_seed, n, run)
    t0 = time.perf_counter()
    tokens = generate(profile.lm(), [], message, profile.tokens, cfg)
    gen_ms = (time.perf_counter() - t0) * 1000.0 / profile.tokens
    rows = []
    for kind, ratio in attacks:
        attack_seed = profile.base_seed + 7919 * run + int(ratio * 1000)
        attacked = _apply_attack(tokens, kind, ratio, attack_seed, profile.vocab_size)
        decoded = detect(attacked, cfg)
        rows.append({
            "n": n, "m": m, "attack": kind, "ratio": ratio, "run": run,
            "sampling_seed": cfg.sampling_seed, "attack_seed": attack_seed,
            "config_hash": cfg.config_hash(), "message_hex": message.to_hex(),
            "tokens": profile.tokens,
            "bit_accuracy": decoded.accuracy_against(message),
            "margin_mean": float(np.mean(decoded.margins)),
            "margin_min": float(np.min(np.abs(decoded.margins))),
            "ms_per_token": gen_ms,
        })
    return rows


def _cell_worker(args):
    profile, n, m, run, attacks = args
    return run_cell(profile, n, m, run, attacks)


def worker_count() -> int:
    env = os.environ.get("WM_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return os.cpu_count() or 1


def run_grid(
    profile: BenchProfile,
    message_lengths: list[int],
    layer_counts: list[int],
    attacks: list[tuple[str, float]],
    runs: int,
) -> list[dict]:
    """Full sweep; failed cells are flagged rather than aborting the sweep."""
    if not attacks:
        attacks = [("none", 0.0)]
    cells = [
        (profile, n, m, run, attacks)
        for n in message_lengths
        for m in layer_counts
        for run in range(runs)
    ]
    rows: list[dict] = []
    workers = worker_count()
    if workers <= 1 or len(cells) <= 1:
        results = map(_safe_cell, cells)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_safe_cell, cells)
    for cell_rows in results:
        rows.extend(cell_rows)
    rows.sort(key=lambda r: (r["n"], r["m"], r["attack"], r["ratio"], r["run"]))
    return rows


def _safe_cell(args):
    try:
        return _cell_worker(args)
    except Exception as e:  # flag the cell, keep sweeping
        profile, n, m, run, attacks = args
        return [{
            "n": n, "m": m, "attack": kind, "ratio": ratio, "run": run,
            "sampling_seed": -1, "attack_seed": -1, "config_hash": "",
            "message_hex": "", "tokens": profile.tokens,
            "bit_accuracy": float("nan"), "margin_mean": float("nan"),
            "margin_min": float("nan"), "ms_per_token": float("nan"),
            "error": f"{type(e).__name__}: {e}",
        } for kind, ratio in attacks]


def write_rows(rows: list[dict], path: str | Path) -> None:
    fields = ROW_FIELDS + (["error"] if any("error" in r for r in rows) else [])
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, restval="")
        writer.writeheader()
        writer.writerows(rows)


def aggregate(rows: list[dict]) -> list[dict]:
    """Mean and standard error of bit accuracy per grid cell."""
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        acc = row["bit_accuracy"]
        if isinstance(acc, float) and math.isnan(acc):
            continue
        groups.setdefault((row["n"], row["m"], row["attack"], row["ratio"]), []).append(acc)
    out = []
    for (n, m, attack, ratio), accs in sorted(groups.items()):
        mean = float(np.mean(accs))
        stderr = float(np.std(accs, ddof=1) / math.sqrt(len(accs))) if len(accs) > 1 else 0.0
        out.append({
            "n": n, "m": m, "attack": attack, "ratio": ratio,
            "runs": len(accs), "accuracy_mean": mean, "accuracy_stderr": stderr,
        })
    return out


def format_aggregate(agg: list[dict]) -> str:
    lines = [f"{'n':>5} {'m':>4} {'attack':>8} {'ratio':>6} {'runs':>5} {'accuracy':>18}"]
    for row in agg:
        lines.append(
            f"{row['n']:>5} {row['m']:>4} {row['attack']:>8} {row['ratio']:>6.2f} "
            f"{row['runs']:>5} {row['accuracy_mean']:>10.4f} +/- {row['accuracy_stderr']:.4f}"
        )
    return "\n".join(lines)
