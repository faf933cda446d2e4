import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from tokenmark.cli import main

CONFIG = {
    "secret_key": "0123456789abcdef0123456789abcdef",
    "vocab_size": 128,
    "message_bits": 16,
    "segment_bits": 8,
    "num_segments": 2,
    "num_layers": 4,
    "context_window": 2,
    "sampling_seed": 99,
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(CONFIG))
    return str(path)


def run_cli(*args):
    return main(list(args))


class TestEmbedDetect:
    def test_round_trip(self, config_path, tmp_path, capsys):
        out = str(tmp_path / "tokens.txt")
        code = run_cli("embed", "--config", config_path, "--message", "beef",
                       "--tokens", "200", "--out", out)
        assert code == 0
        sidecar = json.loads(Path(out + ".meta.json").read_text())
        assert sidecar["message_hex"] == "beef"
        assert Path(out).exists()
        capsys.readouterr()

        code = run_cli("detect", "--config", config_path, "--in", out, "--expect", "beef")
        assert code == 0
        decoded = json.loads(capsys.readouterr().out.strip().splitlines()[0])
        assert decoded["bits_hex"] == "beef"
        assert len(decoded["margins"]) == 16

    def test_detect_accepts_json_array(self, config_path, tmp_path, capsys):
        path = tmp_path / "tokens.json"
        path.write_text(json.dumps(list(range(50))))
        assert run_cli("detect", "--config", config_path, "--in", str(path)) == 0
        decoded = json.loads(capsys.readouterr().out.strip())
        assert set(decoded) == {"bits_hex", "margins", "evidence_count"}

    def test_verify_mode_mismatch_exit_one(self, config_path, tmp_path, capsys):
        out = str(tmp_path / "tokens.txt")
        run_cli("embed", "--config", config_path, "--message", "beef",
                "--tokens", "150", "--out", out)
        capsys.readouterr()
        code = run_cli("detect", "--config", config_path, "--in", out, "--expect", "0000")
        assert code == 1

    def test_missing_config(self, tmp_path, capsys):
        code = run_cli("embed", "--config", str(tmp_path / "nope.json"),
                       "--message", "beef", "--tokens", "10",
                       "--out", str(tmp_path / "t.txt"))
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"]["kind"] == "ConfigNotFound"

    def test_zero_tokens_range_error(self, config_path, tmp_path, capsys):
        code = run_cli("embed", "--config", config_path, "--message", "beef",
                       "--tokens", "0", "--out", str(tmp_path / "t.txt"))
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"]["kind"] == "RangeError"

    def test_bad_message_hex(self, config_path, tmp_path, capsys):
        code = run_cli("embed", "--config", config_path, "--message", "zz",
                       "--tokens", "10", "--out", str(tmp_path / "t.txt"))
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"]["kind"] == "InvalidHexDigit"

    def test_ngram_lm_embed(self, config_path, tmp_path, capsys):
        corpus = tmp_path / "corpus.txt"
        rng = np.random.Generator(np.random.PCG64(4))
        corpus.write_text(" ".join(str(t) for t in rng.integers(0, 128, size=2000)))
        out = str(tmp_path / "tokens.txt")
        code = run_cli("embed", "--config", config_path, "--message", "beef",
                       "--tokens", "50", "--lm", f"ngram:{corpus}", "--out", out)
        assert code == 0


class TestAttackCommand:
    def test_replace_file(self, config_path, tmp_path, capsys):
        src = tmp_path / "in.txt"
        src.write_text(" ".join(str(i % 128) for i in range(100)))
        dst = str(tmp_path / "out.txt")
        code = run_cli("attack", "--in", str(src), "--out", dst, "--kind", "replace",
                       "--ratio", "0.2", "--seed", "5", "--config", config_path)
        assert code == 0
        attacked = [int(t) for t in Path(dst).read_text().split()]
        original = [int(t) for t in src.read_text().split()]
        assert sum(a != b for a, b in zip(attacked, original)) == 20

    def test_delete_needs_no_vocab(self, tmp_path, capsys):
        src = tmp_path / "in.txt"
        src.write_text(" ".join(str(i) for i in range(40)))
        dst = str(tmp_path / "out.txt")
        code = run_cli("attack", "--in", str(src), "--out", dst, "--kind", "delete",
                       "--ratio", "0.5", "--seed", "1", "--vocab", "100")
        assert code == 0
        assert len(Path(dst).read_text().split()) == 20


class TestVectors:
    def test_prints_frozen_vectors(self, capsys):
        assert run_cli("vectors") == 0
        data = json.loads(capsys.readouterr().out)
        assert data["digests"][0]["digest_hex"]


class TestBench:
    def test_small_sweep_writes_csv(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("WM_THREADS", "1")
        out = str(tmp_path / "results.csv")
        code = run_cli("bench", "--grid", "16", "--layers", "2", "--runs", "2",
                       "--tokens", "64", "--vocab", "64", "--out", out)
        assert code == 0
        lines = Path(out).read_text().strip().splitlines()
        assert len(lines) == 1 + 2  # header + (1 n)(1 m)(none attack)(2 runs)
        assert "bit_accuracy" in lines[0]

    def test_rows_reproducible_from_seeds(self, tmp_path, monkeypatch, capsys):
        from tokenmark.bench import BenchProfile, run_grid

        monkeypatch.setenv("WM_THREADS", "1")
        profile = BenchProfile(vocab_size=64, tokens=64, base_seed=5)
        first = run_grid(profile, [16], [2], [], runs=2)
        second = run_grid(profile, [16], [2], [], runs=2)

        def strip_timing(rows):
            return [{k: v for k, v in row.items() if k != "ms_per_token"} for row in rows]

        assert strip_timing(first) == strip_timing(second)


class TestSubprocessEntrypoint:
    def test_module_invocation(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps(CONFIG))
        out = tmp_path / "tokens.txt"
        result = subprocess.run(
            [sys.executable, "-m", "tokenmark.cli", "embed", "--config", str(config),
             "--message", "beef", "--tokens", "30", "--out", str(out)],
            capture_output=True, text=True, timeout=300,
        )
        assert result.returncode == 0, result.stderr
        assert out.exists()
