#!/usr/bin/env python3
"""Regenerate data/test-vectors.json straight from the documented byte layout.

Deliberately self-contained: everything below is written from the layout
documentation alone, importing nothing from the package, so the frozen
vectors are an independent check on both backends.

Layout:
  digest  = SHA-256(secret || 0x01 || LE64(layer) || LE64(w) || pad || ids)
            pad = (w - available) * FFFFFFFF, ids = last min(w, len) LE32 each
  block_i = SHA-256(digest || LE64(i)); words = successive LE 8-byte chunks
  draw(M) = first word v with v < floor(2^64/M)*M, value v mod M
  material: draw(g); n' mask draws(2); Fisher-Yates i=N-1..1 with draw(i+1);
            slices: first (N mod n') of size ceil(N/n'), rest floor.
"""

import hashlib
import json
import struct
import sys
from pathlib import Path


def digest_of(secret_hex, layer, context, w):
    secret = bytes.fromhex(secret_hex)
    ids = context[-w:] if w > 0 else []
    blob = secret + b"\x01" + struct.pack("<QQ", layer, w)
    blob += b"\xff\xff\xff\xff" * (w - len(ids))
    for t in ids:
        blob += struct.pack("<I", t)
    return hashlib.sha256(blob).digest()


class Words:
    def __init__(self, digest):
        self.digest = digest
        self.i = 0
        self.buf = b""

    def word(self):
        if not self.buf:
            self.buf = hashlib.sha256(self.digest + struct.pack("<Q", self.i)).digest()
            self.i += 1
        v = int.from_bytes(self.buf[:8], "little")
        self.buf = self.buf[8:]
        return v

    def draw(self, bound):
        limit = ((1 << 64) // bound) * bound
        while True:
            v = self.word()
            if v < limit:
                return v % bound


def material_of(digest, g, nprime, vocab):
    ws = Words(digest)
    ind = ws.draw(g)
    mask = [ws.draw(2) for _ in range(nprime)]
    order = list(range(vocab))
    for i in range(vocab - 1, 0, -1):
        j = ws.draw(i + 1)
        order[i], order[j] = order[j], order[i]
    partition = [0] * vocab
    base, extra = divmod(vocab, nprime)
    pos = 0
    for s in range(nprime):
        size = base + 1 if s < extra else base
        for k in range(pos, pos + size):
            partition[order[k]] = s
        pos += size
    return {"segment_index": ind, "mask": mask, "partition": partition}


SECRET_A = "0123456789abcdef0123456789abcdef"
SECRET_B = "00" * 16

DIGEST_CASES = [
    {"name": "basic", "secret_hex": SECRET_A, "layer": 1, "context": [5, 7], "w": 2},
    {"name": "layer2", "secret_hex": SECRET_A, "layer": 2, "context": [5, 7], "w": 2},
    {"name": "fully_padded", "secret_hex": SECRET_A, "layer": 1, "context": [], "w": 2},
    {"name": "partially_padded", "secret_hex": SECRET_A, "layer": 1, "context": [9], "w": 2},
    {"name": "window_truncation", "secret_hex": SECRET_A, "layer": 1, "context": [1, 2, 5, 7], "w": 2},
    {"name": "zero_window", "secret_hex": SECRET_A, "layer": 3, "context": [5], "w": 0},
    {"name": "zero_secret", "secret_hex": SECRET_B, "layer": 1, "context": [5, 7], "w": 2},
]


def main():
    out = {"comment": "Known-answer vectors for the keyed derivation layer. "
                      "Regenerate with scripts/make_test_vectors.py.",
           "digests": [], "keystream": {}, "draws": {}, "materials": []}

    for case in DIGEST_CASES:
        d = digest_of(case["secret_hex"], case["layer"], case["context"], case["w"])
        entry = dict(case)
        entry["digest_hex"] = d.hex()
        out["digests"].append(entry)

    basic = digest_of(SECRET_A, 1, [5, 7], 2)
    ws = Words(basic)
    out["keystream"] = {
        "digest_hex": basic.hex(),
        "first_words_hex": [format(ws.word(), "016x") for _ in range(16)],
    }

    ws = Words(basic)
    bounds = [6, 2, 2, 256, 1000, 1, 3, 70000]
    out["draws"] = {
        "digest_hex": basic.hex(),
        "bounds": bounds,
        "values": [ws.draw(b) for b in bounds],
    }

    for g, nprime, vocab in [(4, 4, 10), (2, 2, 4), (8, 8, 37)]:
        m = material_of(basic, g, nprime, vocab)
        m.update({"digest_hex": basic.hex(), "num_segments": g,
                  "segment_bits": nprime, "vocab_size": vocab})
        out["materials"].append(m)

    target = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parent.parent / "src/tokenmark/data/test-vectors.json"
    )
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(out, indent=1) + "\n")
    print(f"wrote {target}")


if __name__ == "__main__":
    main()
