"""Compiled keystream and shuffle kernels.

SHA-256 per-call overhead in hashlib (~0.5us) makes the normative key
derivation the bottleneck at production vocabulary sizes: one layer at
N=32000 consumes ~8000 counter blocks, so a 10-layer step would spend
>40ms inside hashlib. These kernels compute the identical byte stream
inside numba; the SHA-256 compression runs over lanes of independent
counters (structure-of-arrays) so LLVM vectorizes it.

Bit-exact equivalence with keys.KeyStream is enforced by tests; either
side can be swapped in via the backend argument of derive_step_material.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a hard dep, but degrade cleanly
    AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


_K = np.array([
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
], dtype=np.uint32)

_LANES = 16


@njit(cache=True)
def _bswap32(x):
    return (((x & np.uint64(0xFF)) << np.uint64(24)) | ((x & np.uint64(0xFF00)) << np.uint64(8))
            | ((x >> np.uint64(8)) & np.uint64(0xFF00)) | ((x >> np.uint64(24)) & np.uint64(0xFF)))


@njit(cache=True)
def _sha256_ctr_words(digest_words, n_blocks, out_words):
    """Little-endian 8-byte words of SHA-256(digest || LE64(i)), i in [0, n_blocks).

    digest_words: the digest as 8 big-endian uint32 words (SHA state order).
    out_words: uint64 output, 4 words per block. Each 40-byte message fits a
    single padded compression block: digest, counter, 0x80, zeros, bitlen 320.
    """
    u32 = np.uint32
    W = np.empty((16, _LANES), dtype=np.uint32)
    va = np.empty(_LANES, np.uint32); vb = np.empty(_LANES, np.uint32)
    vc = np.empty(_LANES, np.uint32); vd = np.empty(_LANES, np.uint32)
    ve = np.empty(_LANES, np.uint32); vf = np.empty(_LANES, np.uint32)
    vg = np.empty(_LANES, np.uint32); vh = np.empty(_LANES, np.uint32)
    n_chunks = (n_blocks + _LANES - 1) // _LANES
    for chunk in range(n_chunks):
        base = chunk * _LANES
        for lane in range(_LANES):
            ctr = np.uint64(base + lane)
            for t in range(8):
                W[t, lane] = digest_words[t]
            b0 = u32(ctr & np.uint64(0xFF)); b1 = u32((ctr >> np.uint64(8)) & np.uint64(0xFF))
            b2 = u32((ctr >> np.uint64(16)) & np.uint64(0xFF)); b3 = u32((ctr >> np.uint64(24)) & np.uint64(0xFF))
            b4 = u32((ctr >> np.uint64(32)) & np.uint64(0xFF)); b5 = u32((ctr >> np.uint64(40)) & np.uint64(0xFF))
            b6 = u32((ctr >> np.uint64(48)) & np.uint64(0xFF)); b7 = u32((ctr >> np.uint64(56)) & np.uint64(0xFF))
            W[8, lane] = (b0 << u32(24)) | (b1 << u32(16)) | (b2 << u32(8)) | b3
            W[9, lane] = (b4 << u32(24)) | (b5 << u32(16)) | (b6 << u32(8)) | b7
            W[10, lane] = u32(0x80000000)
            W[11, lane] = u32(0); W[12, lane] = u32(0); W[13, lane] = u32(0); W[14, lane] = u32(0)
            W[15, lane] = u32(320)
            va[lane] = u32(0x6a09e667); vb[lane] = u32(0xbb67ae85); vc[lane] = u32(0x3c6ef372)
            vd[lane] = u32(0xa54ff53a); ve[lane] = u32(0x510e527f); vf[lane] = u32(0x9b05688c)
            vg[lane] = u32(0x1f83d9ab); vh[lane] = u32(0x5be0cd19)
        for t in range(64):
            ti = t & 15
            if t >= 16:
                for lane in range(_LANES):
                    w15 = W[(t - 15) & 15, lane]
                    w2 = W[(t - 2) & 15, lane]
                    s0 = ((w15 >> u32(7)) | (w15 << u32(25))) ^ ((w15 >> u32(18)) | (w15 << u32(14))) ^ (w15 >> u32(3))
                    s1 = ((w2 >> u32(17)) | (w2 << u32(15))) ^ ((w2 >> u32(19)) | (w2 << u32(13))) ^ (w2 >> u32(10))
                    W[ti, lane] = W[ti, lane] + s0 + W[(t - 7) & 15, lane] + s1
            kt = _K[t]
            for lane in range(_LANES):
                e = ve[lane]
                S1 = ((e >> u32(6)) | (e << u32(26))) ^ ((e >> u32(11)) | (e << u32(21))) ^ ((e >> u32(25)) | (e << u32(7)))
                ch = (e & vf[lane]) ^ ((~e) & vg[lane])
                t1 = vh[lane] + S1 + ch + kt + W[ti, lane]
                a = va[lane]
                S0 = ((a >> u32(2)) | (a << u32(30))) ^ ((a >> u32(13)) | (a << u32(19))) ^ ((a >> u32(22)) | (a << u32(10)))
                maj = (a & vb[lane]) ^ (a & vc[lane]) ^ (vb[lane] & vc[lane])
                t2 = S0 + maj
                vh[lane] = vg[lane]; vg[lane] = vf[lane]; vf[lane] = ve[lane]; ve[lane] = vd[lane] + t1
                vd[lane] = vc[lane]; vc[lane] = vb[lane]; vb[lane] = va[lane]; va[lane] = t1 + t2
        for lane in range(_LANES):
            blk = base + lane
            if blk < n_blocks:
                h0 = np.uint64(va[lane] + u32(0x6a09e667)); h1 = np.uint64(vb[lane] + u32(0xbb67ae85))
                h2 = np.uint64(vc[lane] + u32(0x3c6ef372)); h3 = np.uint64(vd[lane] + u32(0xa54ff53a))
                h4 = np.uint64(ve[lane] + u32(0x510e527f)); h5 = np.uint64(vf[lane] + u32(0x9b05688c))
                h6 = np.uint64(vg[lane] + u32(0x1f83d9ab)); h7 = np.uint64(vh[lane] + u32(0x5be0cd19))
                out_words[blk * 4 + 0] = _bswap32(h0) | (_bswap32(h1) << np.uint64(32))
                out_words[blk * 4 + 1] = _bswap32(h2) | (_bswap32(h3) << np.uint64(32))
                out_words[blk * 4 + 2] = _bswap32(h4) | (_bswap32(h5) << np.uint64(32))
                out_words[blk * 4 + 3] = _bswap32(h6) | (_bswap32(h7) << np.uint64(32))


@njit(cache=True)
def _reject_rem(bound):
    """2^64 mod bound, as uint64. A draw v is accepted iff this is 0 or
    v < 2^64 - rem, matching floor(2^64/bound)*bound without 128-bit math."""
    full = np.uint64(0xFFFFFFFFFFFFFFFF)
    return (full % bound + np.uint64(1)) % bound


@njit(cache=True)
def _material_kernel(words, g, nprime, vocab_size, order, partition, mask):
    """Consume the word stream: segment index, mask bits, shuffle, slicing.

    Returns (segment_index, ok); ok is False when the word buffer ran dry
    (possible only through rejection-sampling retries).
    """
    n_words = words.shape[0]
    full = np.uint64(0xFFFFFFFFFFFFFFFF)
    cur = 0

    # segment index
    bound = np.uint64(g)
    rem = _reject_rem(bound)
    ind = np.int64(-1)
    while True:
        if cur >= n_words:
            return np.int64(-1), False
        v = words[cur]; cur += 1
        if rem == np.uint64(0) or v < full - rem + np.uint64(1):
            ind = np.int64(v % bound)
            break

    # mask bits: 2^64 mod 2 == 0, every word accepted
    two = np.uint64(2)
    for i in range(nprime):
        if cur >= n_words:
            return np.int64(-1), False
        mask[i] = np.uint8(words[cur] % two)
        cur += 1

    # Fisher-Yates, positions N-1 down to 1
    for i in range(vocab_size):
        order[i] = i
    for i in range(vocab_size - 1, 0, -1):
        m = np.uint64(i + 1)
        rem = _reject_rem(m)
        while True:
            if cur >= n_words:
                return np.int64(-1), False
            v = words[cur]; cur += 1
            if rem == np.uint64(0) or v < full - rem + np.uint64(1):
                j = np.int64(v % m)
                tmp = order[i]
                order[i] = order[j]
                order[j] = tmp
                break

    # contiguous slices: first (N mod n') of size ceil, rest floor
    base_size = vocab_size // nprime
    extra = vocab_size % nprime
    pos = 0
    for s in range(nprime):
        size = base_size + 1 if s < extra else base_size
        for k in range(pos, pos + size):
            partition[order[k]] = s
        pos += size
    return ind, True


def keystream_words(digest: bytes, n_words: int) -> np.ndarray:
    """First n_words little-endian 8-byte words of the digest's counter stream."""
    n_blocks = (n_words + 3) // 4
    out = np.empty(n_blocks * 4, dtype=np.uint64)
    digest_words = np.frombuffer(digest, dtype=">u4").astype(np.uint32)
    _sha256_ctr_words(digest_words, n_blocks, out)
    return out[:n_words]


def material_fast(digest: bytes, g: int, nprime: int, vocab_size: int):
    """Fast-path equivalent of keys._material_reference."""
    need = 1 + nprime + (vocab_size - 1) + 16
    while True:
        words = keystream_words(digest, need)
        order = np.empty(vocab_size, dtype=np.int32)
        partition = np.empty(vocab_size, dtype=np.int32)
        mask = np.empty(nprime, dtype=np.uint8)
        ind, ok = _material_kernel(words, g, nprime, vocab_size, order, partition, mask)
        if ok:
            return int(ind), mask, partition
        need *= 2  # rejection streak exhausted the buffer; retry deterministically


def warmup() -> None:
    """Force JIT compilation (cached on disk after the first process)."""
    if AVAILABLE:
        material_fast(b"\x00" * 32, 2, 2, 4)
