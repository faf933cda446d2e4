import json
from importlib import resources

import numpy as np
import pytest

from tokenmark import KeyStream, RangeError, WatermarkConfig, derive_digest, derive_step_material
from tokenmark import _fastkeys
from tokenmark.keys import _material_reference, slice_sizes

KEY = bytes.fromhex("0123456789abcdef0123456789abcdef")


@pytest.fixture(scope="module")
def vectors():
    text = resources.files("tokenmark").joinpath("data/test-vectors.json").read_text()
    return json.loads(text)


def make_cfg(vocab_size=100, segment_bits=8, num_segments=2, window=2):
    return WatermarkConfig(
        secret_key=KEY, vocab_size=vocab_size, message_bits=segment_bits * num_segments,
        segment_bits=segment_bits, num_segments=num_segments, num_layers=10,
        context_window=window, sampling_seed=0,
    )


class TestDigest:
    def test_deterministic(self):
        a = derive_digest(KEY, 1, [5, 7], 2)
        assert a == derive_digest(KEY, 1, [5, 7], 2)

    def test_layers_separate(self):
        assert derive_digest(KEY, 1, [5, 7], 2) != derive_digest(KEY, 2, [5, 7], 2)

    def test_window_truncates(self):
        assert derive_digest(KEY, 1, [1, 2, 5, 7], 2) == derive_digest(KEY, 1, [5, 7], 2)

    def test_padding_distinguishes_positions(self):
        assert derive_digest(KEY, 1, [], 2) != derive_digest(KEY, 1, [0], 2)

    def test_known_answers(self, vectors):
        for case in vectors["digests"]:
            digest = derive_digest(
                bytes.fromhex(case["secret_hex"]), case["layer"], case["context"], case["w"]
            )
            assert digest.hex() == case["digest_hex"], case["name"]

    def test_layer_zero_rejected(self):
        with pytest.raises(RangeError):
            derive_digest(KEY, 0, [], 2)


class TestKeyStream:
    def test_words_match_vectors(self, vectors):
        digest = bytes.fromhex(vectors["keystream"]["digest_hex"])
        stream = KeyStream(digest)
        got = [format(stream._next_word(), "016x") for _ in range(16)]
        assert got == vectors["keystream"]["first_words_hex"]

    def test_draws_match_vectors(self, vectors):
        digest = bytes.fromhex(vectors["draws"]["digest_hex"])
        stream = KeyStream(digest)
        got = [stream.next_uint(b) for b in vectors["draws"]["bounds"]]
        assert got == vectors["draws"]["values"]

    def test_bound_one_consumes_one_word(self):
        stream = KeyStream(derive_digest(KEY, 1, [5, 7], 2))
        assert stream.next_uint(1) == 0
        assert stream.words_read == 1

    def test_range_contract(self):
        stream = KeyStream(derive_digest(KEY, 1, [1], 2))
        for _ in range(500):
            assert 0 <= stream.next_uint(64) < 64

    def test_binary_frequency(self):
        # 1e6 accepted draws at bound 2; tolerance is 4 sigma of the binomial
        digest = derive_digest(KEY, 1, [2, 3], 2)
        words = _fastkeys.keystream_words(digest, 1_000_000)
        freq = float(np.mean(words % 2))
        assert abs(freq - 0.5) <= 0.002

    def test_fast_words_equal_reference(self):
        for ctx in ([], [1], [7, 9]):
            digest = derive_digest(KEY, 1, ctx, 2)
            stream = KeyStream(digest)
            ref = [stream._next_word() for _ in range(101)]
            fast = _fastkeys.keystream_words(digest, 101)
            assert [int(w) for w in fast] == ref


class TestMaterial:
    def test_known_answers(self, vectors):
        for case in vectors["materials"]:
            digest = bytes.fromhex(case["digest_hex"])
            for fn in (_material_reference, _fastkeys.material_fast):
                ind, mask, partition = fn(
                    digest, case["num_segments"], case["segment_bits"], case["vocab_size"]
                )
                assert ind == case["segment_index"]
                assert mask.tolist() == case["mask"]
                assert partition.tolist() == case["partition"]

    @pytest.mark.parametrize("g,nprime,vocab", [
        (2, 2, 8), (4, 4, 10), (8, 8, 100), (3, 5, 257), (64, 8, 999),
    ])
    def test_backends_agree(self, g, nprime, vocab):
        for layer in (1, 3):
            for ctx in ([], [42], [1, 2, 3]):
                digest = derive_digest(KEY, layer, ctx, 2)
                ri, rm, rp = _material_reference(digest, g, nprime, vocab)
                fi, fm, fp = _fastkeys.material_fast(digest, g, nprime, vocab)
                assert ri == fi
                assert np.array_equal(rm, fm)
                assert np.array_equal(rp, fp)

    def test_subset_sizes_exact_split(self):
        cfg = make_cfg(vocab_size=8, segment_bits=2, num_segments=8)
        material = derive_step_material(KEY, 1, [3], cfg)
        counts = np.bincount(material.partition, minlength=2)
        assert counts.tolist() == [4, 4]
        assert sorted(np.where(material.partition >= 0)[0].tolist()) == list(range(8))

    def test_subset_sizes_remainder(self):
        assert slice_sizes(10, 4) == [3, 3, 2, 2]
        cfg = make_cfg(vocab_size=10, segment_bits=4, num_segments=4)
        material = derive_step_material(KEY, 1, [3], cfg)
        assert np.bincount(material.partition, minlength=4).tolist() == [3, 3, 2, 2]

    def test_generator_detector_symmetry(self):
        cfg = make_cfg()
        for layer in (1, 2, 10):
            a = derive_step_material(KEY, layer, [10, 20, 30], cfg)
            b = derive_step_material(KEY, layer, [10, 20, 30], cfg)
            assert a.segment_index == b.segment_index
            assert np.array_equal(a.mask, b.mask)
            assert np.array_equal(a.partition, b.partition)

    def test_shuffle_uniformity(self):
        # token 0 lands in subset 0 with frequency 1/2 +/- 0.01 over 1e5 digests
        hits = np.zeros(6, dtype=np.int64)
        draws = 100_000
        for i in range(draws):
            digest = derive_digest(KEY, 1, [i], 2)
            _, _, partition = _fastkeys.material_fast(digest, 2, 2, 6)
            hits += partition == 0
        freq = hits / draws
        assert np.all(np.abs(freq - 0.5) <= 0.01), freq

    def test_mask_uniformity(self):
        # expected Hamming weight n'/2 within 3 binomial sigmas
        nprime, draws = 8, 20_000
        total = 0
        for i in range(draws):
            digest = derive_digest(KEY, 2, [i, i + 1], 2)
            _, mask, _ = _fastkeys.material_fast(digest, 2, nprime, 16)
            total += int(mask.sum())
        mean = total / draws
        sigma = np.sqrt(nprime * 0.25 / draws)
        assert abs(mean - nprime / 2) <= 3 * sigma

    def test_secret_sensitivity(self, rng):
        cfg = make_cfg(vocab_size=64)
        for _ in range(100):
            secret = bytes(rng.integers(0, 256, size=16, dtype=np.uint8))
            flipped = bytearray(secret)
            pos = int(rng.integers(0, 16))
            flipped[pos] ^= 1 + int(rng.integers(0, 255))
            a = derive_step_material(secret, 1, [5, 6], cfg)
            b = derive_step_material(bytes(flipped), 1, [5, 6], cfg)
            assert not np.array_equal(a.partition, b.partition)
