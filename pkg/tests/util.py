"""Shared helpers for exhaustive enumeration tests."""

from itertools import combinations, product

import numpy as np

from tokenmark.keys import StepKeyMaterial, slice_sizes


def enumerate_materials(vocab_size: int, nprime: int, num_segments: int = 1):
    """Every (segment_index, mask, partition) the keystream can emit, each
    exactly once: ordered near-equal partitions x all masks x all segments.

    Only implemented for nprime=2 (two slice sizes at most differ by one, so
    an ordered partition is fixed by the members of slice 0).
    """
    assert nprime == 2
    sizes = slice_sizes(vocab_size, nprime)
    for segment in range(num_segments):
        for subset0 in combinations(range(vocab_size), sizes[0]):
            partition = np.ones(vocab_size, dtype=np.int32)
            partition[list(subset0)] = 0
            for mask_bits in product((0, 1), repeat=nprime):
                yield StepKeyMaterial(
                    layer=1,
                    segment_index=segment,
                    mask=np.array(mask_bits, dtype=np.uint8),
                    partition=partition.copy(),
                )


def random_masses(rng: np.random.Generator, nprime: int) -> np.ndarray:
    """A random point on the simplex, occasionally with hard zeros."""
    masses = rng.dirichlet(np.full(nprime, rng.uniform(0.05, 3.0)))
    if rng.random() < 0.15:
        kill = rng.integers(0, nprime)
        masses[kill] = 0.0
        masses /= masses.sum()
    return masses
