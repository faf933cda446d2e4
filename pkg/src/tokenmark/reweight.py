"""Colored-channel reweighting: green-mass scales, overflow redistribution.

One layer takes a payload of n' bits ("colors" for the n' vocabulary
subsets), amplifies the green subsets by the feasibility-clamped target
scale, and redistributes whatever the clamp left on the table according to
each subset's share of the total overflow across all weight-l colorings.
Averaged over all colorings of one weight, the scale of every subset is
exactly 1, which is what makes the construction distortion-free.

Channel enumeration is in ascending combinatorial rank (colexicographic
order of support sets); this order is normative so floating-point
accumulations reproduce across implementations.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np

from .keys import StepKeyMaterial
from .types import (
    DegenerateWeight,
    InvalidDistribution,
    LengthMismatch,
    RangeError,
    TokenDistribution,
)

LEFTOVER_EPS = 1e-12


@lru_cache(maxsize=256)
def channel_matrix(nprime: int, l: int) -> np.ndarray:
    """All weight-l colorings of n' subsets as a (C(n',l), n') 0/1 matrix,
    rows in ascending combinatorial rank."""
    if not 0 <= l <= nprime:
        raise RangeError(f"weight {l} outside [0, {nprime}]")
    supports = sorted(combinations(range(nprime), l), key=lambda c: tuple(reversed(c)))
    mat = np.zeros((len(supports), nprime), dtype=np.float64)
    for row, support in enumerate(supports):
        mat[row, list(support)] = 1.0
    mat.flags.writeable = False
    return mat


def green_mass(payload: np.ndarray, masses: np.ndarray) -> float:
    """Total probability mass of the green subsets under this coloring."""
    payload = np.asarray(payload)
    masses = np.asarray(masses, dtype=np.float64)
    if payload.shape != masses.shape:
        raise LengthMismatch(f"payload length {payload.shape} != masses {masses.shape}")
    return float(np.dot(payload.astype(np.float64), masses))


def scales(l: int, beta: float, nprime: int) -> tuple[float, float, float]:
    """(target, actual, overflow) green scales for weight l and green mass beta.

    target = n'/l; actual clamps it to 1/beta so the reweighted vector can
    still normalize; overflow is the clamped-off remainder.
    """
    if l == 0:
        raise DegenerateWeight("target scale undefined at weight 0; callers short-circuit")
    if not 1 <= l <= nprime:
        raise RangeError(f"weight {l} outside [1, {nprime}]")
    s_t = nprime / l
    s_a = s_t if beta <= 0.0 else min(s_t, 1.0 / beta)
    return s_t, s_a, s_t - s_a


def overflow_masses(masses: np.ndarray, l: int) -> np.ndarray:
    """Per-subset overflow mass aggregated over every weight-l coloring."""
    masses = np.asarray(masses, dtype=np.float64)
    nprime = len(masses)
    if l == 0:
        raise DegenerateWeight("no overflow at weight 0")
    channels = channel_matrix(nprime, l)
    beta = channels @ masses
    s_t = nprime / l
    # below 1e-300 the clamp resolves to s_t anyway; skip the division to
    # keep subnormal masses from overflowing 1/beta
    tiny = beta <= 1e-300
    s_a = np.minimum(s_t, 1.0 / np.where(tiny, 1.0, beta))
    s_a[tiny] = s_t
    s_o = s_t - s_a
    return masses * (channels.T @ s_o)


def reweight_function(payload: np.ndarray, masses: np.ndarray) -> np.ndarray:
    """Final per-subset scale vector for one payload.

    Conventions: degenerate weights (l = 0 or l = n') give the identity
    vector; a leftover at or below 1e-12 contributes nothing (the overflow
    total vanishes together with every leftover, so 0/0 resolves to 0);
    zero-mass subsets take payload*actual and are excluded from overflow
    redistribution.
    """
    payload = np.asarray(payload, dtype=np.float64)
    masses = np.asarray(masses, dtype=np.float64)
    if payload.shape != masses.shape:
        raise LengthMismatch(f"payload length {payload.shape} != masses {masses.shape}")
    nprime = len(masses)
    l = int(round(float(payload.sum())))
    if l == 0 or l == nprime:
        return np.ones(nprime)
    beta = float(np.dot(payload, masses))
    _, s_a, _ = scales(l, beta, nprime)
    leftover = 1.0 - s_a * beta
    alpha = payload * s_a
    if leftover > LEFTOVER_EPS:
        overflow = overflow_masses(masses, l)
        total = overflow.sum()
        positive = masses > 0.0
        alpha[positive] += leftover * overflow[positive] / (total * masses[positive])
    return alpha


def reweight_all_channels(masses: np.ndarray, l: int) -> np.ndarray:
    """Scale vectors for every weight-l coloring at once, one row per channel.

    Row order matches channel_matrix. Used by the identity property tests
    (row-average must be the all-ones vector) and by exhaustive enumeration.
    """
    masses = np.asarray(masses, dtype=np.float64)
    nprime = len(masses)
    if l == 0 or l == nprime:
        return np.ones((1, nprime))
    channels = channel_matrix(nprime, l)
    beta = channels @ masses
    s_t = nprime / l
    # below 1e-300 the clamp resolves to s_t anyway; skip the division to
    # keep subnormal masses from overflowing 1/beta
    tiny = beta <= 1e-300
    s_a = np.minimum(s_t, 1.0 / np.where(tiny, 1.0, beta))
    s_a[tiny] = s_t
    leftover = 1.0 - s_a * beta
    overflow = masses * (channels.T @ (s_t - s_a))
    total = overflow.sum()
    share = np.zeros(nprime)
    positive = masses > 0.0
    if total > 0.0:
        share[positive] = overflow[positive] / (total * masses[positive])
    out = channels * s_a[:, None]
    live = leftover > LEFTOVER_EPS
    out[live] += leftover[live, None] * share[None, :]
    return out


def apply_scales(
    dist: TokenDistribution, partition: np.ndarray, alpha: np.ndarray
) -> TokenDistribution:
    """Scale every token by its subset's factor; renormalize by the exact sum."""
    out = dist.probs * alpha[partition]
    total = out.sum()
    if total <= 0.0:
        raise InvalidDistribution("reweighted mass vanished")
    return TokenDistribution(out / total)


def reweight_layer(
    dist: TokenDistribution, material: StepKeyMaterial, segment_payload: np.ndarray
) -> TokenDistribution:
    """One layer: subset masses under the partition, scales, application.

    segment_payload is the already-masked local payload. Degenerate weights
    return the input distribution object unchanged (exact identity).
    """
    nprime = len(material.mask)
    if len(segment_payload) != nprime:
        raise LengthMismatch(
            f"payload length {len(segment_payload)} != mask length {nprime}"
        )
    l = int(segment_payload.sum())
    if l == 0 or l == nprime:
        return dist
    masses = np.bincount(material.partition, weights=dist.probs, minlength=nprime)
    alpha = reweight_function(segment_payload, masses)
    return apply_scales(dist, material.partition, alpha)
