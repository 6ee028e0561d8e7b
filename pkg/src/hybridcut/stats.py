"""Sample-count planning for deciding between two Bernoulli biases."""
from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.stats import binom, norm

MAX_SHOTS = 10**12


class BernoulliTest(NamedTuple):
    shots: int
    cutoff: int  # declare "high" when at least this many ones are seen


def _cutoff(shots: int, q_low: float, failure: float) -> int:
    return int(binom.ppf(1 - failure, shots, q_low)) + 1


def _passes(shots: int, q_low: float, q_high: float, failure: float) -> bool:
    c = _cutoff(shots, q_low, failure)
    return c <= shots and binom.cdf(c - 1, shots, q_high) <= failure


@lru_cache(maxsize=4096)
def bernoulli_test(q_low: float, q_high: float, failure: float) -> BernoulliTest | None:
    """Fewest shots separating success probability <= q_low from >= q_high.

    The returned cutoff keeps both one-sided error probabilities at or below
    ``failure`` (exact binomial tails).  ``None`` if the biases do not separate
    within ``MAX_SHOTS``.
    """
    if not q_high > q_low:
        return None
    z = norm.isf(failure)
    gap = q_high - q_low
    guess = (z * ((q_low * (1 - q_low)) ** 0.5 + (q_high * (1 - q_high)) ** 0.5) / gap) ** 2
    lo, hi = 0, max(1, int(guess / 4))
    while not _passes(hi, q_low, q_high, failure):
        lo, hi = hi, hi * 2
        if hi > MAX_SHOTS:
            return None
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _passes(mid, q_low, q_high, failure):
            hi = mid
        else:
            lo = mid
    return BernoulliTest(hi, _cutoff(hi, q_low, failure))


def seed_sequence(seed) -> np.random.SeedSequence:
    """Normalize an int, None, SeedSequence or Generator into a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return seed.bit_generator.seed_seq
    return np.random.SeedSequence(seed)
