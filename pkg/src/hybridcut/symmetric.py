"""Depth-limited evaluation of arbitrary symmetric Boolean functions.

A symmetric f depends only on the Hamming weight |x|.  Around the middle
weight, f is constant on a plateau of half-width Gamma; two threshold tests
decide whether |x| falls on that plateau.  If it does not, the weight is
pinned down exactly by repeatedly halving a window around sqrt(|x|/N), first
coherently (steeper erf polynomials, deeper circuits) and then statistically
(fixed polynomial, more shots) once the depth budget is reached.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import erfinv

from .errors import DegreeOverflow, InvalidInput, InvalidWindow, NotApplicable
from .ledger import QueryLedger, new_ledger
from .polynomials import DEGREE_CAP, BoundedPolynomial, erf_poly
from .qsvt import (
    BlockEncoding,
    OracleInput,
    apply_qsvt,
    sample_flag,
    threshold_block_encoding,
    zero_state,
)
from .stats import MAX_SHOTS, seed_sequence
from .threshold import (
    SolveResult,
    ThresholdInstance,
    classical_count,
    interpolated_answer_probability,
    solve_threshold_interpolated,
)

DEFAULT_ETA = 1 / 8
TEST_FAILURE = 0.05
UNBOUNDED_DEPTH = 10**9
_PLAN_GRID = 257
SIGMA_CAP = 0.25


@dataclass(frozen=True)
class SymmetricFunction:
    """Truth table f_0..f_N indexed by Hamming weight."""

    table: tuple[int, ...]

    def __post_init__(self):
        table = tuple(int(v) for v in self.table)
        if len(table) < 2:
            raise InvalidInput("table needs at least two entries")
        if any(v not in (0, 1) for v in table):
            raise InvalidInput("table entries must be 0 or 1")
        if len(set(table)) == 1:
            raise NotApplicable("constant functions need no queries")
        object.__setattr__(self, "table", table)

    @property
    def n(self) -> int:
        return len(self.table) - 1

    def __call__(self, weight: int) -> int:
        return self.table[weight]

    def evaluate(self, bits) -> int:
        return self.table[sum(bits)]

    @classmethod
    def from_json(cls, text: str) -> SymmetricFunction:
        data = json.loads(text)
        if not isinstance(data, list):
            raise InvalidInput("expected a JSON array of 0/1 values")
        return cls(tuple(data))

    @classmethod
    def load(cls, path: str | Path) -> SymmetricFunction:
        return cls.from_json(Path(path).read_text())

    @classmethod
    def parity(cls, n: int) -> SymmetricFunction:
        return cls(tuple(w % 2 for w in range(n + 1)))

    @classmethod
    def majority(cls, n: int) -> SymmetricFunction:
        """1 iff strictly more than half of the bits are set."""
        return cls(tuple(int(2 * w > n) for w in range(n + 1)))

    @classmethod
    def threshold(cls, n: int, k: int) -> SymmetricFunction:
        return cls(tuple(int(w > k) for w in range(n + 1)))


def gamma_of(f: SymmetricFunction) -> int:
    """Widest centered plateau: largest g = N (mod 2) with f constant on [(N-g)/2, (N+g)/2].

    Returns 0 when not even the innermost admissible plateau is constant
    (for odd N that means f(⌊N/2⌋) != f(⌈N/2⌉)).
    """
    if not isinstance(f, SymmetricFunction):
        f = SymmetricFunction(tuple(f))
    n = f.n
    best = 0
    for g in range(n % 2, n + 1, 2):
        lo, hi = (n - g) // 2, (n + g) // 2
        if len(set(f.table[lo : hi + 1])) == 1:
            best = g
        else:
            break
    return best


def plateau(f: SymmetricFunction) -> tuple[int, int]:
    """Integer weights (lo, hi) of the plateau; lo > hi means it is empty."""
    n, g = f.n, gamma_of(f)
    return math.ceil((n - g) / 2), (n + g) // 2


@dataclass(frozen=True)
class WeightWindow:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise InvalidWindow(f"lo={self.lo} exceeds hi={self.hi}")
        if self.lo < -1 - 1e-12 or self.hi > 1 + 1e-12:
            raise InvalidWindow("window must lie in [-1, 1]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def center(self) -> float:
        return (self.lo + self.hi) / 2

    def contains(self, z: float) -> bool:
        return self.lo <= z <= self.hi


class Halving(NamedTuple):
    window: WeightWindow
    ledger: QueryLedger


# ------------------------------------------------------------------- halving


def full_steepness(width: float, eta: float = DEFAULT_ETA) -> float:
    """Steepness that puts the window edges at erf = -/+(1 - 2 eta)."""
    return 2 * float(erfinv(1 - 2 * eta)) / width


class _Profile(NamedTuple):
    """Flag probability P(z)^2 tabulated on a grid over the window."""

    z: np.ndarray
    q: np.ndarray

    @classmethod
    def of(cls, poly: BoundedPolynomial, window: WeightWindow) -> _Profile:
        z = np.linspace(window.lo, window.hi, _PLAN_GRID)
        return cls(z, np.minimum(1.0, poly(z) ** 2))

    @property
    def step(self) -> float:
        return self.z[1] - self.z[0]

    def invert(self, p_hat: float, sigma: float) -> tuple[float, float]:
        """Grid hull of {z : |P(z)^2 - p_hat| <= sigma}, padded by one grid step."""
        hit = np.nonzero(np.abs(self.q - p_hat) <= sigma)[0]
        if hit.size == 0:
            hit = np.array([np.argmin(np.abs(self.q - p_hat))])
        lo = max(self.z[0], self.z[hit[0]] - self.step)
        hi = min(self.z[-1], self.z[hit[-1]] + self.step)
        return float(lo), float(hi)

    def worst_width(self, sigma: float) -> float:
        """Largest inverted width over true values on the grid.

        A frequency within sigma of q(z) inverts inside the set of grid
        points within 2 sigma of q(z), so that set bounds the result.
        """
        close = np.abs(self.q[:, None] - self.q[None, :]) <= 2 * sigma
        idx = np.arange(len(self.z))
        first = np.where(close, idx, len(idx)).min(axis=1)
        last = np.where(close, idx, -1).max(axis=1)
        return float(np.max(self.z[last] - self.z[first]) + 2 * self.step)


def _halving_sigma(profile: _Profile, width: float) -> float | None:
    """Largest sampling precision (at most SIGMA_CAP) that still halves the window."""
    target = width / 2
    if profile.worst_width(SIGMA_CAP) <= target:
        return SIGMA_CAP
    lo, hi = 0.0, SIGMA_CAP
    for _ in range(24):
        mid = (lo + hi) / 2
        if profile.worst_width(mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo if lo > 0 else None


def shots_for(sigma: float, failure: float) -> int:
    """Hoeffding: P(|p_hat - p| > sigma) <= failure."""
    return math.ceil(math.log(2 / failure) / (2 * sigma**2))


def _shifted(p: BoundedPolynomial) -> BoundedPolynomial:
    coeffs = p.coefficients / 2
    coeffs[0] += 0.5
    return BoundedPolynomial(coeffs, p.certified_sup_error / 2)


def _erf_within(kappa: float, mu: float, eps: float, max_degree: int | None) -> BoundedPolynomial:
    """(1 + erf(kappa (z - mu)))/2, with kappa lowered if needed to stay within max_degree."""
    cap = DEGREE_CAP if max_degree is None else min(max_degree, DEGREE_CAP)
    try:
        return _shifted(erf_poly(kappa, mu, eps, cap=cap))
    except DegreeOverflow:
        if max_degree is None:
            raise
    lo, hi = 0.0, kappa
    for _ in range(30):
        mid = (lo + hi) / 2
        try:
            erf_poly(mid, mu, eps, cap=cap)
            lo = mid
        except DegreeOverflow:
            hi = mid
    if lo == 0:
        raise InvalidWindow(f"no erf polynomial fits in degree {max_degree}")
    return _shifted(erf_poly(lo, mu, eps, cap=cap))


def cut_in_half(
    be: BlockEncoding,
    window: WeightWindow,
    E: float,
    ledger: QueryLedger,
    seed=None,
    *,
    eta: float = DEFAULT_ETA,
    steepness: float | None = None,
    max_degree: int | None = None,
) -> Halving:
    """Shrink a window around the encoded value to at most half its width.

    By default the polynomial approximates erf(kappa (z - mu)) with kappa set
    by the window width, so its degree grows as 1/width.  A smaller
    ``steepness`` keeps circuits shallow and costs shots instead: the
    sampling precision is always the loosest one that halves the window for
    every true value in it.  The frequency is inverted through the
    polynomial itself, so its approximation error costs nothing here.
    With ``max_degree`` set, the steepness is lowered until it fits.
    """
    if window.width == 0:
        return Halving(window, ledger)
    if not 0 < E < 1:
        raise ValueError("failure budget must lie in (0, 1)")
    kappa = full_steepness(window.width, eta) if steepness is None else min(
        steepness, full_steepness(window.width, eta)
    )
    poly, profile, sigma = _round_plan(window, kappa, eta / 8, max_degree)
    if sigma is None or shots_for(sigma, E) > MAX_SHOTS:
        raise InvalidWindow(f"steepness {kappa:g} cannot halve a window of width {window.width:g}")
    shots = shots_for(sigma, E)
    rng = np.random.default_rng(seed)
    transformed = apply_qsvt(be, poly)
    ones, ledger = sample_flag(transformed, zero_state(transformed), shots, ledger, rng)
    lo, hi = profile.invert(ones / shots, sigma)
    half = window.width / 2
    if hi - lo > half:
        mid = (lo + hi) / 2
        lo, hi = mid - half / 2, mid + half / 2
    return Halving(WeightWindow(lo, hi), ledger)


@lru_cache(maxsize=8192)
def _round_plan(window: WeightWindow, kappa: float, eps: float, max_degree: int | None):
    """Polynomial, tabulated profile and sampling precision for one round.

    Independent of the input, so repeated windows (always the first one)
    are planned once.
    """
    poly = _erf_within(kappa, window.center, eps, max_degree)
    profile = _Profile.of(poly, window)
    return poly, profile, _halving_sigma(profile, window.width)


def halving_depth(width: float, eta: float = DEFAULT_ETA) -> int:
    """Coherent queries per circuit of a full-steepness halving round."""
    return erf_poly(full_steepness(width, eta), 0.0, eta / 8).degree


# ---------------------------------------------------------------- estimation


def weight_resolution(n: int, w_max: int) -> float:
    """Half the smallest gap between sqrt(w/N) and sqrt((w+1)/N) for w < w_max."""
    w_max = max(1, w_max)
    return (math.sqrt(w_max / n) - math.sqrt((w_max - 1) / n)) / 2


@lru_cache(maxsize=256)
def _depth_limited_width(depth: int, eta: float = DEFAULT_ETA) -> float | None:
    """Smallest window width whose full-steepness halving fits in ``depth`` (None if none does)."""
    depth = min(depth, DEGREE_CAP)
    if not _fits(1.0, depth, eta):
        return None
    lo, hi = 1e-4, 1.0
    if _fits(lo, depth, eta):
        return lo
    for _ in range(40):
        mid = math.sqrt(lo * hi)
        if _fits(mid, depth, eta):
            hi = mid
        else:
            lo = mid
    return hi


def _fits(width: float, depth: int, eta: float) -> bool:
    try:
        return erf_poly(full_steepness(width, eta), 0.0, eta / 8, cap=depth).degree <= depth
    except DegreeOverflow:
        return False


class WeightEstimate(NamedTuple):
    weight: int
    ledger: QueryLedger
    fallback: bool = False


def estimate_hamming_weight(
    inp: OracleInput,
    depth: int,
    alpha: float = 0.0,
    ledger: QueryLedger | None = None,
    seed=None,
    *,
    failure: float = 1 / 3,
    w_max: int | None = None,
    complemented: bool = False,
) -> WeightEstimate:
    """Exact Hamming weight (of ¬x if ``complemented``) by window halving.

    Coherent rounds run until the window width reaches
    Delta' = max(Delta^(1-alpha), narrowest width the depth allows); the rest
    reuse that steepness statistically until the window is narrower than
    2 Delta, the smallest gap between candidate values.  ``w_max`` bounds the
    weight and sets Delta; per-round failure is ``failure`` / #rounds.
    """
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    ledger = ledger if ledger is not None else new_ledger(depth)
    n = inp.size
    w_max = n if w_max is None else w_max
    target = inp.negated() if complemented else inp
    if w_max <= 0:
        return WeightEstimate(0, ledger)
    delta = weight_resolution(n, w_max)
    limit = min(depth, ledger.depth_limit)
    depth_width = _depth_limited_width(limit)
    if depth_width is None:
        weight, ledger = classical_count(target, ledger)
        return WeightEstimate(weight, ledger, True)
    switch = max(delta ** (1 - alpha), depth_width)
    hi0 = math.sqrt(w_max / n)
    window = WeightWindow(0.0, hi0)
    rounds = max(1, math.floor(math.log2(hi0 / (2 * delta))) + 1)
    per_round = failure / rounds
    be = threshold_block_encoding(target)
    seeds = seed_sequence(seed).spawn(rounds)
    kappa = None
    i = 0
    try:
        while window.width >= 2 * delta:
            if window.width > switch and kappa is None:
                window, ledger = cut_in_half(
                    be, window, per_round, ledger, seeds[i], max_degree=limit
                )
            else:
                if kappa is None:
                    kappa = full_steepness(max(window.width, switch))
                window, ledger = cut_in_half(
                    be, window, per_round, ledger, seeds[i], steepness=kappa, max_degree=limit
                )
            i += 1
    except InvalidWindow:
        weight, ledger = classical_count(target, ledger)
        return WeightEstimate(weight, ledger, True)
    grid = np.sqrt(np.arange(w_max + 1) / n)
    return WeightEstimate(int(np.argmin(np.abs(grid - window.center))), ledger)


# ---------------------------------------------------------------- reduction


def ideal_branch(f: SymmetricFunction, weight: int) -> tuple[str, int]:
    """Branch taken and value returned when every test and estimate is exact."""
    lo, hi = plateau(f)
    if weight < lo:
        return "below", f(weight)
    if weight > hi:
        return "above", f(weight)
    return "in", f(lo)


def branch_probabilities(f: SymmetricFunction, inp: OracleInput, depth: int) -> dict[str, float]:
    """Exact probabilities of the three branches under the two threshold tests."""
    lo, hi = plateau(f)
    n = f.n
    p_not_below = (
        1.0
        if lo == 0
        else interpolated_answer_probability(ThresholdInstance(inp, lo - 1), depth, TEST_FAILURE)
    )
    p_above = (
        0.0 if hi >= n else interpolated_answer_probability(ThresholdInstance(inp, hi), depth, TEST_FAILURE)
    )
    return {
        "below": 1 - p_not_below,
        "above": p_not_below * p_above,
        "in": p_not_below * (1 - p_above),
    }


def solve_symmetric(
    f: SymmetricFunction,
    inp: OracleInput,
    depth: int,
    ledger: QueryLedger | None = None,
    seed=None,
    *,
    alpha: float = 0.0,
) -> SolveResult:
    """Evaluate f(x) within coherent depth ``depth``.

    Two threshold tests place |x| below, above or on the plateau; off the
    plateau the weight (or its complement) is estimated exactly.
    """
    if inp.size != f.n:
        raise InvalidInput(f"input size {inp.size} does not match table for N={f.n}")
    ledger = ledger if ledger is not None else new_ledger(depth)
    n = f.n
    lo, hi = plateau(f)
    seeds = seed_sequence(seed).spawn(3)
    fallback = False
    below = False
    if lo > 0:
        res = solve_threshold_interpolated(
            ThresholdInstance(inp, lo - 1), depth, seeds[0], failure=TEST_FAILURE, ledger=ledger
        )
        ledger, fallback, below = res.ledger, res.fallback, res.answer == 0
    if below:
        est = estimate_hamming_weight(
            inp, depth, alpha, ledger, seeds[2], failure=0.2, w_max=lo - 1
        )
        return SolveResult(f(est.weight), est.ledger, fallback or est.fallback)
    above = False
    if hi < n:
        res = solve_threshold_interpolated(
            ThresholdInstance(inp, hi), depth, seeds[1], failure=TEST_FAILURE, ledger=ledger
        )
        ledger, fallback, above = res.ledger, fallback or res.fallback, res.answer == 1
    if above:
        est = estimate_hamming_weight(
            inp, depth, alpha, ledger, seeds[2], failure=0.2, w_max=n - hi - 1, complemented=True
        )
        return SolveResult(f(n - est.weight), est.ledger, fallback or est.fallback)
    return SolveResult(f(lo), ledger, fallback)
