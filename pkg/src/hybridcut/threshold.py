"""Depth-limited solvers for Threshold_k(x) = [|x| > k].

Two strategies:

* interpolation: one QSVT step polynomial applied to the scalar encoding of
  sqrt(|x|/N), with degree capped by the depth budget and the lost contrast
  paid back in measurement shots;
* parallelization: a random partition of the input into bins, amplitude
  estimation of every bin's Hamming weight within the depth budget, and a
  classical sum of the (rounded) bin estimates.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import erf
from scipy.stats import binom, hypergeom

from .errors import DegreeOverflow, InvalidInput
from .ledger import QueryLedger, new_ledger
from .polynomials import BoundedPolynomial, StepSpec, erf_poly, step_poly
from .qsvt import (
    OracleInput,
    apply_qsvt,
    complement_block_encoding,
    flag_probability,
    sample_flag,
    scalar_value,
    threshold_block_encoding,
    zero_state,
)
from .stats import bernoulli_test, seed_sequence

FULL_DEPTH_ETA = 1 / 8
DEFAULT_FAILURE = 0.1
SHALLOW_ACCURACIES = (1 / 8, 1 / 4, 1 / 2)


class SolveResult(NamedTuple):
    answer: int
    ledger: QueryLedger
    fallback: bool = False


@dataclass(frozen=True)
class ThresholdInstance:
    input: OracleInput
    k: int

    def __post_init__(self):
        if not 0 <= self.k <= self.input.size:
            raise InvalidInput(f"k={self.k} outside [0, {self.input.size}]")

    @property
    def truth(self) -> int:
        return int(self.input.weight > self.k)


def threshold_value(bits, k: int) -> int:
    return int(sum(bits) > k)


def classical_count(inp: OracleInput, ledger: QueryLedger) -> tuple[int, QueryLedger]:
    """Read every bit with a one-query circuit."""
    return inp.weight, ledger.record(1, inp.size)


def _oriented(inst: ThresholdInstance) -> tuple[bool, int]:
    """(complemented, k') with k' <= N/2.

    |x| > k  iff  |not x| <= N - k - 1, so for k > N/2 we evaluate
    Threshold_{N-k-1} on the complement and negate.
    """
    n = inst.input.size
    if inst.k > n // 2:
        return True, n - inst.k - 1
    return False, inst.k


def threshold_gap(n: int, k: int) -> tuple[float, float]:
    """(delta, mu): half the distance and the midpoint between sqrt(k/N) and sqrt((k+1)/N)."""
    lo, hi = np.sqrt(k / n), np.sqrt((k + 1) / n)
    return (hi - lo) / 2, (hi + lo) / 2


# ---------------------------------------------------------------- interpolation


@dataclass(frozen=True, eq=False)
class InterpolationPlan:
    delta: float
    mu: float
    eta: float
    poly: BoundedPolynomial
    shots: int
    cutoff: int
    q_low: float
    q_high: float
    cost_multiplier: int

    @property
    def depth(self) -> int:
        return max(1, self.cost_multiplier * self.poly.degree)

    @property
    def total_queries(self) -> int:
        return self.depth * self.shots


def _half_shift(p: BoundedPolynomial, label: str) -> BoundedPolynomial:
    coeffs = p.coefficients / 2
    coeffs[0] += 0.5
    return BoundedPolynomial(coeffs, p.certified_sup_error / 2, label=label)


def _steepest_erf(mu: float, eps: float, max_degree: int) -> tuple[float, BoundedPolynomial]:
    """Largest steepness whose erf approximation at accuracy ``eps`` fits the degree cap."""

    def fits(kappa):
        try:
            return erf_poly(kappa, mu, eps, cap=max_degree).degree <= max_degree
        except DegreeOverflow:
            return False

    lo, hi = 0.0, 2.0 * max_degree + 2
    for _ in range(30):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if fits(mid) else (lo, mid)
    return lo, erf_poly(lo, mu, eps, cap=max_degree)


def _candidate_polynomials(delta: float, mu: float, max_degree: int):
    """(leakage bound, P) pairs whose degree fits in ``max_degree``.

    The full-depth step (leakage 1/8) is offered when it fits.  Shallower
    candidates take the steepest erf that fits at a few coarse accuracies:
    the decision rule below uses the exact acceptance probabilities, so a
    loose approximation only costs contrast, never correctness.
    """
    if max_degree < 1:
        return
    spec = StepSpec(delta, FULL_DEPTH_ETA, mu)
    try:
        yield FULL_DEPTH_ETA, step_poly(spec, cap=max_degree)
    except DegreeOverflow:
        pass
    for eps in SHALLOW_ACCURACIES:
        kappa, p = _steepest_erf(mu, eps, max_degree)
        if kappa > 0:
            leak = (1 - float(erf(kappa * delta)) + eps) / 2
            yield min(leak, 0.5), _half_shift(p, f"shallow-step(kappa={kappa:.4g})")


@lru_cache(maxsize=1024)
def plan_interpolation(
    n: int, k: int, depth: int, failure: float = DEFAULT_FAILURE, cost_multiplier: int = 1
) -> InterpolationPlan | None:
    """Polynomial, shot count and decision cutoff for Threshold_k at this depth.

    The flag probability is P(sqrt(w/N))^2 for Hamming weight w.  Since only
    N + 1 weights are possible, the worst cases on either side of the
    threshold are computed exactly and the shot count separates them.
    """
    delta, mu = threshold_gap(n, k)
    weights = np.sqrt(np.arange(n + 1) / n)
    best = None
    for eta, poly in _candidate_polynomials(delta, mu, depth // cost_multiplier):
        q = poly(weights) ** 2
        q_low, q_high = float(q[: k + 1].max()), float(q[k + 1 :].min())
        test = bernoulli_test(q_low, q_high, failure)
        if test is None:
            continue
        plan = InterpolationPlan(
            delta, mu, eta, poly, test.shots, test.cutoff, q_low, q_high, cost_multiplier
        )
        if best is None or plan.total_queries < best.total_queries:
            best = plan
    return best


@lru_cache(maxsize=4096)
def _scalar_encoding(inp: OracleInput, complemented: bool):
    if complemented:
        return complement_block_encoding(inp)
    return threshold_block_encoding(inp)


def _encoding(inst: ThresholdInstance, complemented: bool):
    return _scalar_encoding(inst.input, complemented)


def _bin_amplitude(bits: tuple[int, ...]) -> float:
    """|bin|^{-1} * (ones in bin), read off the bin's scalar block-encoding."""
    return scalar_value(_scalar_encoding(OracleInput(bits), False)) ** 2


def interpolated_answer_probability(
    inst: ThresholdInstance,
    depth: int,
    failure: float = DEFAULT_FAILURE,
    cost_multiplier: int = 1,
) -> float:
    """Exact probability that the interpolated solver answers 1 (no sampling)."""
    n = inst.input.size
    if inst.k >= n:
        return 0.0
    complemented, k = _oriented(inst)
    plan = plan_interpolation(n, k, depth, failure, cost_multiplier)
    if plan is None:
        return float(inst.truth)
    be = apply_qsvt(_encoding(inst, complemented), plan.poly, cost_multiplier)
    prob = flag_probability(be, zero_state(be))
    p_high = float(binom.sf(plan.cutoff - 1, plan.shots, prob))
    return 1 - p_high if complemented else p_high


def solve_threshold_interpolated(
    inst: ThresholdInstance,
    depth: int,
    seed=None,
    *,
    failure: float = DEFAULT_FAILURE,
    cost_multiplier: int = 1,
    ledger: QueryLedger | None = None,
) -> SolveResult:
    """QSVT step-polynomial solver under coherent depth ``depth``."""
    ledger = ledger if ledger is not None else new_ledger(depth)
    rng = np.random.default_rng(seed)
    n = inst.input.size
    if inst.k >= n:
        return SolveResult(0, ledger)
    complemented, k = _oriented(inst)
    plan = plan_interpolation(n, k, depth, failure, cost_multiplier)
    if plan is None:
        weight, ledger = classical_count(inst.input, ledger)
        return SolveResult(int(weight > inst.k), ledger, True)
    be = apply_qsvt(_encoding(inst, complemented), plan.poly, cost_multiplier)
    ones, ledger = sample_flag(be, zero_state(be), plan.shots, ledger, rng)
    answer = int(ones >= plan.cutoff)
    return SolveResult(1 - answer if complemented else answer, ledger)


# -------------------------------------------------------- amplitude estimation


def ae_outcome_distribution(a, m: int) -> np.ndarray:
    """Outcome probabilities of amplitude estimation with ``m`` Grover steps.

    Row i holds P(y) for y = 0..m-1 given amplitude a[i]: the two eigenphases
    +-theta/pi of the Grover iterate each contribute half a Fejer kernel.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    theta = np.arcsin(np.sqrt(np.clip(a, 0, 1)))
    phase = m * theta / np.pi
    y = np.arange(m)

    def fejer(d):
        num = np.sin(np.pi * d) ** 2
        den = (m * np.sin(np.pi * d / m)) ** 2
        near = np.abs(np.sin(np.pi * d / m)) < 1e-12
        return np.where(near, 1.0, num / np.where(near, 1.0, den))

    probs = 0.5 * (fejer(y[None, :] - phase[:, None]) + fejer(y[None, :] + phase[:, None]))
    return probs / probs.sum(axis=1, keepdims=True)


def ae_estimates(m: int) -> np.ndarray:
    return np.sin(np.pi * np.arange(m) / m) ** 2


@lru_cache(maxsize=4096)
def _ae_table(a: float, m: int) -> np.ndarray:
    return ae_outcome_distribution(a, m)[0]


def amplitude_estimate(a: float, m: int, rng=None, size: int | None = None):
    """Amplitude-estimation runs: sample y, return sin^2(pi y / m).

    a = 0 gives 0 with certainty; a = 1 gives 1 with certainty when m is even.
    With ``size`` set, an array of independent runs is returned.
    """
    if m < 1:
        raise ValueError("need at least one Grover step")
    y = np.random.default_rng(rng).choice(m, p=_ae_table(float(a), int(m)), size=size)
    est = np.sin(np.pi * y / m) ** 2
    return est if size is not None else float(est)


def brassard_bound(a: float, m: int) -> float:
    return 2 * np.pi * np.sqrt(a * (1 - a)) / m + np.pi**2 / m**2


# ------------------------------------------------------------- parallelization


@dataclass(frozen=True)
class PartitionPlan:
    bins: tuple[tuple[int, ...], ...]
    seed: int | None = None

    @classmethod
    def random(cls, n: int, num_bins: int, seed=None) -> PartitionPlan:
        if n % num_bins:
            raise InvalidInput(f"{num_bins} bins do not divide {n}")
        perm = np.random.default_rng(seed).permutation(n)
        size = n // num_bins
        return cls(tuple(tuple(int(i) for i in perm[j * size : (j + 1) * size]) for j in range(num_bins)), seed)

    def loads(self, bits) -> list[int]:
        return [sum(bits[i] for i in b) for b in self.bins]


@dataclass(frozen=True)
class ParallelPlan:
    """Bin size, Grover steps per circuit, repetitions per bin, load cap."""

    bin_size: int
    grover_steps: int
    repetitions: int
    load_cap: int
    num_bins: int

    @property
    def total_queries(self) -> int:
        return self.num_bins * self.repetitions * self.grover_steps

    @property
    def regime(self) -> str:
        p = self.num_bins
        return "log" if self.load_cap <= max(1.0, np.log2(p)) else "linear"


def _median_value_distribution(values: np.ndarray, probs: np.ndarray, r: int):
    """Distribution of the median of r iid draws over sorted support ``values``."""
    cdf = np.cumsum(probs, axis=-1)
    below = binom.sf((r - 1) // 2, r, np.clip(cdf, 0, 1))  # P(median <= values[j])
    return np.diff(below, prepend=0.0, axis=-1)


def _report(values: np.ndarray, load_cap: int) -> np.ndarray:
    """Rounded estimate inside the exact-recovery range, raw estimate above it."""
    return np.where(values <= load_cap + 0.5, np.round(values), values)


def _bin_failures(b: int, m: int, r: int, load_cap: int, k: int) -> tuple[float, float]:
    """Worst per-bin failure: (inexact for loads <= cap, underestimate for loads > cap).

    An underestimate is a reported value below rho * w with
    rho = (k + 1/2)/(k + 1); if every heavy bin clears that and every light
    bin is exact, the sum exceeds k whenever |x| > k.
    """
    loads = np.arange(b + 1)
    single = ae_outcome_distribution(loads / b, m)
    raw = b * ae_estimates(m)
    values, inverse = np.unique(np.round(raw, 12), return_inverse=True)
    probs = np.zeros((b + 1, len(values)))
    np.add.at(probs, (slice(None), inverse), single)
    med = _median_value_distribution(values, probs, r)
    reported = _report(values, load_cap)
    light = loads <= load_cap
    exact = np.array([med[w, reported == w].sum() for w in loads[light]])
    inexact = float(np.max(1 - exact))
    rho = (k + 0.5) / (k + 1)
    heavy = [med[w, reported < rho * w].sum() for w in loads[~light]]
    under = float(max(heavy, default=0.0))
    return inexact, under


def _load_cap(n: int, k: int, b: int, budget: float) -> int:
    """Smallest L with P(some bin holds more than L of k ones) <= budget (union bound)."""
    p = n // b
    for cap in range(0, min(b, k) + 1):
        if p * hypergeom.sf(cap, n, k, b) <= budget:
            return cap
    return min(b, k)


@lru_cache(maxsize=1024)
def plan_parallel(
    n: int, k: int, depth: int, failure: float = DEFAULT_FAILURE, max_repetitions: int = 99
) -> ParallelPlan | None:
    """Cheapest (bin size, Grover steps, repetitions) meeting the failure budget.

    Half the budget covers the balls-into-bins event that some bin exceeds the
    load cap when |x| <= k; the other half is split across bins for the
    amplitude-estimation failures.  Grover step counts are even so that a
    full bin is recognized with certainty.
    """
    best: ParallelPlan | None = None
    b = 1
    while b <= n:
        p = n // b
        cap = _load_cap(n, k, b, failure / 2)
        per_bin = failure / (2 * p)
        for m in range(2, depth + 1, 2):
            if best is not None and p * m >= best.total_queries:
                break
            for r in range(1, max_repetitions + 1, 2):
                if best is not None and p * m * r >= best.total_queries:
                    break
                inexact, under = _bin_failures(b, m, r, cap, k)
                if inexact <= per_bin and under <= per_bin:
                    best = ParallelPlan(b, m, r, cap, p)
                    break
        b *= 2
    return best


def solve_threshold_parallel(
    inst: ThresholdInstance,
    depth: int,
    seed=None,
    *,
    failure: float = DEFAULT_FAILURE,
    ledger: QueryLedger | None = None,
) -> SolveResult:
    """Random partition + per-bin amplitude estimation + classical sum."""
    ledger = ledger if ledger is not None else new_ledger(depth)
    n = inst.input.size
    if inst.k >= n:
        return SolveResult(0, ledger)
    complemented, k = _oriented(inst)
    plan = plan_parallel(n, k, depth, failure)
    if plan is None:
        weight, ledger = classical_count(inst.input, ledger)
        return SolveResult(int(weight > inst.k), ledger, True)
    seeds = seed_sequence(seed).spawn(2)
    partition = PartitionPlan.random(n, plan.num_bins, seeds[0])
    rng = np.random.default_rng(seeds[1])
    bits = inst.input.negated().bits if complemented else inst.input.bits
    total = 0.0
    for members in partition.bins:
        amp = _bin_amplitude(tuple(bits[i] for i in members))
        runs = amplitude_estimate(amp, plan.grover_steps, rng, size=plan.repetitions)
        ledger = ledger.record(plan.grover_steps, plan.repetitions)
        value = plan.bin_size * float(np.median(runs))
        total += round(value) if value <= plan.load_cap + 0.5 else value
    answer = int(total > k + 1e-9)
    return SolveResult(1 - answer if complemented else answer, ledger)


def solve_threshold(
    inst: ThresholdInstance, depth: int, strategy: str = "interpolate", seed=None, **kwargs
) -> SolveResult:
    if strategy == "interpolate":
        return solve_threshold_interpolated(inst, depth, seed, **kwargs)
    if strategy == "parallel":
        kwargs.pop("cost_multiplier", None)
        return solve_threshold_parallel(inst, depth, seed, **kwargs)
    raise ValueError(f"unknown strategy {strategy!r}")
