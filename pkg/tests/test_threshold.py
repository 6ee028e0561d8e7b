import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import linregress

from hybridcut import OracleInput, ThresholdInstance, solve_threshold_interpolated, solve_threshold_parallel
from hybridcut.errors import InvalidInput
from hybridcut.threshold import (
    PartitionPlan,
    ae_outcome_distribution,
    amplitude_estimate,
    brassard_bound,
    interpolated_answer_probability,
    plan_interpolation,
    plan_parallel,
)

SOLVERS = [solve_threshold_interpolated, solve_threshold_parallel]


def _inst(bits, k):
    return ThresholdInstance(OracleInput(tuple(bits)), k)


@pytest.mark.parametrize("solve", SOLVERS)
@pytest.mark.parametrize("k", [0, 3, 7, 8])
def test_all_zeros_is_below(solve, k):
    res = solve(_inst([0] * 8, k), 8, 1)
    assert res.answer == 0
    assert res.ledger.max_coherent <= 8


@pytest.mark.parametrize("solve", SOLVERS)
@pytest.mark.parametrize("k", [0, 3, 7])
def test_all_ones_is_above(solve, k):
    assert solve(_inst([1] * 8, k), 8, 2).answer == 1


def test_k_out_of_range():
    with pytest.raises(InvalidInput):
        _inst([0] * 4, 5)


def test_interpolated_exact_success_exhaustive_n8():
    for bits in itertools.product((0, 1), repeat=8):
        for k in range(9):
            inst = _inst(bits, k)
            p1 = interpolated_answer_probability(inst, 8)
            success = p1 if inst.truth else 1 - p1
            assert success >= 2 / 3, (bits, k, success)


@pytest.mark.parametrize("n", [4, 8, 16])
def test_complement_identity_exact(n):
    rng = np.random.default_rng(n)
    inputs = itertools.product((0, 1), repeat=n) if n <= 8 else (rng.integers(0, 2, n) for _ in range(300))
    for bits in inputs:
        bits = tuple(int(b) for b in bits)
        negated = tuple(1 - b for b in bits)
        for k in range(n // 2 + 1, n):
            direct = interpolated_answer_probability(_inst(bits, k), 8)
            mirrored = interpolated_answer_probability(_inst(negated, n - k - 1), 8)
            assert direct == pytest.approx(1 - mirrored, abs=1e-12)


@given(st.lists(st.integers(0, 1), min_size=16, max_size=16), st.integers(9, 15), st.integers(0, 2**32))
def test_complement_identity_same_seed(bits, k, seed):
    negated = [1 - b for b in bits]
    for solve in SOLVERS:
        a = solve(_inst(bits, k), 8, seed)
        b = solve(_inst(negated, 16 - k - 1), 8, seed)
        assert a.answer == 1 - b.answer
        assert a.ledger.total == b.ledger.total


@given(
    st.sampled_from([4, 8, 16]).flatmap(
        lambda n: st.tuples(st.lists(st.integers(0, 1), min_size=n, max_size=n), st.integers(0, n))
    ),
    st.integers(1, 64),
    st.integers(0, 2**32),
)
def test_solvers_respect_depth(case, depth, seed):
    bits, k = case
    for solve in SOLVERS:
        res = solve(_inst(bits, k), depth, seed)
        assert res.answer in (0, 1)
        assert res.ledger.max_coherent <= depth
        if res.fallback:
            assert res.answer == int(sum(bits) > k)


def _phase_estimation_oracle(a, m):
    """Outcome distribution by direct summation over the two Grover eigenphases."""
    theta = np.arcsin(np.sqrt(a))
    probs = np.zeros(m)
    for phi in (theta / np.pi, -theta / np.pi):
        for y in range(m):
            amp = sum(np.exp(2j * np.pi * j * (phi - y / m)) for j in range(m)) / m
            probs[y] += abs(amp) ** 2 / 2
    return probs


@pytest.mark.parametrize("m", [2, 4, 8, 16])
@pytest.mark.parametrize("a", [0.0, 0.1, 0.3, 0.5, 0.77, 1.0])
def test_ae_distribution_matches_direct_summation(a, m):
    assert np.allclose(ae_outcome_distribution(a, m)[0], _phase_estimation_oracle(a, m), atol=1e-12)


def test_ae_extremes_are_deterministic():
    assert np.all(amplitude_estimate(0.0, 8, 1, size=200) == 0)
    assert np.allclose(amplitude_estimate(1.0, 8, 1, size=200), 1)


def test_ae_concentration():
    draws = amplitude_estimate(0.3, 64, 11, size=10_000)
    assert np.mean(np.abs(draws - 0.3) <= brassard_bound(0.3, 64)) >= 0.81


def test_parallel_zero_input():
    res = solve_threshold_parallel(_inst([0] * 16, 2), 8, 3)
    assert res.answer == 0 and not res.fallback


@pytest.mark.parametrize("k", [1, 2, 4, 8])
def test_parallel_success_per_weight_class(k):
    rng = np.random.default_rng(k)
    for weight in range(17):
        wins = 0
        for t in range(99):
            inp = OracleInput.from_weight(16, weight, rng)
            res = solve_threshold_parallel(ThresholdInstance(inp, k), 8, [k, weight, t])
            wins += res.answer == int(weight > k)
            assert res.ledger.max_coherent <= 8
        assert wins >= 66, (k, weight, wins)


def test_max_bin_load_concentrates():
    rng = np.random.default_rng(5)
    maxima = []
    for _ in range(1000):
        bits = OracleInput.from_weight(256, 64, rng).bits
        maxima.append(max(PartitionPlan.random(256, 16, rng).loads(bits)))
    c = np.quantile(maxima, 2 / 3) / (64 / 16)
    assert c <= 3
    assert np.mean(np.array(maxima) <= c * 64 / 16) >= 2 / 3


def test_partition_is_a_partition():
    plan = PartitionPlan.random(64, 8, 0)
    assert sorted(i for b in plan.bins for i in b) == list(range(64))
    with pytest.raises(InvalidInput):
        PartitionPlan.random(64, 7, 0)


def test_interpolation_depth_law():
    depths = np.array([4, 8, 16, 32])
    inp = OracleInput.from_weight(256, 5, 0)
    totals = [solve_threshold_interpolated(ThresholdInstance(inp, 4), d, 1).ledger.total for d in depths]
    assert -1.3 <= linregress(np.log(depths), np.log(totals)).slope <= -0.7


@pytest.mark.parametrize("k", [4, 8])
def test_parallel_beats_interpolation_at_small_depth(k):
    assert plan_parallel(256, k, 8).total_queries <= plan_interpolation(256, k, 8).total_queries


def test_cost_multiplier_rescales_depth():
    base = plan_interpolation(64, 4, 16)
    doubled = plan_interpolation(64, 4, 32, cost_multiplier=2)
    assert doubled.poly.degree == base.poly.degree
    assert doubled.total_queries == 2 * base.total_queries
    assert doubled.depth <= 32
