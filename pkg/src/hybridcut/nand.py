"""Balanced NAND formulas evaluated through the spectrum of a weighted tree graph.

Node layout (heap order): root is 1, node v has children 2v and 2v+1, and the
N leaves are N..2N-1.  Two tail nodes hang off the root: r' (index 2N) and
r'' (index 2N+1).  Matrix row v-1 holds node v, so r' and r'' are the last
two rows.

If the formula evaluates to 0 the graph has a zero-energy eigenstate with
large weight on r''; if it evaluates to 1 every eigenstate touching r'' has
energy bounded away from zero.  A window polynomial around zero applied to
the block-encoded H/3 tells the two cases apart.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.stats import binom

from .errors import DegreeOverflow, InvalidInput, InvalidSize
from .ledger import QueryLedger, new_ledger
from .polynomials import (
    DEGREE_CAP,
    BoundedPolynomial,
    StepSpec,
    cheb_grid,
    gap_filter_poly,
    gap_filter_ratio,
    window_poly,
)
from .qsvt import apply_qsvt, flag_probability, nand_block_encoding, sample_flag
from .stats import bernoulli_test, seed_sequence
from .threshold import SolveResult

MAX_DEPTH = 10
DEFAULT_FAILURE = 0.1
SUPPORT_TOL = 1e-9


@dataclass(frozen=True)
class NandTree:
    depth: int
    leaf_order: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 1 <= self.depth <= MAX_DEPTH:
            raise InvalidSize(f"depth must lie in [1, {MAX_DEPTH}], got {self.depth}")
        order = tuple(range(self.n)) if self.leaf_order is None else tuple(int(i) for i in self.leaf_order)
        if len(order) != self.n or any(not 0 <= i < self.n for i in order):
            raise InvalidInput("leaf_order must map each of the N leaves to an input index")
        object.__setattr__(self, "leaf_order", order)

    @property
    def n(self) -> int:
        return 2**self.depth

    @property
    def root_prime(self) -> int:
        return 2 * self.n

    @property
    def root_double_prime(self) -> int:
        return 2 * self.n + 1

    @property
    def num_nodes(self) -> int:
        return 2 * self.n + 1

    @property
    def leaves(self) -> range:
        return range(self.n, 2 * self.n)

    @property
    def internal(self) -> range:
        return range(1, self.n)

    @cached_property
    def subtree_sizes(self) -> dict[int, int]:
        """s_v: number of leaves below v (the root tail node r' counts N)."""
        sizes = {v: self.n >> (v.bit_length() - 1) for v in range(1, 2 * self.n)}
        sizes[self.root_prime] = self.n
        return sizes

    def to_json(self) -> str:
        return json.dumps({"depth": self.depth, "leaf_order": list(self.leaf_order)})

    @classmethod
    def from_json(cls, text: str) -> NandTree:
        obj = json.loads(text)
        return cls(int(obj["depth"]), tuple(obj.get("leaf_order") or ()) or None)

    @classmethod
    def load(cls, path: str | Path) -> NandTree:
        return cls.from_json(Path(path).read_text())


def build_balanced_tree(d: int) -> NandTree:
    return NandTree(d)


def _leaf_bits(tree: NandTree, x) -> list[int]:
    x = [int(b) for b in x]
    if len(x) != tree.n:
        raise InvalidInput(f"expected {tree.n} input bits, got {len(x)}")
    if any(b not in (0, 1) for b in x):
        raise InvalidInput("input bits must be 0 or 1")
    return [x[i] for i in tree.leaf_order]


def node_values(tree: NandTree, x) -> list[int]:
    """Value of every heap node (index 0 unused)."""
    vals = [0] * (2 * tree.n)
    vals[tree.n :] = _leaf_bits(tree, x)
    for v in range(tree.n - 1, 0, -1):
        vals[v] = 1 - (vals[2 * v] & vals[2 * v + 1])
    return vals


def evaluate_classical(tree: NandTree, x) -> int:
    return node_values(tree, x)[1]


def adjacency_matrix(tree: NandTree, x) -> np.ndarray:
    """Weighted adjacency H: parent-child weight (s_v/s_p)^(1/4), leaf edges cut where x = 1."""
    bits = _leaf_bits(tree, x)
    n = tree.n
    s = tree.subtree_sizes
    H = np.zeros((tree.num_nodes, tree.num_nodes))
    for v in range(2, 2 * n):
        if v >= n and bits[v - n]:
            continue
        p = v // 2
        H[v - 1, p - 1] = H[p - 1, v - 1] = (s[v] / s[p]) ** 0.25
    rp, rpp = tree.root_prime - 1, tree.root_double_prime - 1
    H[0, rp] = H[rp, 0] = (s[1] / s[tree.root_prime]) ** 0.25
    H[rp, rpp] = H[rpp, rp] = 1 / (math.sqrt(2) * n**0.25)
    return H


def ambainis_gap(n: int) -> float:
    """Lower bound on |lambda| for eigenstates touching r'' when the formula is 1."""
    return 1 / (18 * math.sqrt(2 * n))


class SpectralCertificate(NamedTuple):
    phi_value: int
    zero_overlap: float | None = None
    min_supported_eigenvalue: float | None = None

    def holds(self, n: int) -> bool:
        if self.phi_value == 0:
            return self.zero_overlap >= 1 / math.sqrt(2) - 1e-9
        return self.min_supported_eigenvalue >= ambainis_gap(n)


def spectral_certificate(H: np.ndarray, phi: int) -> SpectralCertificate:
    """Measure the quantity each Ambainis property bounds.

    Eigenvalues are grouped into clusters (gap > 1e-9) so that degenerate
    eigenspaces are judged by the projection of r'' onto the whole space,
    independent of the basis the eigensolver picks.
    """
    lam, vec = np.linalg.eigh(H)
    target = vec[-1, :]  # <v_i|r''>
    if phi == 0:
        zero = np.abs(lam) < SUPPORT_TOL
        return SpectralCertificate(0, zero_overlap=float(np.sqrt(np.sum(target[zero] ** 2))))
    best = math.inf
    start = 0
    for i in range(1, len(lam) + 1):
        if i == len(lam) or lam[i] - lam[i - 1] > SUPPORT_TOL:
            weight = float(np.sqrt(np.sum(target[start:i] ** 2)))
            if weight > SUPPORT_TOL:
                best = min(best, float(np.min(np.abs(lam[start:i]))))
            start = i
    return SpectralCertificate(1, min_supported_eigenvalue=best)


def start_state(tree: NandTree) -> np.ndarray:
    """|0>_ancilla |r''>; preparing it needs no oracle queries."""
    e = np.zeros(2 * tree.num_nodes)
    e[tree.root_double_prime - 1] = 1.0
    return e


# ---------------------------------------------------------------- interpolation


@dataclass(frozen=True, eq=False)
class NandPlan:
    """Window polynomial and decision rule for one tree size and depth budget.

    The flag probability from |r''> is sum_i W(|lambda_i|/3)^2 |<v_i|r''>|^2:
    at least ``yes_floor`` = W(0)^2/2 when the formula is 0 and at most
    ``no_ceiling`` = max W^2 beyond the gap when it is 1.
    """

    gap: float
    eta: float
    poly: BoundedPolynomial
    yes_floor: float
    no_ceiling: float
    shots: int
    cutoff: int
    failure: float

    @property
    def depth(self) -> int:
        return max(1, self.poly.degree)

    @property
    def total_queries(self) -> int:
        return self.depth * self.shots


def _window_for(gap: float, eta: float, cap: int) -> BoundedPolynomial:
    # pass band [-gap/2, gap/2], stop band from the gap outward
    return window_poly(StepSpec(gap / 4, eta, 3 * gap / 4), cap=cap)


def _bounds(poly: BoundedPolynomial, gap: float) -> tuple[float, float]:
    outside = cheb_grid(gap, 1.0)
    return float(poly(0.0)) ** 2 / 2, float(np.max(poly(outside) ** 2))


def _window_fitting(gap: float, eta: float, depth: int) -> BoundedPolynomial | None:
    try:
        p = _window_for(gap, eta, depth)
    except DegreeOverflow:
        return None
    return p if p.degree <= depth else None


def _candidates(gap: float, depth: int):
    """(leakage, W, W(0)^2/2, max stop-band W^2) for polynomials of degree <= depth.

    The erf window at leakage 1/8 is the full-depth construction.  The even
    Chebyshev gap filters are degree-optimal for the ratio W(0)/stop-band
    max, which is all the decision needs, so they remain usable at depths
    where no erf window separates the two cases.
    """
    window = _window_fitting(gap, 1 / 8, min(depth, DEGREE_CAP))
    if window is not None:
        yield (1 / 8, window, *_bounds(window, gap))
    degree = 2 * (min(depth, DEGREE_CAP) // 2)
    seen = set()
    while degree >= 2:
        if degree not in seen:
            seen.add(degree)
            poly = gap_filter_poly(gap, degree)
            leak = 1 / gap_filter_ratio(gap, degree)
            yield leak, poly, float(poly(0.0)) ** 2 / 2, leak**2 * (1 + 1e-9)
        degree = 2 * int(degree / 2 / 2**0.25)


@lru_cache(maxsize=256)
def plan_nand_interpolation(n: int, depth: int, failure: float = DEFAULT_FAILURE) -> NandPlan | None:
    """Cheapest separating polynomial of degree <= ``depth``, or None.

    When W(0)^2/2 does not exceed the worst stop-band value no number of
    shots can decide, and that candidate is dropped.
    """
    gap = ambainis_gap(n) / 3
    best = None
    for eta, poly, yes_floor, no_ceiling in _candidates(gap, depth):
        test = bernoulli_test(no_ceiling, yes_floor, failure)
        if test is None:
            continue
        plan = NandPlan(gap, eta, poly, yes_floor, no_ceiling, test.shots, test.cutoff, failure)
        if best is None or plan.total_queries < best.total_queries:
            best = plan
    return best


@lru_cache(maxsize=4096)
def _transformed(tree: NandTree, bits: tuple[int, ...], poly: BoundedPolynomial, cost_multiplier: int = 1):
    """P applied to the encoding of H; repeated trials on one input share it."""
    return apply_qsvt(nand_block_encoding(adjacency_matrix(tree, bits)), poly, cost_multiplier)


def nand_flag_probability(tree: NandTree, x, poly: BoundedPolynomial) -> float:
    be = _transformed(tree, tuple(int(b) for b in x), poly)
    return flag_probability(be, start_state(tree))


def nand_answer_probability(tree: NandTree, x, depth: int, failure: float = DEFAULT_FAILURE) -> float:
    """Exact probability that the interpolated solver outputs 1."""
    plan = plan_nand_interpolation(tree.n, depth, failure)
    if plan is None:
        return float(evaluate_classical(tree, x))
    q = nand_flag_probability(tree, x, plan.poly)
    return float(binom.cdf(plan.cutoff - 1, plan.shots, q))


def _read_all(tree: NandTree, x, ledger: QueryLedger) -> tuple[int, QueryLedger]:
    return evaluate_classical(tree, x), ledger.record(1, tree.n)


def solve_nand_interpolated(
    tree: NandTree,
    x,
    depth: int,
    ledger: QueryLedger | None = None,
    seed=None,
    *,
    failure: float = DEFAULT_FAILURE,
    cost_multiplier: int = 1,
) -> SolveResult:
    """Window-polynomial test on |r''>: many "yes" flags means the formula is 0.

    ``cost_multiplier`` charges that many queries per polynomial degree.
    """
    ledger = ledger if ledger is not None else new_ledger(depth)
    _leaf_bits(tree, x)
    limit = min(depth, ledger.depth_limit) // cost_multiplier
    plan = plan_nand_interpolation(tree.n, limit, failure) if limit >= 1 else None
    if plan is None:
        answer, ledger = _read_all(tree, x, ledger)
        return SolveResult(answer, ledger, True)
    be = _transformed(tree, tuple(int(b) for b in x), plan.poly, cost_multiplier)
    ones, ledger = sample_flag(be, start_state(tree), plan.shots, ledger, np.random.default_rng(seed))
    return SolveResult(0 if ones >= plan.cutoff else 1, ledger)


# ---------------------------------------------------------------- parallelization


class ParallelNandPlan(NamedTuple):
    subtree_depth: int
    repetitions: int
    inner: NandPlan

    @property
    def subtree_size(self) -> int:
        return 2**self.subtree_depth

    def total_queries(self, n: int) -> int:
        return n // self.subtree_size * self.repetitions * self.inner.total_queries


def majority_repetitions(per_run: float, target: float, limit: int = 999) -> int | None:
    """Smallest odd r with P(majority of r runs wrong) <= target."""
    for r in range(1, limit + 1, 2):
        if binom.sf(r // 2, r, per_run) <= target:
            return r
    return None


@lru_cache(maxsize=256)
def plan_nand_parallel(n: int, depth: int, failure: float = 1 / 3) -> ParallelNandPlan | None:
    """Cheapest proper subtree size whose interpolated test fits the depth.

    Each of the N/b subtrees is decided by a majority vote whose failure is
    at most failure * b / N, so the union over subtrees stays within budget.
    """
    best, best_cost = None, math.inf
    for sd in range(1, n.bit_length() - 1):
        b = 2**sd
        inner = plan_nand_interpolation(b, depth)
        if inner is None:
            continue
        reps = majority_repetitions(inner.failure, failure * b / n)
        if reps is None:
            continue
        plan = ParallelNandPlan(sd, reps, inner)
        if plan.total_queries(n) < best_cost:
            best, best_cost = plan, plan.total_queries(n)
    return best


def _subtree(tree: NandTree, root: int, sd: int) -> tuple[NandTree, list[int]]:
    """Subtree of depth ``sd`` at heap node ``root`` and the input indices it reads."""
    first = root << sd
    leaves = [tree.leaf_order[v - tree.n] for v in range(first, first + 2**sd)]
    return NandTree(sd), leaves


def solve_nand_parallel(
    tree: NandTree,
    x,
    depth: int,
    ledger: QueryLedger | None = None,
    seed=None,
    *,
    failure: float = 1 / 3,
) -> SolveResult:
    """Decide every subtree at one level coherently, then finish the top classically."""
    ledger = ledger if ledger is not None else new_ledger(depth)
    bits = [int(b) for b in x]
    _leaf_bits(tree, bits)
    limit = min(depth, ledger.depth_limit)
    if plan_nand_interpolation(tree.n, limit) is not None:
        return solve_nand_interpolated(tree, bits, depth, ledger, seed)
    plan = plan_nand_parallel(tree.n, limit, failure)
    if plan is None:
        answer, ledger = _read_all(tree, bits, ledger)
        return SolveResult(answer, ledger, True)
    sd = plan.subtree_depth
    roots = range(tree.n >> sd, 2 * tree.n >> sd)
    seeds = seed_sequence(seed).spawn(len(roots))
    values: dict[int, int] = {}
    subledgers = []
    for root, sub_seed in zip(roots, seeds):
        sub, idx = _subtree(tree, root, sd)
        sub_x = [bits[i] for i in idx]
        votes = 0
        sub_ledger = new_ledger(ledger.depth_limit)
        for run_seed in sub_seed.spawn(plan.repetitions):
            res = solve_nand_interpolated(sub, sub_x, depth, sub_ledger, run_seed)
            votes += res.answer
            sub_ledger = res.ledger
        values[root] = int(2 * votes > plan.repetitions)
        subledgers.append(sub_ledger)
    ledger = ledger.merge(subledgers)
    # upper tree: classical post-processing of already-measured values
    for v in range((tree.n >> sd) - 1, 0, -1):
        values[v] = 1 - (values[2 * v] & values[2 * v + 1])
    return SolveResult(values[1], ledger)
