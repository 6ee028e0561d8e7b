"""Sweeps over (problem, N, k, D, strategy, trial), CSV/JSON output and fits."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from itertools import product
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import stats

from .errors import DepthExceeded, InsufficientData, InvalidInput, Singular
from .nand import NandTree, evaluate_classical, solve_nand_interpolated, solve_nand_parallel
from .qsvt import OracleInput
from .symmetric import SymmetricFunction, solve_symmetric
from .threshold import ThresholdInstance, solve_threshold

PROBLEMS = ("threshold", "symmetric", "nand")
STRATEGIES = ("interpolate", "parallel")
CSV_HEADER = (
    "problem,n,k,depth_limit,strategy,trial,answer,truth,correct,"
    "total_queries,max_coherent,circuits,seed,fallback"
)


class InvariantViolation(RuntimeError):
    """A solver broke the depth contract; this is a bug, not a data point."""


@dataclass(frozen=True)
class SweepConfig:
    problem: str
    sizes: tuple[int, ...]
    depths: tuple[int, ...]
    ks: tuple[int, ...] = (0,)
    strategies: tuple[str, ...] = ("interpolate",)
    trials: int = 1
    seed: int = 0
    out: str | None = None
    cost_multiplier: int = 1
    function: str = "majority"  # symmetric: parity | majority | path to a JSON table
    alpha: float = 0.0
    weights: tuple[int, ...] | None = None  # threshold: fixed input weights, cycled over trials

    def __post_init__(self):
        for name in ("sizes", "depths", "ks", "strategies"):
            value = tuple(getattr(self, name))
            if not value:
                raise InvalidInput(f"{name} must be nonempty")
            object.__setattr__(self, name, value)
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(self.weights))
        if self.problem not in PROBLEMS:
            raise InvalidInput(f"unknown problem {self.problem!r}")
        if bad := set(self.strategies) - set(STRATEGIES):
            raise InvalidInput(f"unknown strategies {sorted(bad)}")
        if self.problem == "symmetric" and set(self.strategies) != {"interpolate"}:
            raise InvalidInput("symmetric functions only support the interpolate strategy")
        if self.trials < 1:
            raise InvalidInput("trials must be at least 1")
        if self.cost_multiplier < 1:
            raise InvalidInput("cost multiplier must be at least 1")

    @classmethod
    def from_json(cls, text: str) -> SweepConfig:
        obj = json.loads(text)
        known = {f.name for f in fields(cls)}
        if unknown := set(obj) - known:
            raise InvalidInput(f"unknown config keys {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def load(cls, path: str | Path) -> SweepConfig:
        return cls.from_json(Path(path).read_text())

    def cells(self) -> list[tuple[int, int, int, str]]:
        """(n, k, depth, strategy) in a fixed order; k is ignored outside threshold."""
        ks = self.ks if self.problem == "threshold" else (0,)
        return list(product(self.sizes, ks, self.depths, self.strategies))


@dataclass(frozen=True)
class ExperimentRecord:
    problem: str
    n: int
    k: int | None
    depth_limit: int
    strategy: str
    trial: int
    answer: int
    truth: int
    correct: bool
    total_queries: int
    max_coherent: int
    circuits: int
    seed: int
    fallback: bool

    def __post_init__(self):
        if self.max_coherent > self.depth_limit:
            raise InvariantViolation(
                f"record has max_coherent {self.max_coherent} > depth limit {self.depth_limit}"
            )

    def row(self) -> list:
        d = asdict(self)
        d["k"] = "" if self.k is None else self.k
        d["correct"] = int(self.correct)
        d["fallback"] = int(self.fallback)
        return [d[name] for name in CSV_HEADER.split(",")]


def trial_seed(base: int, cell: int, trial: int) -> int:
    """Order-independent 63-bit seed from (base seed, cell index, trial index)."""
    state = np.random.SeedSequence([base & 0xFFFFFFFF, base >> 32, cell, trial]).generate_state(2, np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


def _symmetric_function(spec: str, n: int) -> SymmetricFunction:
    if spec == "parity":
        return SymmetricFunction.parity(n)
    if spec == "majority":
        return SymmetricFunction.majority(n)
    f = SymmetricFunction.load(spec)
    if f.n != n:
        raise InvalidInput(f"table in {spec} has N={f.n}, sweep asks for N={n}")
    return f


def _threshold_input(cfg: SweepConfig, n: int, k: int, trial: int, rng) -> OracleInput:
    # default: alternate the two weights next to the threshold, at random positions
    weights = cfg.weights or (min(k, n), min(k + 1, n))
    return OracleInput.from_weight(n, weights[trial % len(weights)], rng)


def run_trial(cfg: SweepConfig, cell: int, trial: int) -> ExperimentRecord:
    n, k, depth, strategy = cfg.cells()[cell]
    seed = trial_seed(cfg.seed, cell, trial)
    input_rng = np.random.default_rng([seed, 1])
    try:
        if cfg.problem == "threshold":
            inst = ThresholdInstance(_threshold_input(cfg, n, k, trial, input_rng), k)
            extra = {"cost_multiplier": cfg.cost_multiplier} if strategy == "interpolate" else {}
            res = solve_threshold(inst, depth, strategy, seed, **extra)
            truth, k_out = inst.truth, k
        elif cfg.problem == "symmetric":
            f = _symmetric_function(cfg.function, n)
            inp = OracleInput(tuple(input_rng.integers(0, 2, n)))
            res = solve_symmetric(f, inp, depth, None, seed, alpha=cfg.alpha)
            truth, k_out = f.evaluate(inp.bits), None
        else:
            if n < 2 or n & (n - 1):
                raise InvalidInput(f"NAND trees need N a power of two >= 2, got {n}")
            tree = NandTree(n.bit_length() - 1)
            x = tuple(int(b) for b in input_rng.integers(0, 2, n))
            solver = solve_nand_interpolated if strategy == "interpolate" else solve_nand_parallel
            kwargs = {"cost_multiplier": cfg.cost_multiplier} if strategy == "interpolate" else {}
            res = solver(tree, x, depth, None, seed, **kwargs)
            truth, k_out = evaluate_classical(tree, x), None
    except DepthExceeded as exc:
        raise InvariantViolation(f"cell {cell} trial {trial}: {exc}") from exc
    s = res.ledger.summary()
    return ExperimentRecord(
        cfg.problem, n, k_out, depth, strategy, trial, int(res.answer), int(truth),
        int(res.answer) == int(truth), s.total, s.max_coherent, s.circuits, seed, bool(res.fallback),
    )


def _run_cell(args) -> list[ExperimentRecord]:
    cfg, cell = args
    return [run_trial(cfg, cell, t) for t in range(cfg.trials)]


def run_sweep(cfg: SweepConfig, workers: int = 1) -> list[ExperimentRecord]:
    """One record per (cell, trial), sorted by (cell, trial) whatever ``workers`` is."""
    if cfg.out:
        open(cfg.out, "a").close()  # fail on an unwritable path before doing any work
    jobs = [(cfg, c) for c in range(len(cfg.cells()))]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_run_cell, jobs))
    else:
        chunks = [_run_cell(job) for job in jobs]
    records = [r for chunk in chunks for r in chunk]
    if cfg.out:
        write_records(records, cfg.out)
    return records


# ---------------------------------------------------------------- output


def records_to_csv(records: Iterable[ExperimentRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for r in records:
        writer.writerow(r.row())
    return buf.getvalue()


def records_to_json(records: Iterable[ExperimentRecord]) -> str:
    return json.dumps([asdict(r) for r in records], indent=1) + "\n"


def write_records(records: Sequence[ExperimentRecord], path: str | Path, fmt: str = "csv") -> None:
    text = records_to_json(records) if fmt == "json" else records_to_csv(records)
    Path(path).write_text(text)


def read_records(path: str | Path) -> list[dict]:
    """Rows of a CSV written by :func:`records_to_csv`, numeric fields converted."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    ints = ("n", "depth_limit", "trial", "answer", "truth", "total_queries", "max_coherent", "circuits", "seed")
    for row in rows:
        for name in ints:
            row[name] = int(row[name])
        row["k"] = int(row["k"]) if row["k"] else None
        row["correct"] = row["correct"] == "1"
        row["fallback"] = row["fallback"] == "1"
    return rows


# ---------------------------------------------------------------- analysis


class ScalingFit(NamedTuple):
    slope: float
    intercept: float
    r2: float


def _get(record, name):
    return record[name] if isinstance(record, dict) else getattr(record, name)


def fit_scaling_exponent(
    records, x_field: str = "depth_limit", y_field: str = "total_queries"
) -> ScalingFit:
    """OLS of log(median y) on log x; fallback records are left out."""
    groups: dict[float, list[float]] = {}
    for r in records:
        if _has(r, "fallback") and _get(r, "fallback"):
            continue
        groups.setdefault(float(_get(r, x_field)), []).append(float(_get(r, y_field)))
    if len(groups) < 3:
        raise InsufficientData(f"need at least 3 distinct {x_field} values, got {len(groups)}")
    xs = np.array(sorted(groups))
    ys = np.array([np.median(groups[x]) for x in xs])
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InsufficientData("log-log fit needs positive values")
    fit = stats.linregress(np.log(xs), np.log(ys))
    return ScalingFit(float(fit.slope), float(fit.intercept), float(fit.rvalue**2))


def _has(record, name) -> bool:
    return name in record if isinstance(record, dict) else hasattr(record, name)


def fisher_information(pi: float, grover_steps: int, samples: int = 1) -> float:
    """Fisher information about pi from ``samples`` runs of k Grover steps.

    Each run succeeds with probability sin^2((2k+1) theta), sin^2 theta = pi,
    giving l (1 + 2k)^2 / (pi (1 - pi)).
    """
    if not 0 < pi < 1:
        raise Singular(f"Fisher information diverges at pi={pi}")
    if grover_steps < 0 or samples < 1:
        raise ValueError("need grover_steps >= 0 and samples >= 1")
    return samples * (1 + 2 * grover_steps) ** 2 / (pi * (1 - pi))


def success_rates(records) -> dict[tuple, float]:
    """Empirical success per (problem, n, k, depth_limit, strategy) cell."""
    cells: dict[tuple, list[bool]] = {}
    for r in records:
        key = tuple(_get(r, f) for f in ("problem", "n", "k", "depth_limit", "strategy"))
        cells.setdefault(key, []).append(bool(_get(r, "correct")))
    return {key: sum(v) / len(v) for key, v in cells.items()}


def median_total(records, **match) -> float:
    vals = [
        _get(r, "total_queries")
        for r in records
        if all(_get(r, key) == value for key, value in match.items())
    ]
    if not vals:
        raise InsufficientData(f"no records match {match}")
    return float(np.median(vals))


__all__ = [
    "CSV_HEADER",
    "ExperimentRecord",
    "InvariantViolation",
    "ScalingFit",
    "SweepConfig",
    "fisher_information",
    "fit_scaling_exponent",
    "median_total",
    "read_records",
    "records_to_csv",
    "records_to_json",
    "run_sweep",
    "run_trial",
    "success_rates",
    "trial_seed",
    "write_records",
]
