"""Query accounting for depth-limited (hybrid) query algorithms.

A hybrid algorithm runs a sequence of circuits, each making at most ``D``
coherent oracle queries before it is measured.  Its cost is the total number
of queries over all circuits.  :class:`QueryLedger` is an immutable record of
those circuits; every ``record`` returns a new ledger so independent trials
never share state.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .errors import DepthExceeded, InvalidBudget


class LedgerSummary(NamedTuple):
    total: int
    max_coherent: int
    circuits: int


@dataclass(frozen=True)
class QueryLedger:
    """Immutable log of circuit runs under a coherent depth budget.

    The log is stored run-length encoded as ``(cost, count)`` pairs because
    sampling-heavy solvers record millions of identical shots.
    """

    depth_limit: int
    runs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if int(self.depth_limit) < 1:
            raise InvalidBudget(f"depth limit must be >= 1, got {self.depth_limit}")

    @property
    def circuit_log(self) -> list[int]:
        return [cost for cost, count in self.runs for _ in range(count)]

    @property
    def total(self) -> int:
        return sum(cost * count for cost, count in self.runs)

    @property
    def max_coherent(self) -> int:
        return max((cost for cost, _ in self.runs), default=0)

    @property
    def circuits(self) -> int:
        return sum(count for _, count in self.runs)

    def record(self, coherent_queries: int, times: int = 1) -> QueryLedger:
        """Return a new ledger with ``times`` circuits of the given cost appended."""
        q = int(coherent_queries)
        if q < 1:
            raise ValueError(f"a circuit makes at least one query, got {q}")
        if q > self.depth_limit:
            raise DepthExceeded(
                f"circuit with {q} coherent queries exceeds depth limit {self.depth_limit}"
            )
        if times < 0:
            raise ValueError("times must be nonnegative")
        if times == 0:
            return self
        runs = self.runs
        if runs and runs[-1][0] == q:
            runs = runs[:-1] + ((q, runs[-1][1] + times),)
        else:
            runs = runs + ((q, times),)
        return QueryLedger(self.depth_limit, runs)

    def merge(self, others: Iterable[QueryLedger]) -> QueryLedger:
        """Append the logs of sub-ledgers (which must share this depth limit)."""
        out = self
        for other in others:
            for cost, count in other.runs:
                out = out.record(cost, count)
        return out

    def summary(self) -> LedgerSummary:
        return LedgerSummary(self.total, self.max_coherent, self.circuits)


def new_ledger(depth_limit: int) -> QueryLedger:
    return QueryLedger(int(depth_limit))


def record_circuit(ledger: QueryLedger, coherent_queries: int) -> QueryLedger:
    return ledger.record(coherent_queries)


def summary(ledger: QueryLedger) -> LedgerSummary:
    return ledger.summary()
