import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridcut import DepthExceeded, ExperimentRecord, SweepConfig, fisher_information, fit_scaling_exponent, run_sweep
from hybridcut import experiments
from hybridcut.cli import main
from hybridcut.errors import InsufficientData, InvalidInput, Singular
from hybridcut.experiments import (
    CSV_HEADER,
    InvariantViolation,
    read_records,
    records_to_csv,
    success_rates,
    trial_seed,
)


def _record(x, y, fallback=False):
    return {"depth_limit": x, "total_queries": y, "fallback": fallback}


def test_header_is_exact():
    assert CSV_HEADER == (
        "problem,n,k,depth_limit,strategy,trial,answer,truth,correct,"
        "total_queries,max_coherent,circuits,seed,fallback"
    )
    assert records_to_csv([]).splitlines() == [CSV_HEADER]


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(problem="threshold", sizes=(), depths=(8,)),
        dict(problem="threshold", sizes=(8,), depths=(8,), trials=0),
        dict(problem="sorting", sizes=(8,), depths=(8,)),
        dict(problem="threshold", sizes=(8,), depths=(8,), strategies=("magic",)),
        dict(problem="symmetric", sizes=(8,), depths=(8,), strategies=("parallel",)),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(InvalidInput):
        SweepConfig(**kwargs)


def test_config_json_rejects_unknown_keys():
    with pytest.raises(InvalidInput):
        SweepConfig.from_json('{"problem": "nand", "sizes": [4], "depths": [8], "bogus": 1}')


def test_single_cell_is_deterministic():
    cfg = SweepConfig("threshold", sizes=(8,), depths=(8,), ks=(2,), trials=5, seed=42)
    first = run_sweep(cfg)
    assert len(first) == 5
    assert records_to_csv(first) == records_to_csv(run_sweep(cfg))


def test_worker_count_does_not_change_output():
    cfg = SweepConfig("nand", sizes=(4, 8), depths=(16, 1024), strategies=("interpolate", "parallel"), trials=3)
    assert records_to_csv(run_sweep(cfg, workers=2)) == records_to_csv(run_sweep(cfg))


def test_seeds_never_repeat_across_cells():
    cfg = SweepConfig("threshold", sizes=(8, 16), depths=(4, 8), ks=(1, 3), strategies=("interpolate", "parallel"), trials=4)
    records = run_sweep(cfg)
    assert len(records) == len(cfg.cells()) * 4
    assert len({r.seed for r in records}) == len(records)
    assert trial_seed(1, 2, 3) == trial_seed(1, 2, 3) != trial_seed(1, 3, 2)


def test_threshold_cells_succeed():
    cfg = SweepConfig("threshold", sizes=(8,), depths=(8,), ks=(1,), strategies=("interpolate", "parallel"), trials=99)
    records = run_sweep(cfg)
    for rate in success_rates(records).values():
        assert rate >= 2 / 3
    assert all(r.correct == (r.answer == r.truth) for r in records)
    assert all(r.max_coherent <= r.depth_limit for r in records)


def test_symmetric_and_nand_sweeps_run():
    sym = run_sweep(SweepConfig("symmetric", sizes=(8,), depths=(64,), trials=3, function="parity"))
    assert {r.k for r in sym} == {None}
    nand = run_sweep(SweepConfig("nand", sizes=(4,), depths=(1024,), trials=3))
    assert all(not r.fallback for r in nand)


def test_table_function_from_file(tmp_path):
    path = tmp_path / "f.json"
    path.write_text(json.dumps([0, 1, 1, 1, 0]))
    records = run_sweep(SweepConfig("symmetric", sizes=(4,), depths=(64,), trials=2, function=str(path)))
    assert len(records) == 2
    with pytest.raises(InvalidInput):
        run_sweep(SweepConfig("symmetric", sizes=(8,), depths=(64,), function=str(path)))


def test_escaping_depth_violation_aborts(monkeypatch):
    def broken(*args, **kwargs):
        raise DepthExceeded("boom")

    monkeypatch.setattr(experiments, "solve_threshold", broken)
    with pytest.raises(InvariantViolation):
        run_sweep(SweepConfig("threshold", sizes=(8,), depths=(8,), ks=(1,)))


def test_record_invariant():
    with pytest.raises(InvariantViolation):
        ExperimentRecord("nand", 4, None, 8, "interpolate", 0, 1, 1, True, 9, 9, 1, 0, False)


def test_unwritable_output(tmp_path):
    cfg = SweepConfig("threshold", sizes=(8,), depths=(8,), ks=(1,), out=str(tmp_path / "missing" / "x.csv"))
    with pytest.raises(OSError):
        run_sweep(cfg)


def test_csv_round_trip(tmp_path):
    cfg = SweepConfig("threshold", sizes=(8,), depths=(2, 8), ks=(3,), trials=2, out=str(tmp_path / "r.csv"))
    records = run_sweep(cfg)
    rows = read_records(tmp_path / "r.csv")
    assert [r["seed"] for r in rows] == [r.seed for r in records]
    assert [r["fallback"] for r in rows] == [r.fallback for r in records]


def test_fit_exact_power_law():
    fit = fit_scaling_exponent([_record(x, 100 / x) for x in (2, 4, 8, 16)])
    assert fit.slope == pytest.approx(-1.0, abs=1e-9)
    assert fit.r2 == pytest.approx(1.0)
    assert fit_scaling_exponent([_record(x, 7) for x in (2, 4, 8)]).slope == pytest.approx(0, abs=1e-12)


def test_fit_uses_medians_and_skips_fallback():
    recs = [_record(x, y) for x in (2, 4, 8) for y in (100 / x, 100 / x, 1e9)]
    recs += [_record(x, 1.0, fallback=True) for x in (2, 4, 8)]
    assert fit_scaling_exponent(recs).slope == pytest.approx(-1.0)


def test_fit_needs_three_points():
    with pytest.raises(InsufficientData):
        fit_scaling_exponent([_record(2, 1), _record(4, 1), _record(4, 3)])
    with pytest.raises(InsufficientData):
        fit_scaling_exponent([_record(x, 1, fallback=True) for x in (2, 4, 8)])


def test_fisher_examples():
    assert fisher_information(0.5, 0, 1) == pytest.approx(4)
    assert fisher_information(0.5, 1, 10) == pytest.approx(360)
    # 1 + 2k is odd, so it cannot double; tripling it (k = 1 -> 4) must multiply by nine
    assert fisher_information(0.3, 4, 1) / fisher_information(0.3, 1, 1) == pytest.approx(9)
    with pytest.raises(Singular):
        fisher_information(0.0, 1, 1)
    with pytest.raises(Singular):
        fisher_information(1.0, 1, 1)


def fisher_by_differentiation(pi, k, samples, h=1e-6):
    """Expected squared score of the two-outcome likelihood, by central differences."""

    def p_success(p):
        return math.sin((2 * k + 1) * math.asin(math.sqrt(p))) ** 2

    p = p_success(pi)
    dp = (p_success(pi + h) - p_success(pi - h)) / (2 * h)
    # outcome 1 with prob p (score dp/p), outcome 0 with prob 1-p (score -dp/(1-p))
    return samples * (p * (dp / p) ** 2 + (1 - p) * (dp / (1 - p)) ** 2)


def test_fisher_matches_numerical_differentiation_on_grid():
    for pi in (0.1, 0.27, 0.45, 0.62, 0.83):
        for k in (0, 1, 2, 3, 5):
            assert fisher_by_differentiation(pi, k, 3) == pytest.approx(fisher_information(pi, k, 3), rel=1e-6)


@given(st.floats(0.01, 0.99), st.integers(0, 50), st.integers(1, 100))
def test_fisher_quadratic_in_steps_linear_in_samples(pi, k, samples):
    base = fisher_information(pi, 0, samples)
    assert fisher_information(pi, k, samples) == pytest.approx((1 + 2 * k) ** 2 * base)
    assert fisher_information(pi, k, 2 * samples) == pytest.approx(2 * fisher_information(pi, k, samples))


# ---------------------------------------------------------------- CLI


def test_cli_threshold_csv(capsys):
    assert main(["threshold", "--n", "8", "--k", "1", "--depth", "8", "--trials", "3", "--strategy", "parallel"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == CSV_HEADER and len(lines) == 4


def test_cli_json_and_file(tmp_path):
    out = tmp_path / "n.json"
    assert main(["nand", "--n", "4", "--depth", "1024", "--trials", "2", "--format", "json", "--out", str(out)]) == 0
    rows = json.loads(out.read_text())
    assert len(rows) == 2 and rows[0]["problem"] == "nand"


def test_cli_symmetric(capsys):
    assert main(["symmetric", "--n", "4", "--depth", "16", "--alpha", "0.5", "--function", "parity"]) == 0
    assert capsys.readouterr().out.startswith(CSV_HEADER)


def test_cli_sweep_and_fit(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    out = tmp_path / "rec.csv"
    cfg.write_text(json.dumps({"problem": "threshold", "sizes": [64], "ks": [4], "depths": [8, 16, 32], "trials": 2}))
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["fit", str(out)]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["slope"] < 0 and fit["points"] == 6


def test_cli_usage_errors(tmp_path):
    assert main(["bogus"]) == 1
    assert main(["threshold", "--n", "8", "--depth", "8"]) == 1  # missing --k
    assert main(["threshold", "--n", "7", "--k", "1", "--depth", "8"]) == 1
    assert main(["threshold", "--n", "8", "--k", "1", "--depth", "8", "--out", str(tmp_path / "no" / "x")]) == 1
    assert main(["sweep", "--config", str(tmp_path / "absent.json")]) == 1


def test_cli_invariant_violation_exit_code(monkeypatch):
    def broken(*args, **kwargs):
        raise DepthExceeded("boom")

    monkeypatch.setattr(experiments, "solve_threshold", broken)
    assert main(["threshold", "--n", "8", "--k", "1", "--depth", "8"]) == 2
