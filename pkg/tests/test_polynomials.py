import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from mpmath import mp
from numpy.polynomial import chebyshev as C
from scipy.stats import linregress

from hybridcut import BoundedPolynomial, StepSpec, certify_bounds, erf_poly, eval_poly, step_poly, window_poly
from hybridcut.errors import DegreeOverflow, InvalidWindow, OutOfDomain
from hybridcut.polynomials import cheb_grid, gap_filter_poly, gap_filter_ratio

GRID = np.linspace(-1, 1, 10_000)


def _mp_erf(values, kappa, shift):
    mp.dps = 30
    return np.array([float(mp.erf(kappa * (mp.mpf(float(x)) - shift))) for x in values])


def test_erf_zero_steepness():
    p = erf_poly(0, 0.0, 0.1)
    assert p.degree == 0
    assert p(0.3) == 0


def test_erf_error_against_high_precision_oracle():
    p = erf_poly(4, 0.0, 1e-3)
    xs = np.linspace(-1, 1, 2001)
    assert np.max(np.abs(p(xs) - _mp_erf(xs, 4, 0))) <= 1e-3
    assert p.certified_sup_error <= 1e-3


@pytest.mark.parametrize("k0", [8, 16, 32])
def test_erf_degree_grows_nearly_linearly(k0):
    ratio = erf_poly(2 * k0, 0.0, 1e-3).degree / erf_poly(k0, 0.0, 1e-3).degree
    assert 1 <= ratio <= 2.5


def test_erf_degree_cap():
    with pytest.raises(DegreeOverflow):
        erf_poly(500, 0.0, 1e-6, cap=50)


def test_step_bounds_example():
    p = step_poly(StepSpec(0.1, 1 / 8, 0.5))
    assert p(0.39) <= 1 / 8
    assert p(0.61) >= 7 / 8


def test_step_endpoints():
    p = step_poly(StepSpec(0.2, 1 / 8, 0.0))
    assert p(-1) <= 1 / 8
    assert p(1) >= 7 / 8


def test_step_degree_doubles_when_delta_halves():
    ratio = step_poly(StepSpec(0.05, 1 / 8, 0)).degree / step_poly(StepSpec(0.1, 1 / 8, 0)).degree
    assert 1.6 <= ratio <= 2.4


def test_window_pass_band_and_tails():
    spec = StepSpec(0.05, 1 / 8, 0.3)
    p = window_poly(spec)
    assert p(0) >= 7 / 8
    assert p(1) <= 1 / 8 and p(-1) <= 1 / 8


def test_window_is_difference_of_steps():
    spec = StepSpec(0.05, 1 / 8, 0.3)
    lower = step_poly(StepSpec(0.05, 1 / 16, -0.3))
    upper = step_poly(StepSpec(0.05, 1 / 16, 0.3))
    diff = C.chebsub(window_poly(spec).coefficients, C.chebsub(lower.coefficients, upper.coefficients))
    assert np.max(np.abs(diff)) < 1e-12


def test_window_needs_separated_edges():
    with pytest.raises(InvalidWindow):
        window_poly(StepSpec(0.2, 1 / 8, 0.1))


def test_eval_constant_and_chebyshev_basis():
    assert eval_poly(BoundedPolynomial(np.array([0.3])), -0.7) == pytest.approx(0.3)
    assert eval_poly(BoundedPolynomial(np.array([0, 0, 0, 1.0])), 1.0) == pytest.approx(1.0)
    with pytest.raises(OutOfDomain):
        eval_poly(BoundedPolynomial(np.array([1.0])), 1.5)


def _chebyshev_monomials(n):
    """Exact integer monomial coefficients of T_0..T_n."""
    rows = [[1], [0, 1]]
    for _ in range(2, n + 1):
        a, b = rows[-1], rows[-2]
        nxt = [0] + [2 * c for c in a]
        for j, c in enumerate(b):
            nxt[j] -= c
        rows.append(nxt)
    return rows[: n + 1]


def test_eval_matches_monomial_basis():
    rng = np.random.default_rng(7)
    coeffs = rng.normal(size=21) / 21
    xs = rng.uniform(-1, 1, 64)
    basis = _chebyshev_monomials(20)
    mono = [sum((Fraction(c) * row[j] for c, row in zip(coeffs, basis) if j < len(row)), Fraction(0)) for j in range(21)]
    p = BoundedPolynomial(coeffs)
    for x in xs:
        exact = float(sum(c * Fraction(x) ** j for j, c in enumerate(mono)))
        assert abs(eval_poly(p, x) - exact) < 1e-10


def test_degree_is_last_nonzero():
    assert BoundedPolynomial(np.array([1.0, 2.0, 0.0, 0.0])).degree == 1


def test_certify_constructed_polynomials():
    spec = StepSpec(0.1, 1 / 8, 0.2)
    assert certify_bounds(step_poly(spec), spec, "step").passed
    wspec = StepSpec(0.05, 1 / 8, 0.3)
    cert = certify_bounds(window_poly(wspec), wspec, "window")
    assert cert.passed and min(cert.margins.values()) >= 0


def test_certify_rejects_constant_half():
    cert = certify_bounds(BoundedPolynomial(np.array([0.5])), StepSpec(0.1, 1 / 8, 0.0), "step")
    assert not cert.passed
    assert cert.margins["low"] < 0 and cert.margins["high"] < 0


def test_degree_scaling_slope():
    deltas = np.array([0.2, 0.1, 0.05, 0.025])
    degrees = [step_poly(StepSpec(d, 1 / 8, 0)).degree for d in deltas]
    assert 0.8 <= linregress(np.log(1 / deltas), np.log(degrees)).slope <= 1.2


def test_json_round_trip():
    p = step_poly(StepSpec(0.1, 1 / 8, 0.5))
    q = BoundedPolynomial.from_json(p.to_json())
    assert np.array_equal(p.coefficients, q.coefficients)
    assert q.certified_sup_error == p.certified_sup_error
    bad = json.loads(p.to_json())
    bad["degree"] += 1
    with pytest.raises(ValueError):
        BoundedPolynomial.from_json(json.dumps(bad))


@given(
    st.floats(0.02, 0.4),
    st.sampled_from([1 / 8, 1 / 4, 0.05]),
    st.floats(-0.5, 0.5),
)
def test_step_certifies_and_stays_in_range(delta, eta, mu):
    spec = StepSpec(delta, eta, mu)
    p = step_poly(spec)
    assert certify_bounds(p, spec, "step").passed
    assert np.max(np.abs(p(GRID))) <= 1 + 1e-9


@given(st.floats(0.0, 60.0), st.floats(-1, 1), st.floats(1e-4, 0.5))
def test_erf_poly_in_range_and_within_eps(kappa, shift, eps):
    p = erf_poly(kappa, shift, eps)
    assert np.max(np.abs(p(GRID))) <= 1 + 1e-9
    from scipy.special import erf

    assert np.max(np.abs(p(GRID) - erf(kappa * (GRID - shift)))) <= eps + 1e-12


@given(st.floats(0.01, 0.5), st.integers(1, 60))
def test_gap_filter_extremal_ratio(gap, m):
    p = gap_filter_poly(gap, 2 * m)
    assert p.degree == 2 * m
    assert p(0.0) == pytest.approx(1.0, rel=1e-8)
    outside = np.max(np.abs(p(cheb_grid(gap, 1.0))))
    assert outside == pytest.approx(1 / gap_filter_ratio(gap, 2 * m), rel=1e-6)
    assert np.max(np.abs(p(GRID))) <= 1 + 1e-9
