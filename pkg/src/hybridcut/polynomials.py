"""Bounded Chebyshev polynomials approximating erf, step and window functions.

All polynomials live on [-1, 1] and are stored in the Chebyshev basis.  They
are built by Chebyshev interpolation of the target at first-kind nodes
(computed with a DCT), truncated at the smallest degree whose coefficient
tail meets the error budget, and then certified on a dense grid.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dct
from scipy.special import erf, erfinv

from .errors import DegreeOverflow, InvalidWindow, OutOfDomain

DEGREE_CAP = 10_000
GRID_POINTS = 10_000
RANGE_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class BoundedPolynomial:
    """Real polynomial on [-1, 1] in the Chebyshev basis.

    ``certified_sup_error`` is the grid-measured deviation from whatever
    target the constructor approximated (0 for exact constructions).
    """

    coefficients: np.ndarray
    certified_sup_error: float = 0.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        c = np.trim_zeros(np.asarray(self.coefficients, dtype=float), "b")
        if c.size == 0:
            c = np.zeros(1)
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __repr__(self) -> str:
        return (
            f"BoundedPolynomial(degree={self.degree}, "
            f"certified_sup_error={self.certified_sup_error:.3g}, label={self.label!r})"
        )

    def __call__(self, x):
        return C.chebval(x, self.coefficients)

    def __sub__(self, other: BoundedPolynomial) -> BoundedPolynomial:
        return BoundedPolynomial(
            C.chebsub(self.coefficients, other.coefficients),
            self.certified_sup_error + other.certified_sup_error,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "basis": "chebyshev",
                "coeffs": self.coefficients.tolist(),
                "degree": self.degree,
                "certified_sup_error": self.certified_sup_error,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> BoundedPolynomial:
        obj = json.loads(text)
        if obj.get("basis") != "chebyshev":
            raise ValueError(f"unsupported basis {obj.get('basis')!r}")
        poly = cls(np.asarray(obj["coeffs"], dtype=float), float(obj["certified_sup_error"]))
        if poly.degree != obj["degree"]:
            raise ValueError("degree field does not match coefficient list")
        return poly


@dataclass(frozen=True)
class StepSpec:
    """Transition half-width ``delta``, leakage ``eta`` and threshold ``mu``."""

    delta: float
    eta: float
    mu: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0 < self.eta < 0.5:
            raise ValueError("eta must lie in (0, 1/2)")
        if self.mu - self.delta < -1 - 1e-12 or self.mu + self.delta > 1 + 1e-12:
            raise ValueError("[mu - delta, mu + delta] must lie inside [-1, 1]")


@dataclass(frozen=True)
class Certificate:
    passed: bool
    margins: dict[str, float]


def eval_poly(p: BoundedPolynomial, x: float) -> float:
    if abs(x) > 1:
        raise OutOfDomain(f"x={x} outside [-1, 1]")
    return float(p(x))


def cheb_grid(lo: float, hi: float, n: int = GRID_POINTS) -> np.ndarray:
    return np.linspace(lo, hi, n)


def _chebyshev_coefficients(f, n: int) -> np.ndarray:
    """Coefficients of the degree n-1 interpolant of f at first-kind nodes."""
    j = np.arange(n)
    nodes = np.cos(np.pi * (j + 0.5) / n)
    c = dct(f(nodes), type=2) / n
    c[0] /= 2
    return c


@lru_cache(maxsize=4096)
def _erf_poly_cached(kappa: float, shift: float, eps: float, cap: int) -> BoundedPolynomial:
    def target(x):
        return erf(kappa * (x - shift))

    # Grow the interpolation size until the series has visibly converged.
    n = 64
    while True:
        c = _chebyshev_coefficients(target, n)
        if np.max(np.abs(c[-n // 8 :])) < 1e-17 or n > 4 * cap:
            break
        n *= 2

    tau = eps / 2
    tail = np.cumsum(np.abs(c)[::-1])[::-1]  # tail[d] = sum_{j >= d} |c_j|
    ok = np.nonzero(np.append(tail[1:], 0.0) <= tau)[0]
    degree = int(ok[0])
    grid = cheb_grid(-1.0, 1.0)
    exact = target(grid)
    while True:
        if degree > cap:
            raise DegreeOverflow(
                f"erf approximation with kappa={kappa:g}, eps={eps:g} needs degree > {cap}"
            )
        t = np.abs(c[degree + 1 :]).sum()
        coeffs = c[: degree + 1] / (1 + t)
        err = float(np.max(np.abs(C.chebval(grid, coeffs) - exact)))
        if err <= eps:
            return BoundedPolynomial(coeffs, err, label=f"erf({kappa:g}(x-{shift:g}))")
        degree += 1


def erf_poly(steepness: float, shift: float, eps: float, cap: int = DEGREE_CAP) -> BoundedPolynomial:
    """Polynomial within ``eps`` of erf(steepness * (x - shift)) on [-1, 1].

    The truncated interpolant is rescaled by 1/(1 + tail) so it never leaves
    [-1, 1]; the rescaling at most doubles the truncation error, which is why
    the tail budget is eps/2.
    """
    if steepness < 0:
        raise ValueError("steepness must be nonnegative")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if steepness == 0:
        return BoundedPolynomial(np.zeros(1), 0.0, label="erf(0)")
    return _erf_poly_cached(float(steepness), float(shift), float(eps), int(cap))


def step_parameters(spec: StepSpec) -> tuple[float, float]:
    """(steepness, erf accuracy) for the step polynomial of ``spec``.

    With P = (1 + p_erf)/2 and |p_erf - erf| <= eps, the leakage bounds hold
    once erf(steepness * delta) >= 1 - 2*eta + eps.  The accuracy is tied to
    both eta and the gap 1 - 2*eta so shallow (eta near 1/2) steps stay cheap.
    """
    eps = min(spec.eta, 1 - 2 * spec.eta) / 4
    steepness = float(erfinv(1 - 2 * spec.eta + eps)) / spec.delta
    return steepness, eps


def step_poly(spec: StepSpec, cap: int = DEGREE_CAP) -> BoundedPolynomial:
    """Polynomial <= eta below mu - delta and >= 1 - eta above mu + delta."""
    steepness, eps = step_parameters(spec)
    p = erf_poly(steepness, spec.mu, eps, cap)
    coeffs = p.coefficients / 2
    coeffs[0] += 0.5
    return BoundedPolynomial(coeffs, p.certified_sup_error / 2, label=f"step{spec}")


def window_poly(spec: StepSpec, cap: int = DEGREE_CAP) -> BoundedPolynomial:
    """Difference of the steps at -mu and +mu, each built with leakage eta/2.

    Halving the per-step leakage is what makes the pass band reach 1 - eta:
    inside it the two steps contribute (1 - eta/2) - eta/2.
    """
    if spec.mu <= spec.delta:
        raise InvalidWindow(f"window needs mu > delta, got mu={spec.mu}, delta={spec.delta}")
    half = spec.eta / 2
    lower = step_poly(StepSpec(spec.delta, half, -spec.mu), cap)
    upper = step_poly(StepSpec(spec.delta, half, spec.mu), cap)
    w = lower - upper
    return BoundedPolynomial(w.coefficients, w.certified_sup_error, label=f"window{spec}")


def certify_bounds(
    p: BoundedPolynomial, spec: StepSpec, kind: Literal["step", "window"] = "step"
) -> Certificate:
    """Check the step/window leakage bounds of ``spec`` by raw evaluation.

    Margins are positive when a bound holds with room to spare.  ``range`` is
    the margin of |p| <= 1 over the full interval.
    """
    d, eta, mu = spec.delta, spec.eta, spec.mu
    margins: dict[str, float] = {}
    if kind == "step":
        low = p(cheb_grid(-1.0, max(-1.0, mu - d)))
        high = p(cheb_grid(min(1.0, mu + d), 1.0))
        margins["low"] = eta - float(np.max(np.abs(low)))
        margins["high"] = float(np.min(high)) - (1 - eta)
    elif kind == "window":
        outer_l = p(cheb_grid(-1.0, max(-1.0, -mu - d)))
        outer_r = p(cheb_grid(min(1.0, mu + d), 1.0))
        inner = p(cheb_grid(-mu + d, mu - d))
        margins["low"] = eta - float(np.max(np.abs(outer_l)))
        margins["high"] = eta - float(np.max(np.abs(outer_r)))
        margins["pass"] = float(np.min(inner)) - (1 - eta)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    margins["range"] = 1 + RANGE_SLACK - float(np.max(np.abs(p(cheb_grid(-1.0, 1.0)))))
    return Certificate(all(m >= 0 for m in margins.values()), margins)


def gap_filter_poly(gap: float, degree: int) -> BoundedPolynomial:
    """Even polynomial equal to 1 at 0 and smallest possible beyond ``gap``.

    W(x) = T_m(y(x)) / T_m(c) with y = (1 + gap^2 - 2 x^2)/(1 - gap^2), which
    maps [gap, 1] onto [-1, 1] and 0 onto c > 1; m = degree // 2.  By the
    Chebyshev extremal property no even polynomial of this degree bounded
    by 1 on [-1, 1] has a larger ratio W(0) / max_{[gap,1]} |W|, which
    is T_m(c).
    """
    if not 0 < gap < 1:
        raise ValueError("gap must lie in (0, 1)")
    m = degree // 2
    if m < 1:
        raise ValueError("need degree >= 2")
    c = (1 + gap**2) / (1 - gap**2)
    peak = float(np.cosh(m * np.arccosh(c)))
    unit = np.zeros(m + 1)
    unit[m] = 1.0

    def target(x):
        return C.chebval((1 + gap**2 - 2 * x**2) / (1 - gap**2), unit) / peak

    coeffs = _chebyshev_coefficients(target, 2 * m + 1)
    coeffs[1::2] = 0.0  # exact zeros up to rounding
    return BoundedPolynomial(coeffs, 0.0, label=f"gap-filter(gap={gap:g}, m={m})")


def gap_filter_ratio(gap: float, degree: int) -> float:
    """W(0) / max_{[gap,1]} |W| = T_m(c) for :func:`gap_filter_poly`."""
    c = (1 + gap**2) / (1 - gap**2)
    return float(np.cosh((degree // 2) * np.arccosh(c)))
