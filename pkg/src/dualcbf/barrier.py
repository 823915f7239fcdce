"""Shaping functions, barrier values and halfspace CBF constraints."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import SdfSample

DEGENERATE_NORM = 1e-9


@dataclass(frozen=True)
class ShapingFunction:
    """Scalar shaping function T with its derivative and a derivative bound."""

    name: str
    evaluate: Callable[[float], float]
    derivative: Callable[[float], float]
    lipschitz_bound: float

    def scaled(self, a: float) -> ShapingFunction:
        """s -> T(a s), whose derivative bound is a * L."""
        if not (a > 0):
            raise ValueError(f"scale must be positive, got {a}")
        f, df = self.evaluate, self.derivative
        return ShapingFunction(f"{self.name}[a={a:g}]", lambda s: f(a * s),
                               lambda s: a * df(a * s), a * self.lipschitz_bound)


def _tanh_derivative(s: float) -> float:
    t = math.tanh(s)
    return 1.0 - t * t


def _rational(s: float) -> float:
    return s / (1.0 + abs(s))


def _rational_derivative(s: float) -> float:
    d = 1.0 + abs(s)
    return 1.0 / (d * d)


# Abramowitz & Stegun 7.1.26, |error| < 1.5e-7 on [0, inf)
_AS_P = 0.3275911
_AS_A = (0.254829592, -0.284496736, 1.421413741, -1.453152027, 1.061405429)


def _as_poly(t: float) -> tuple[float, float]:
    a1, a2, a3, a4, a5 = _AS_A
    poly = t * (a1 + t * (a2 + t * (a3 + t * (a4 + t * a5))))
    dpoly = a1 + t * (2.0 * a2 + t * (3.0 * a3 + t * (4.0 * a4 + t * 5.0 * a5)))
    return poly, dpoly


# raw formula is ~1e-9 at s = 0; shift and rescale so T(0) = 0 exactly and T(inf) = 1
_AS_ZERO = 1.0 - _as_poly(1.0)[0]
_AS_SCALE = 1.0 / (1.0 - _AS_ZERO)
# near 0 the shifted formula cancels; there P(1) - P(t) = (1 - t) Q(t) is used instead,
# with Q's coefficients the tail sums of P's
_AS_Q = tuple(sum(_AS_A[j:]) for j in range(len(_AS_A)))
_AS_SMALL = 0.5


def erf_approx(s: float) -> float:
    x = abs(s)
    t = 1.0 / (1.0 + _AS_P * x)
    poly, _ = _as_poly(t)
    if x < _AS_SMALL:
        q0, q1, q2, q3, q4 = _AS_Q
        q = q0 + t * (q1 + t * (q2 + t * (q3 + t * q4)))
        val = (_AS_P * x * t * q - poly * math.expm1(-x * x)) * _AS_SCALE
    else:
        val = (1.0 - poly * math.exp(-x * x) - _AS_ZERO) * _AS_SCALE
    return val if s >= 0 else -val


def erf_approx_derivative(s: float) -> float:
    x = abs(s)
    t = 1.0 / (1.0 + _AS_P * x)
    poly, dpoly = _as_poly(t)
    return math.exp(-x * x) * (_AS_P * t * t * dpoly + 2.0 * x * poly) * _AS_SCALE


TANH = ShapingFunction("tanh", math.tanh, _tanh_derivative, 1.0)
RATIONAL = ShapingFunction("rational", _rational, _rational_derivative, 1.0)
# derivative peaks at 0 (about 2/sqrt(pi))
ERF = ShapingFunction("erf", erf_approx, erf_approx_derivative, erf_approx_derivative(0.0))
IDENTITY = ShapingFunction("identity", lambda s: s, lambda s: 1.0, 1.0)

SHAPING_FUNCTIONS = {"tanh": TANH, "rational": RATIONAL, "erf": ERF}


def shaping_by_name(name: str) -> ShapingFunction:
    try:
        return SHAPING_FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown shaping {name!r}; choose one of {sorted(SHAPING_FUNCTIONS)}") from None


@dataclass(frozen=True)
class BarrierSpec:
    sharpness: float
    standoff: float
    gain: float
    shaping: ShapingFunction = TANH

    def __post_init__(self):
        if not (self.sharpness > 0):
            raise ValueError(f"sharpness must be > 0, got {self.sharpness}")
        if not (self.standoff >= 0):
            raise ValueError(f"standoff must be >= 0, got {self.standoff}")
        if not (self.gain > 0):
            raise ValueError(f"gain must be > 0, got {self.gain}")

    def with_gain(self, gain: float) -> BarrierSpec:
        return BarrierSpec(self.sharpness, self.standoff, gain, self.shaping)


@dataclass(frozen=True)
class HalfspaceConstraint:
    """g . u >= b, built from one barrier."""

    g: np.ndarray
    b: float
    h: float = math.nan
    degenerate: bool = False

    def slack(self, u) -> float:
        return float(self.g[0] * u[0] + self.g[1] * u[1] - self.b)


@dataclass(frozen=True)
class GammaSchedule:
    gamma_min: float = 0.2
    gamma_max: float = 1.0

    def __post_init__(self):
        if not (0 < self.gamma_min <= self.gamma_max):
            raise ValueError(f"need 0 < gamma_min <= gamma_max, got {self.gamma_min}, {self.gamma_max}")


def barrier_value(spec: BarrierSpec, sdf_value: float) -> float:
    return spec.shaping.evaluate(spec.sharpness * (sdf_value - spec.standoff))


def build_constraint(spec: BarrierSpec, sample: SdfSample, gain: float | None = None,
                     degenerate_tol: float = DEGENERATE_NORM) -> HalfspaceConstraint:
    """g = T'(a(phi - d)) a grad(phi), b = -gamma T(a(phi - d)).

    ``gain`` overrides ``spec.gain`` (used for the adaptive frontier gain).
    """
    if gain is None:
        gain = spec.gain
    z = spec.sharpness * (sample.value - spec.standoff)
    if spec.shaping is TANH:
        h = math.tanh(z)
        slope = spec.sharpness * (1.0 - h * h)
    else:
        h = spec.shaping.evaluate(z)
        slope = spec.sharpness * spec.shaping.derivative(z)
    g = slope * sample.gradient
    degenerate = sample.degenerate or math.hypot(g[0], g[1]) < degenerate_tol
    return HalfspaceConstraint(g, -gain * h, h, degenerate)


def adaptive_gamma(schedule: GammaSchedule, rho: float) -> float:
    """Frontier gain: gamma_min where everything nearby is unknown, gamma_max where all is mapped."""
    if not (0.0 <= rho <= 1.0):
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    return schedule.gamma_min + (schedule.gamma_max - schedule.gamma_min) * (1.0 - rho)


@dataclass(frozen=True)
class AdmissibilityReport:
    name: str
    t1_sign: bool
    t2_increasing: bool
    t3_lipschitz: bool
    t4_bounded: bool
    max_derivative: float
    max_fd_error: float

    @property
    def admissible(self) -> bool:
        return self.t1_sign and self.t2_increasing and self.t3_lipschitz and self.t4_bounded

    def lines(self) -> list[str]:
        def mark(ok):
            return "PASS" if ok else "FAIL"
        return [
            f"{self.name}: {'admissible' if self.admissible else 'NOT admissible'}",
            f"  T1 sign preservation   {mark(self.t1_sign)}",
            f"  T2 strictly increasing {mark(self.t2_increasing)}",
            f"  T3 derivative <= L     {mark(self.t3_lipschitz)} (max |T'| = {self.max_derivative:.6g}, "
            f"max fd error = {self.max_fd_error:.3g})",
            f"  T4 bounded             {mark(self.t4_bounded)}",
        ]


def check_admissibility(fn: ShapingFunction, sample_range: tuple[float, float] = (-20.0, 20.0),
                        n_samples: int = 4001) -> AdmissibilityReport:
    """Numerical certificate of the four class properties on a sample grid.

    T2 is checked up to float resolution: a step with zero increment is
    accepted only where the expected increment falls below the spacing of
    the values. T3 also cross-checks the derivative against central finite
    differences (tolerance 1e-6 relative to max(|T'|, L)). T4 probes growth
    of sup |T| over ranges enlarged by 10, 100 and 1000.
    """
    lo, hi = sample_range
    if n_samples < 3:
        raise ValueError("n_samples must be >= 3")
    if not math.isclose(lo, -hi):
        raise ValueError("sample_range must be symmetric about 0")
    s = np.linspace(lo, hi, n_samples)
    vals = np.array([fn.evaluate(x) for x in s])
    ders = np.array([fn.derivative(x) for x in s])

    t1 = fn.evaluate(0.0) == 0.0 and bool(np.all(np.sign(vals) == np.sign(s)))

    inc = np.diff(vals)
    expected = 0.5 * (ders[1:] + ders[:-1]) * np.diff(s)
    resolvable = expected > 4.0 * np.spacing(np.maximum(np.abs(vals[1:]), np.abs(vals[:-1])))
    t2 = bool(np.all(inc >= 0) and np.all(inc[resolvable] > 0) and np.all(ders >= 0))

    step = 1e-7
    fd = np.array([(fn.evaluate(x + step) - fn.evaluate(x - step)) / (2 * step) for x in s])
    fd_err = np.abs(fd - ders) / np.maximum(np.abs(ders), fn.lipschitz_bound)
    max_der = float(np.max(np.abs(ders)))
    t3 = (math.isfinite(fn.lipschitz_bound) and fn.lipschitz_bound > 0
          and max_der <= fn.lipschitz_bound * (1 + 1e-12) and float(fd_err.max()) <= 1e-6)

    sups = []
    for factor in (1.0, 10.0, 100.0, 1000.0):
        probe = np.linspace(lo * factor, hi * factor, n_samples)
        sups.append(max(abs(fn.evaluate(x)) for x in probe))
    incs = np.diff(sups)
    t4 = bool(all(math.isfinite(x) for x in sups)
              and all(incs[k + 1] <= 0.5 * incs[k] + 1e-12 for k in range(len(incs) - 1)))

    return AdmissibilityReport(fn.name, t1, t2, bool(t3), t4, max_der, float(fd_err.max()))
