"""Frequency-domain dominance and passivity certification.

The central object is the minimum over frequency of Re G(jw - lambda): its
sign decides passivity, and its reciprocal gives the critical gain below
which the circle criterion certifies p-dominance for the saturated loop
(sector slope in [0, 1], so K = 1 in the amplifier checks; the operations
stay generic in K for load reuse).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .tf_core import AmplifierParams, RationalTF, tf_build_mixed, tf_shift

__all__ = [
    "INFINITE_SECTOR",
    "DominanceCertificate",
    "FrequencyGrid",
    "LocusPoint",
    "check_p_dominance",
    "check_p_passivity",
    "count_unstable_shifted_poles",
    "critical_balance",
    "critical_gain",
    "default_grid",
    "midpoint_rate",
    "min_real_part",
    "nyquist_locus",
    "select_rate",
]

#: Sector tag that turns the circle criterion into a positive-realness check.
INFINITE_SECTOR = "infinite"

#: Absolute slack on |Re(pole) + lambda| below which a pole is considered to
#: sit on the shifted imaginary axis.
_AXIS_TOL = 1e-9

#: Strictness margin for the finite-sector Nyquist condition.
_STRICT_MARGIN = 1e-12

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FrequencyGrid:
    """Logarithmic frequency grid for sweep minimization.

    ``n_points`` log-spaced samples on [omega_min, omega_max]; local minima
    are golden-section refined down to ``refinement_tol`` relative frequency
    resolution.
    """

    omega_min: float
    omega_max: float
    n_points: int = 2000
    refinement_tol: float = 1e-9

    def __post_init__(self):
        if not 0.0 < self.omega_min < self.omega_max:
            raise ValueError("requires 0 < omega_min < omega_max")
        if self.n_points < 2:
            raise ValueError("requires n_points >= 2")
        if not self.refinement_tol > 0.0:
            raise ValueError("requires refinement_tol > 0")

    def omegas(self) -> np.ndarray:
        return np.geomspace(self.omega_min, self.omega_max, self.n_points)

    @classmethod
    def spanning(cls, corner_freqs, n_points: int = 2000,
                 refinement_tol: float = 1e-9) -> "FrequencyGrid":
        """Grid bracketing every corner frequency by three decades."""
        corners = [abs(float(c)) for c in corner_freqs if abs(float(c)) > 1e-12]
        if not corners:
            corners = [1.0]
        return cls(1e-3 * min(corners), 1e3 * max(corners),
                   n_points=n_points, refinement_tol=refinement_tol)

    @classmethod
    def for_params(cls, params: AmplifierParams, n_points: int = 2000,
                   refinement_tol: float = 1e-9) -> "FrequencyGrid":
        """Default grid policy: bracket the 1/tau corner frequencies."""
        return cls.spanning([1.0 / t for t in params.taus],
                            n_points=n_points, refinement_tol=refinement_tol)


def default_grid(g: RationalTF, lam: float = 0.0, n_points: int = 2000) -> FrequencyGrid:
    """Grid spanning the pole/zero corner magnitudes of g, before and after shifting."""
    corners = []
    for root in g.poles() + g.zeros():
        corners.append(abs(root))
        corners.append(abs(root + lam))
    return FrequencyGrid.spanning(corners, n_points=n_points)


@dataclass(frozen=True)
class DominanceCertificate:
    """Outcome of the three-condition circle-criterion check.

    conditions = (no pole on the shifted axis,
                  shifted unstable pole count equals p,
                  Nyquist locus right of the -1/K line).
    ``critical_gain`` is the extra gain the checked transfer function could
    absorb before losing positive realness (inf when min_re >= 0);
    ``margin`` is the distance between min_re and the sector line.
    """

    p: int
    rate: float
    min_re: float
    omega_at_min: float
    critical_gain: float
    conditions: tuple[bool, bool, bool]
    passed: bool
    sector: object
    margin: float

    def to_json_dict(self) -> dict:
        def _num(x):
            if isinstance(x, float) and math.isinf(x):
                return "unbounded"
            if isinstance(x, float) and math.isnan(x):
                return None
            return x

        return {
            "p": self.p,
            "lambda": self.rate,
            "min_re": _num(self.min_re),
            "omega_at_min": "infinite" if math.isinf(self.omega_at_min) else _num(self.omega_at_min),
            "critical_gain": _num(self.critical_gain),
            "conditions": list(self.conditions),
            "passed": self.passed,
            "sector": self.sector if isinstance(self.sector, str) else float(self.sector),
            "margin": _num(self.margin),
        }


class LocusPoint(NamedTuple):
    omega: float
    re: float
    im: float
    near_pole: bool


def _check_axis_clear(g: RationalTF, lam: float) -> list[complex]:
    poles = g.poles()
    if any(abs(p.real + lam) < _AXIS_TOL for p in poles):
        raise ArithmeticError("pole on shifted imaginary axis")
    return poles


def _eval_re_axis(shifted: RationalTF, omegas: np.ndarray) -> np.ndarray:
    s = 1j * omegas
    num_v = np.polynomial.polynomial.polyval(s, np.asarray(shifted.num.coeffs))
    den_v = np.polynomial.polynomial.polyval(s, np.asarray(shifted.den.coeffs))
    return np.real(num_v / den_v)


def _re_at(shifted: RationalTF, omega: float) -> float:
    s = 1j * omega
    return (shifted.num(s) / shifted.den(s)).real


def _asymptotic_re(g: RationalTF) -> float:
    """Real-part limit for omega -> infinity (0 unless bi-proper)."""
    if g.is_biproper:
        return g.num.leading / g.den.leading
    return 0.0


def _golden_min(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Golden-section minimum of f on [lo, hi] (bracket width down to tol)."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def min_real_part(g: RationalTF, lam: float, grid: FrequencyGrid | None = None
                  ) -> tuple[float, float]:
    """Global minimum of Re G(jw - lambda) over w >= 0.

    Sweeps the log grid augmented with w = 0 and the w -> infinity limit,
    then golden-section refines every local grid minimum (in log frequency)
    to the grid's refinement tolerance.  Returns (min_re, omega_at_min);
    omega_at_min is inf when the asymptotic limit is the minimum.
    """
    _check_axis_clear(g, lam)
    if grid is None:
        grid = default_grid(g, lam)
    shifted = tf_shift(g, lam)
    w = grid.omegas()
    vals = _eval_re_axis(shifted, w)

    best_re = _re_at(shifted, 0.0)
    best_w = 0.0
    re_inf = _asymptotic_re(g)
    if re_inf < best_re:
        best_re, best_w = re_inf, math.inf

    n = len(w)
    brackets = []
    for i in range(n):
        left = vals[i - 1] if i > 0 else math.inf
        right = vals[i + 1] if i < n - 1 else math.inf
        if vals[i] <= left and vals[i] <= right:
            brackets.append((max(i - 1, 0), min(i + 1, n - 1)))
    logw = np.log(w)

    def f(u):
        return _re_at(shifted, math.exp(u))

    for i_lo, i_hi in brackets[:64]:
        if i_lo == i_hi:
            x, v = w[i_lo], vals[i_lo]
        else:
            u, v = _golden_min(f, logw[i_lo], logw[i_hi], grid.refinement_tol)
            x = math.exp(u)
        if v < best_re:
            best_re, best_w = float(v), float(x)
    return best_re, best_w


def critical_balance(tau_p: float, tau_n: float) -> float:
    """Balance threshold tau_p/(tau_p + tau_n), always in (0, 0.5).

    Above it the open-loop zero is unstable for every admissible rate, and
    2-passivity becomes attainable for any gain; it vanishes as the positive
    channel becomes infinitely fast.
    """
    if not 0.0 < tau_p < tau_n:
        raise ValueError("requires 0 < tau_p < tau_n")
    return tau_p / (tau_p + tau_n)


def midpoint_rate(poles) -> float:
    """Rate splitting off the two slowest poles as the dominant pair.

    Midpoint between the real parts of the second and third slowest poles,
    so shifting leaves exactly two unstable poles; a stable and an unstable
    shifted pole of equal magnitude then cancel in phase.  For three poles
    this is the midpoint of the two left-most pole locations.
    """
    res = sorted((p.real if isinstance(p, complex) else float(p) for p in poles),
                 reverse=True)
    if len(res) < 3:
        raise ValueError("requires at least three poles")
    return -(res[1] + res[2]) / 2.0


def select_rate(params: AmplifierParams) -> float:
    """Rate-selection policy: midpoint of the two fastest pole magnitudes.

    Splitting the two left-most poles guarantees exactly two shifted-unstable
    poles; any rate strictly between those two magnitudes works, and callers
    may override the policy with their own value.
    """
    mags = sorted((1.0 / t for t in params.taus), reverse=True)
    return (mags[0] + mags[1]) / 2.0


def count_unstable_shifted_poles(g: RationalTF, lam: float) -> int:
    """Number of poles with real part > -lambda (raises on a boundary pole)."""
    poles = _check_axis_clear(g, lam)
    return sum(1 for p in poles if p.real > -lam)


def critical_gain(params: AmplifierParams, lam: float, p: int,
                  grid: FrequencyGrid | None = None) -> float:
    """Largest gain below which p-dominance is certified at rate ``lam``.

    Computed at unit gain (the transfer function scales linearly in k):
    -1/min_re when the swept minimum is negative, inf otherwise.  p = 0
    requires lam = 0; p = 2 requires exactly two shifted-unstable poles.
    """
    if p == 0:
        if lam != 0.0:
            raise ValueError("requires lambda = 0 for the 0-dominance gain")
    elif p == 2:
        pass
    else:
        raise ValueError("requires p in {0, 2}")
    g1 = tf_build_mixed(params.with_gain(1.0))
    if p == 2 and count_unstable_shifted_poles(g1, lam) != 2:
        raise ValueError("wrong shifted inertia")
    if grid is None:
        grid = FrequencyGrid.for_params(params)
    min_re, _ = min_real_part(g1, lam, grid)
    if min_re >= 0.0:
        return math.inf
    return -1.0 / min_re


def check_p_dominance(g: RationalTF, lam: float, K, p: int,
                      grid: FrequencyGrid | None = None) -> DominanceCertificate:
    """Three-condition circle-criterion check; failures are encoded, not raised.

    K is a positive sector bound or :data:`INFINITE_SECTOR`.  With a finite
    sector the Nyquist condition is strict (min_re > -1/K plus a 1e-12
    margin); with the infinite sector it relaxes to min_re >= 0.
    """
    if K != INFINITE_SECTOR and not float(K) > 0.0:
        raise ValueError("requires K > 0 or the infinite-sector tag")
    poles = g.poles()
    cond1 = all(abs(pl.real + lam) >= _AXIS_TOL for pl in poles)
    n_unstable = sum(1 for pl in poles if pl.real > -lam)
    cond2 = n_unstable == p
    if cond1:
        min_re, w_at = min_real_part(g, lam, grid)
    else:
        min_re, w_at = math.nan, math.nan
    if K == INFINITE_SECTOR:
        line = 0.0
        cond3 = min_re >= 0.0
    else:
        line = -1.0 / float(K)
        cond3 = min_re > line + _STRICT_MARGIN
    margin = min_re - line
    if math.isnan(min_re):
        crit = math.nan
    elif min_re >= 0.0:
        crit = math.inf
    else:
        crit = -1.0 / min_re
    return DominanceCertificate(
        p=p, rate=lam, min_re=min_re, omega_at_min=w_at, critical_gain=crit,
        conditions=(cond1, cond2, bool(cond3)), passed=bool(cond1 and cond2 and cond3),
        sector=K, margin=margin,
    )


def check_p_passivity(g: RationalTF, lam: float, p: int,
                      grid: FrequencyGrid | None = None) -> DominanceCertificate:
    """Positive-realness check of the shifted transfer function (K infinite)."""
    return check_p_dominance(g, lam, INFINITE_SECTOR, p, grid)


def nyquist_locus(g: RationalTF, lam: float, grid: FrequencyGrid
                  ) -> list[LocusPoint]:
    """Samples of G(jw - lambda) over the grid, omega ascending.

    Only w >= 0 is emitted (the locus at -w is the mirror image).  Samples
    whose denominator magnitude falls below evaluation tolerance are flagged
    ``near_pole`` and carry NaN values instead of raising.
    """
    _check_axis_clear(g, lam)
    shifted = tf_shift(g, lam)
    w = grid.omegas()
    s = 1j * w
    num_v = np.polynomial.polynomial.polyval(s, np.asarray(shifted.num.coeffs))
    den_v = np.polynomial.polynomial.polyval(s, np.asarray(shifted.den.coeffs))
    scale = np.polynomial.polynomial.polyval(
        np.abs(s), np.abs(np.asarray(shifted.den.coeffs)))
    near = np.abs(den_v) <= 1e-12 * np.maximum(scale, 1e-300)
    vals = np.where(near, np.nan + 0j, num_v / np.where(near, 1.0, den_v))
    return [
        LocusPoint(float(wi), float(v.real), float(v.imag), bool(fl))
        for wi, v, fl in zip(w, vals, near)
    ]
