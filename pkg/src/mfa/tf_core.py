"""Real-coefficient polynomials, rational transfer functions, amplifier parameters.

Coefficients are stored in ascending degree and trailing zeros are stripped,
so the degree is always implied by the length.  All types are immutable
values and all operations are pure functions; no implicit pole/zero
cancellation is ever performed (``tf_cancel`` exists as an explicit,
tolerance-parameterized utility and is never called by the analyses).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "INFINITE_ZERO",
    "MAX_ROOT_DEGREE",
    "AmplifierParams",
    "Polynomial",
    "RationalTF",
    "get_nonlinearity",
    "poly_roots",
    "tf_build_mixed",
    "tf_cancel",
    "tf_eval",
    "tf_multiply",
    "tf_shift",
    "tf_zero_mixed",
]

#: Tag returned by :func:`tf_zero_mixed` when the numerator degenerates to a
#: constant and the open-loop zero escapes to infinity.
INFINITE_ZERO = "infinite"

#: Companion-matrix root finding is only trusted up to this degree.
MAX_ROOT_DEGREE = 32


def _poly_add(a, b):
    n = max(len(a), len(b))
    return [
        (a[i] if i < len(a) else 0.0) + (b[i] if i < len(b) else 0.0)
        for i in range(n)
    ]


def _poly_mul(a, b):
    return list(np.convolve(a, b))


@dataclass(frozen=True, init=False)
class Polynomial:
    """Real polynomial with ascending-degree coefficients.

    The zero polynomial is canonically ``(0.0,)``; any other polynomial has a
    nonzero leading (last) coefficient after construction.
    """

    coeffs: tuple[float, ...]

    def __init__(self, coeffs):
        cs = [float(c) for c in coeffs]
        while len(cs) > 1 and cs[-1] == 0.0:
            cs.pop()
        if not cs:
            cs = [0.0]
        object.__setattr__(self, "coeffs", tuple(cs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    @property
    def leading(self) -> float:
        return self.coeffs[-1]

    def __call__(self, s):
        """Evaluate by Horner's rule (exact polynomial arithmetic)."""
        acc = 0.0 + 0.0j if isinstance(s, complex) else 0.0
        for c in reversed(self.coeffs):
            acc = acc * s + c
        return acc

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(_poly_add(self.coeffs, other.coeffs))

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(_poly_mul(self.coeffs, other.coeffs))
        return Polynomial([float(other) * c for c in self.coeffs])

    __rmul__ = __mul__

    def shifted(self, lam: float) -> "Polynomial":
        """Coefficients of p(s - lam), by binomial re-expansion."""
        out = [0.0]
        power = [1.0]  # (s - lam)**k, ascending
        for a in self.coeffs:
            out = _poly_add(out, [a * c for c in power])
            power = _poly_mul(power, [-lam, 1.0])
        return Polynomial(out)

    @classmethod
    def from_roots(cls, roots, leading: float = 1.0) -> "Polynomial":
        """Monic-expand the given roots, then scale by ``leading``.

        Complex roots must come in conjugate pairs; a residual imaginary
        part above 1e-8 of the coefficient scale is an error.
        """
        acc = np.array([1.0 + 0.0j])
        for r in roots:
            acc = np.convolve(acc, np.array([-complex(r), 1.0 + 0.0j]))
        scale = max(1.0, float(np.max(np.abs(acc))))
        if float(np.max(np.abs(acc.imag))) > 1e-8 * scale:
            raise ValueError("roots do not form conjugate pairs")
        return cls([leading * float(c) for c in acc.real])


def poly_roots(p: Polynomial, tol: float = 1e-8) -> list[complex]:
    """All roots of ``p`` (with multiplicity) via companion-matrix eigenvalues.

    Roots are ordered by ascending real part, then ascending imaginary part,
    which places each conjugate pair adjacently.  The scaled residual
    ``|p(root)| / sum_k |a_k| |root|^k`` is checked against ``tol``.
    """
    if p.is_zero:
        raise ValueError("degenerate polynomial")
    if p.degree == 0:
        return []
    if p.degree > MAX_ROOT_DEGREE:
        raise ValueError(f"polynomial degree {p.degree} above supported cap {MAX_ROOT_DEGREE}")
    raw = np.roots(p.coeffs[::-1])
    roots = []
    for z in raw:
        z = complex(z)
        if z.imag != 0.0 and abs(z.imag) <= 1e-12 * (1.0 + abs(z)):
            z = complex(z.real, 0.0)
        roots.append(z)
    roots.sort(key=lambda z: (z.real, z.imag))
    for z in roots:
        scale = sum(abs(c) * abs(z) ** k for k, c in enumerate(p.coeffs))
        if abs(p(z)) > tol * max(scale, 1e-300):
            raise ArithmeticError("root residual above tolerance")
    return roots


@dataclass(frozen=True)
class RationalTF:
    """Proper rational transfer function num(s)/den(s), real coefficients."""

    num: Polynomial
    den: Polynomial

    def __post_init__(self):
        if self.den.is_zero:
            raise ValueError("zero denominator")
        if not self.num.is_zero and self.num.degree > self.den.degree:
            raise ValueError("improper transfer function")

    def poles(self) -> list[complex]:
        return poly_roots(self.den)

    def zeros(self) -> list[complex]:
        if self.num.is_zero or self.num.degree == 0:
            return []
        return poly_roots(self.num)

    @property
    def is_biproper(self) -> bool:
        return self.num.degree == self.den.degree and not self.num.is_zero

    def __call__(self, s):
        return tf_eval(self, s)

    def __mul__(self, other: "RationalTF") -> "RationalTF":
        return tf_multiply(self, other)

    def as_dict(self) -> dict:
        return {"num": list(self.num.coeffs), "den": list(self.den.coeffs)}

    @classmethod
    def from_dict(cls, d: dict) -> "RationalTF":
        return cls(Polynomial(d["num"]), Polynomial(d["den"]))


def _tanh_slope(y: float) -> float:
    t = math.tanh(y)
    return 1.0 - t * t


def _atan_phi(y: float) -> float:
    return (2.0 / math.pi) * math.atan(math.pi * y / 2.0)


def _atan_slope(y: float) -> float:
    return 1.0 / (1.0 + (math.pi * y / 2.0) ** 2)


#: Saturation nonlinearities: tag -> (phi, phi').  Every entry is a strictly
#: increasing odd sigmoid with |phi| <= 1 and slope in [0, 1].
_NONLINEARITIES = {
    "tanh": (math.tanh, _tanh_slope),
    "atan": (_atan_phi, _atan_slope),
}


def get_nonlinearity(tag: str):
    """Return the (phi, dphi) pair registered under ``tag``."""
    try:
        return _NONLINEARITIES[tag]
    except KeyError:
        raise ValueError(f"unknown nonlinearity {tag!r}") from None


@dataclass(frozen=True)
class AmplifierParams:
    """Parameter set of the mixed feedback amplifier.

    tau_l, tau_p, tau_n are the load, positive-channel and negative-channel
    time constants (seconds); k >= 0 is the collective feedback gain and
    beta in [0, 1] the positive/negative balance.  The positive channel must
    be strictly faster than the negative one (tau_p < tau_n) and the load
    time constant must differ from both.
    """

    tau_l: float
    tau_p: float
    tau_n: float
    k: float
    beta: float
    nonlinearity: str = "tanh"

    def __post_init__(self):
        for name in ("tau_l", "tau_p", "tau_n"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"requires {name} > 0")
        if not self.tau_p < self.tau_n:
            raise ValueError("requires tau_p < tau_n")
        if self.tau_l == self.tau_p or self.tau_l == self.tau_n:
            raise ValueError("requires tau_l distinct from tau_p and tau_n")
        if not self.k >= 0.0:
            raise ValueError("requires k >= 0")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("requires 0 <= beta <= 1")
        get_nonlinearity(self.nonlinearity)

    @property
    def taus(self) -> tuple[float, float, float]:
        return (self.tau_l, self.tau_p, self.tau_n)

    @property
    def phi(self):
        return get_nonlinearity(self.nonlinearity)[0]

    @property
    def dphi(self):
        return get_nonlinearity(self.nonlinearity)[1]

    def with_gain(self, k: float) -> "AmplifierParams":
        return replace(self, k=k)


def tf_build_mixed(params: AmplifierParams) -> RationalTF:
    """Open-loop transfer function u -> y of the mixed feedback amplifier.

    num = -k[(beta(tau_n+tau_p) - tau_p) s + (2 beta - 1)],
    den = (tau_l s + 1)(tau_p s + 1)(tau_n s + 1);
    the DC value is k(1 - 2 beta).
    """
    tl, tp, tn = params.taus
    k, beta = params.k, params.beta
    num = Polynomial([-k * (2.0 * beta - 1.0), -k * (beta * (tn + tp) - tp)])
    den = Polynomial([1.0, tl]) * Polynomial([1.0, tp]) * Polynomial([1.0, tn])
    return RationalTF(num, den)


def tf_shift(g: RationalTF, lam: float) -> RationalTF:
    """Substitute s <- s - lam; every pole and zero translates by +lam."""
    return RationalTF(g.num.shifted(lam), g.den.shifted(lam))


def tf_zero_mixed(params: AmplifierParams):
    """Open-loop zero location (2b-1)/(b(tau_p+tau_n)-tau_p).

    Returns :data:`INFINITE_ZERO` when the balance sits (to a few ulps) at
    the critical value tau_p/(tau_p+tau_n), where the numerator degenerates
    to a constant and the zero escapes to infinity.
    """
    if not params.k > 0.0:
        raise ValueError("requires k > 0")
    tp, tn, beta = params.tau_p, params.tau_n, params.beta
    d = beta * (tp + tn) - tp
    if abs(d) <= 1e-14 * (abs(beta) * (tp + tn) + tp):
        return INFINITE_ZERO
    return (2.0 * beta - 1.0) / d


def tf_multiply(a: RationalTF, b: RationalTF) -> RationalTF:
    """Product a*b over the product denominators; no cancellation."""
    return RationalTF(a.num * b.num, a.den * b.den)


def tf_eval(g: RationalTF, s: complex, tol: float = 1e-12) -> complex:
    """num(s)/den(s) by Horner evaluation; raises near a pole."""
    s = complex(s)
    den_v = g.den(s)
    scale = sum(abs(c) * abs(s) ** k for k, c in enumerate(g.den.coeffs))
    if abs(den_v) <= tol * max(scale, 1e-300):
        raise ArithmeticError("pole proximity")
    return g.num(s) / den_v


def tf_cancel(g: RationalTF, tol: float) -> RationalTF:
    """Remove pole/zero pairs closer than ``tol`` (relative to magnitude).

    Explicit utility only: no analysis in this package calls it.
    """
    if g.num.is_zero or g.num.degree == 0:
        return g
    zs = g.zeros()
    ps = g.poles()
    kept_p = list(ps)
    kept_z = []
    for z in zs:
        hit = None
        for i, p in enumerate(kept_p):
            if abs(z - p) <= tol * max(1.0, abs(p)):
                hit = i
                break
        if hit is None:
            kept_z.append(z)
        else:
            kept_p.pop(hit)
    num = Polynomial.from_roots(kept_z, leading=g.num.leading)
    den = Polynomial.from_roots(kept_p, leading=g.den.leading)
    return RationalTF(num, den)
