"""Shared test oracles, independent of the code paths they check."""

from __future__ import annotations

import os

import numpy as np

from mfa.tf_core import RationalTF, tf_shift

RECIPES_DIR = os.path.join(os.path.dirname(__file__), "..", "recipes")


def brute_min_re(g: RationalTF, lam: float, omega_lo: float, omega_hi: float,
                 n: int = 10**6) -> float:
    """Dense uniform-log sweep minimum of Re G(jw - lam), plus the w=0 and
    w->infinity candidates.  Plain vectorized evaluation; no refinement."""
    gs = tf_shift(g, lam)
    w = np.geomspace(omega_lo, omega_hi, n)
    s = 1j * w
    num = np.polynomial.polynomial.polyval(s, np.asarray(gs.num.coeffs))
    den = np.polynomial.polynomial.polyval(s, np.asarray(gs.den.coeffs))
    vals = np.real(num / den)
    cands = [float(np.min(vals))]
    cands.append((gs.num(0j) / gs.den(0j)).real)
    if g.num.degree == g.den.degree and not g.num.is_zero:
        cands.append(g.num.leading / g.den.leading)
    else:
        cands.append(0.0)
    return min(cands)


def bisect_root(f, lo: float, hi: float, iters: int = 200) -> float:
    """Plain bisection; requires a sign change on [lo, hi]."""
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (flo < 0.0) != (fm < 0.0):
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def random_proper_tf(rng: np.random.Generator, max_deg: int = 6) -> RationalTF:
    """Random proper transfer function with O(1) coefficients."""
    from mfa.tf_core import Polynomial

    nd = int(rng.integers(1, max_deg + 1))
    nn = int(rng.integers(0, nd + 1))
    den = rng.uniform(-2.0, 2.0, nd + 1)
    den[-1] = rng.uniform(0.5, 2.0) * (1 if rng.uniform() < 0.5 else -1)
    num = rng.uniform(-2.0, 2.0, nn + 1)
    if abs(num[-1]) < 0.1:
        num[-1] = 0.5
    return RationalTF(Polynomial(num), Polynomial(den))


def fd_jacobian(field, state, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of a vector field at one state."""
    state = np.asarray(state, dtype=float)
    n = len(state)
    out = np.empty((n, n))
    for j in range(n):
        dp = state.copy()
        dm = state.copy()
        h = eps * max(1.0, abs(state[j]))
        dp[j] += h
        dm[j] -= h
        out[:, j] = (np.asarray(field(dp)) - np.asarray(field(dm))) / (2.0 * h)
    return out
