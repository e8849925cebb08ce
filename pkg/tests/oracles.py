"""Reference values computed independently of the package.

Nothing here imports nonlocal_atlas: these are closed forms, series and
ODE shooting used to freeze expected values.
"""
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import beta as beta_fn


def fd_eigenvalue_1d(n, length=1.0):
    """Smallest eigenvalue of the 3-point Dirichlet Laplacian."""
    h = length / (n + 1)
    return 4.0 / h**2 * math.sin(math.pi * h / (2 * length)) ** 2


def torsion_square_centre(terms=401):
    """v(1/2, 1/2) for -Δv = 1 on the unit square, double sine series."""
    total = 0.0
    for m in range(1, terms, 2):
        for k in range(1, terms, 2):
            sign = (-1) ** ((m - 1) // 2 + (k - 1) // 2)
            total += sign / (m * k * (m * m + k * k))
    return 16.0 / math.pi**4 * total


def lane_emden_max(p, length=1.0):
    """max v for -v'' = v^(p-1) on (0, length), from the first integral.

    With r = p the half-length equals m^((2-p)/2) sqrt(p/2) B(1/p, 1/2)/p.
    """
    K = math.sqrt(p / 2.0) * beta_fn(1.0 / p, 0.5) / p
    return (length / (2.0 * K)) ** (2.0 / (2.0 - p))


def lane_emden_profile(p, x, length=1.0):
    """Shoot from the centre with v'(L/2) = 0 and integrate outward."""
    m = lane_emden_max(p, length)

    def rhs(_, y):
        return [y[1], -max(y[0], 0.0) ** (p - 1)]

    xs = np.abs(np.asarray(x, dtype=float) - length / 2)
    uniq, inverse = np.unique(xs, return_inverse=True)
    sol = solve_ivp(rhs, (0.0, length / 2), [m, 0.0], t_eval=uniq, rtol=1e-12, atol=1e-14)
    return sol.y[0][inverse]


def brute_max(a, lo, hi, n=1_000_000):
    x = np.linspace(lo, hi, n)
    return float(np.max(a(x)))


def sin_level_crossings(level, k):
    """Points in (kπ, (k+1)π) where |sin α| = level (0 < level < 1)."""
    r = math.asin(level)
    return k * math.pi + r, (k + 1) * math.pi - r


def polynomial_real_roots(coefficients_ascending, lo, hi):
    roots = np.roots(list(reversed(coefficients_ascending)))
    real = sorted(r.real for r in roots if abs(r.imag) < 1e-6 and lo - 1e-9 <= r.real <= hi + 1e-9)
    merged = []
    for r in real:
        if merged and abs(r - merged[-1]) < 1e-5:
            merged[-1] = 0.5 * (merged[-1] + r)
        else:
            merged.append(r)
    return merged


def scalar_root(func, lo, hi):
    return brentq(func, lo, hi, xtol=1e-15, rtol=1e-15)
