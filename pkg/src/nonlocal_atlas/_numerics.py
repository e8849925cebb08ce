"""Scalar search helpers: golden-section, dense-scan extrema, root isolation."""
import math

import numpy as np
from scipy.optimize import brentq

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(func, lo, hi, xtol=1e-13, max_iters=200):
    """Maximize a unimodal scalar function on ``[lo, hi]``.

    Returns ``(x, f(x))``.
    """
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(max_iters):
        if abs(b - a) <= xtol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = func(d)
    if fc >= fd:
        return c, fc
    return d, fd


def dense_max(func, lo, hi, n=4096, endpoints=True):
    """Global maximum of ``func`` on ``[lo, hi]`` by scan plus golden refinement.

    ``func`` must accept arrays. With ``endpoints=False`` the scan is over
    the open interval, which avoids evaluating singular endpoints.
    """
    if endpoints:
        x = np.linspace(lo, hi, n)
    else:
        x = np.linspace(lo, hi, n + 2)[1:-1]
    y = np.asarray(func(x), dtype=float)
    y = np.where(np.isfinite(y), y, -np.inf)
    k = int(np.argmax(y))
    left = x[max(k - 1, 0)]
    right = x[min(k + 1, len(x) - 1)]
    if k in (0, len(x) - 1) and endpoints:
        return float(x[k]), float(y[k])

    def scalar(t):
        return float(func(np.array([t]))[0])

    xs, ys = golden_section_max(scalar, left, right)
    if ys >= y[k]:
        return float(xs), float(ys)
    return float(x[k]), float(y[k])


def dense_min(func, lo, hi, n=4096, endpoints=True):
    x, y = dense_max(lambda t: -np.asarray(func(t)), lo, hi, n, endpoints)
    return x, -y


def sign_change_roots(func, x, y=None, xtol=1e-14, rtol=4 * np.finfo(float).eps):
    """Roots of ``func`` bracketed by sign changes of samples ``y = func(x)``.

    Samples may be ``±inf``; a sample exactly equal to zero is reported as a
    root itself.
    """
    if y is None:
        y = np.asarray(func(x), dtype=float)
    roots = []
    s = np.sign(y)
    for k in range(len(x)):
        if s[k] == 0:
            roots.append(float(x[k]))
    for k in np.nonzero(s[:-1] * s[1:] < 0)[0]:
        a, b = float(x[k]), float(x[k + 1])
        if not (np.isfinite(y[k]) and np.isfinite(y[k + 1])):
            a, b = _shrink_infinite(func, a, b, y[k], y[k + 1])
            if a is None:
                continue
        roots.append(brentq(lambda t: float(func(np.array([t]))[0]), a, b, xtol=xtol, rtol=rtol))
    return sorted(roots)


def _shrink_infinite(func, a, b, ya, yb):
    # Move an infinite-valued end inward until the function is finite there.
    def first_finite(x0, x1):
        for frac in (1e-12, 1e-9, 1e-6, 1e-3, 0.1, 0.5):
            x = x0 + frac * (x1 - x0)
            y = float(func(np.array([x]))[0])
            if np.isfinite(y):
                return x, y
        return None, None

    if not np.isfinite(ya):
        a, ya = first_finite(a, b)
    if a is not None and not np.isfinite(yb):
        b, yb = first_finite(b, a)
    if a is None or b is None or np.sign(ya) * np.sign(yb) >= 0:
        return None, None
    return a, b


def bisect_increasing(func, target, lo, hi, rtol=1e-13, max_iters=200):
    """Vectorized bisection for ``func(x) = target`` with ``func`` increasing.

    ``target``, ``lo`` and ``hi`` broadcast together; ``func`` must accept
    arrays and be increasing on ``[lo, hi]`` elementwise.
    """
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    for _ in range(max_iters):
        mid = 0.5 * (lo + hi)
        below = func(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= rtol * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (lo + hi)
