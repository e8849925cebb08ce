"""Tabulated Q(s) = g(w_s) over the admissible s-range.

Samples are placed uniformly in a mapped coordinate that sends the open
admissible interval (L, U) onto the real line,

    t = log(s - L)                  if U is infinite,
    t = log(s - L) - log(U - s)     otherwise,

and the interpolant works with log Q as a function of t. For the
homogeneous power case log Q is exactly affine in t, and near a finite
lower endpoint Q vanishes like a power of s - L, so the same coordinate
also gives sensible linear extrapolation.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import expit

from ._numerics import bisect_increasing
from .aux_solver import S_MARGIN, admissible_s_range, solve_auxiliary
from .errors import ConvergenceError, DomainError, NotMonotoneError, ParameterError
from .model import eval_functional

__all__ = [
    "QTable",
    "tabulate_q",
    "q_eval",
    "q_eval_extended",
    "q_inverse",
    "certify_monotone",
    "to_t",
    "from_t",
    "MIN_SAMPLES",
]

MIN_SAMPLES = 16
DEFAULT_SAMPLES = 64
DEFAULT_SPAN = 6.0
MAX_SEARCH_STEPS = 200


def to_t(s, lo, hi):
    s = np.asarray(s, dtype=float)
    if math.isinf(hi):
        return np.log(s - lo)
    return np.log(s - lo) - np.log(hi - s)


def from_t(t, lo, hi):
    t = np.asarray(t, dtype=float)
    if math.isinf(hi):
        return lo + np.exp(t)
    return lo + (hi - lo) * expit(t)


@dataclass(frozen=True, eq=False)
class QTable:
    """Sampled graph of Q with its interpolant.

    ``lo`` and ``hi`` are the admissible endpoints (``hi`` may be ``inf``);
    ``t`` holds the mapped sample coordinates. The interpolant is a
    monotone cubic of log Q in t when ``monotone`` is set, else
    piecewise linear.
    """

    s: np.ndarray
    q: np.ndarray
    lo: float
    hi: float
    monotone: bool
    diagnostics: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if s.ndim != 1 or s.shape != q.shape or len(s) < 2:
            raise ParameterError("table needs matching 1-D sample arrays")
        if np.any(np.diff(s) <= 0):
            raise ParameterError("table s-samples must be strictly increasing")
        if np.any(q <= 0):
            raise ParameterError("table Q-samples must be positive")
        if s[0] <= self.lo or s[-1] >= self.hi:
            raise ParameterError("table samples must lie inside the admissible range")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "q", q)

    @classmethod
    def from_samples(cls, s, q, lo=0.0, hi=math.inf, **kwargs):
        """Table from given samples; the monotone flag is computed."""
        q = np.asarray(q, dtype=float)
        return cls(s=s, q=q, lo=lo, hi=hi, monotone=bool(np.all(np.diff(q) > 0)), **kwargs)

    @property
    def t(self):
        return to_t(self.s, self.lo, self.hi)

    @property
    def logq(self):
        return np.log(self.q)

    @property
    def s_hull(self):
        return float(self.s[0]), float(self.s[-1])

    @property
    def q_hull(self):
        return float(self.q[0]), float(self.q[-1])

    def _interp(self):
        cached = self.__dict__.get("_interp_cache")
        if cached is None:
            if self.monotone:
                cached = PchipInterpolator(self.t, self.logq, extrapolate=False)
            else:
                t, y = self.t, self.logq
                cached = lambda x: np.interp(x, t, y)
            self.__dict__["_interp_cache"] = cached
        return cached

    def logq_at_t(self, t):
        """log Q at mapped coordinates, linearly extrapolated outside the hull."""
        t = np.asarray(t, dtype=float)
        ts, ys = self.t, self.logq
        out = np.empty_like(t)
        left = t < ts[0]
        right = t > ts[-1]
        mid = ~(left | right)
        out[mid] = self._interp()(t[mid])
        k0 = (ys[1] - ys[0]) / (ts[1] - ts[0])
        k1 = (ys[-1] - ys[-2]) / (ts[-1] - ts[-2])
        out[left] = ys[0] + k0 * (t[left] - ts[0])
        out[right] = ys[-1] + k1 * (t[right] - ts[-1])
        return out


def q_eval(table, s):
    """Interpolated Q(s); exact at samples. Raises outside the sampled hull."""
    s = np.asarray(s, dtype=float)
    a, b = table.s_hull
    if np.any(s < a) or np.any(s > b):
        raise DomainError(f"s outside the sampled hull [{a}, {b}]")
    out = np.exp(table.logq_at_t(to_t(np.atleast_1d(s), table.lo, table.hi)))
    # pin exact sample values against roundoff in the mapped coordinate
    idx = np.searchsorted(table.s, np.atleast_1d(s))
    hit = (idx < len(table.s)) & (table.s[np.minimum(idx, len(table.s) - 1)] == np.atleast_1d(s))
    out[hit] = table.q[idx[hit]]
    return out.reshape(s.shape) if s.ndim else float(out[0])


def q_eval_extended(table, s):
    """Q(s) on the whole admissible range.

    Inside the hull this is :func:`q_eval`; outside, log Q is extended
    linearly in the mapped coordinate. Values at or beyond the admissible
    endpoints follow the limits (0 at a finite lower end, ∞ at the upper).
    """
    s = np.asarray(s, dtype=float)
    flat = np.atleast_1d(s).astype(float)
    out = np.empty_like(flat)
    below = flat <= table.lo
    above = flat >= table.hi
    inside = ~(below | above)
    out[below] = 0.0
    out[above] = np.inf
    with np.errstate(over="ignore"):
        out[inside] = np.exp(table.logq_at_t(to_t(flat[inside], table.lo, table.hi)))
    return out.reshape(s.shape) if s.ndim else float(out[0])


def q_inverse(table, alpha, extrapolate=False):
    """s with Q(s) = alpha, by bisection on the monotone interpolant.

    Without ``extrapolate`` alpha must lie in the sampled Q-hull.
    """
    if not table.monotone:
        raise NotMonotoneError("Q table is not monotone; inverse is undefined")
    alpha = np.asarray(alpha, dtype=float)
    flat = np.atleast_1d(alpha)
    if np.any(flat <= 0):
        raise DomainError("q_inverse needs alpha > 0")
    qa, qb = table.q_hull
    if not extrapolate and (np.any(flat < qa) or np.any(flat > qb)):
        raise DomainError(f"alpha outside the sampled Q-hull [{qa}, {qb}]")
    ts, ys = table.t, table.logq
    y = np.log(flat)
    t = np.empty_like(y)
    left = y < ys[0]
    right = y > ys[-1]
    mid = ~(left | right)
    k0 = (ys[1] - ys[0]) / (ts[1] - ts[0])
    k1 = (ys[-1] - ys[-2]) / (ts[-1] - ts[-2])
    t[left] = ts[0] + (y[left] - ys[0]) / k0
    t[right] = ts[-1] + (y[right] - ys[-1]) / k1
    if np.any(mid):
        t[mid] = bisect_increasing(table.logq_at_t, y[mid], ts[0], ts[-1], rtol=1e-14)
    out = from_t(t, table.lo, table.hi)
    # exact sample values map back to their samples
    for j in np.nonzero(mid)[0]:
        k = np.searchsorted(table.q, flat[j])
        if k < len(table.q) and table.q[k] == flat[j]:
            out[j] = table.s[k]
    return out.reshape(alpha.shape) if alpha.ndim else float(out[0])


def certify_monotone(table):
    """Strict-increase check on the samples.

    Returns ``{"monotone": bool, "violation": None or {...}}`` where the
    violation names the first sample pair that fails to increase.
    """
    d = np.diff(table.q)
    bad = np.nonzero(d <= 0)[0]
    if len(bad) == 0:
        return {"monotone": True, "violation": None}
    j = int(bad[0])
    return {
        "monotone": False,
        "violation": {
            "index": j,
            "s": [float(table.s[j]), float(table.s[j + 1])],
            "q": [float(table.q[j]), float(table.q[j + 1])],
        },
    }


def _t_limits(lo, hi, margin):
    """Mapped coordinates of the margin-respecting s limits."""
    if lo > 0:
        t_min = float(to_t(lo * (1 + margin), lo, hi))
    else:
        t_min = -np.inf
    if math.isinf(hi):
        t_max = np.inf
    else:
        t_max = float(to_t(hi * (1 - margin), lo, hi))
    return t_min, t_max


def tabulate_q(
    mesh,
    nl,
    g,
    n=DEFAULT_SAMPLES,
    q_low=None,
    q_high=None,
    t_span=None,
    threads=1,
    margin=S_MARGIN,
    **solver_options,
):
    """Tabulate Q(s) = g(w_s) on ``n`` samples.

    The sampled s-range is found by stepping the mapped coordinate outward
    from its centre until ``Q < q_low`` at the low end and ``Q > q_high``
    at the high end. An unset target means a fixed span of ``t_span``
    (default 6) on that side. Exhausting the admissible margin before a
    target is met raises :class:`ConvergenceError`.

    ``solver_options`` are passed to :func:`solve_auxiliary`; the downward
    uniqueness pass is off by default here.
    """
    n = int(n)
    if n < MIN_SAMPLES:
        raise ParameterError(f"need at least {MIN_SAMPLES} samples, got {n}")
    lam1 = mesh.eigenpair.eigenvalue
    lo, hi = admissible_s_range(nl, lam1)
    solver_options.setdefault("check_uniqueness", False)
    cache = {}

    def solve_at(t):
        key = float(t)
        if key not in cache:
            s = float(from_t(key, lo, hi))
            sol = solve_auxiliary(mesh, nl, s, margin=margin, **solver_options)
            cache[key] = (s, eval_functional(g, sol.w, mesh, aux=sol.aux), sol)
        return cache[key]

    t_min, t_max = _t_limits(lo, hi, margin * 1.01)
    if math.isinf(hi):
        centre = 0.0 if lo == 0 else math.log(lo)
    else:
        centre = 0.0
    span = DEFAULT_SPAN if t_span is None else float(t_span)
    t_lo = _search_end(solve_at, centre, -1, q_low, span, t_min)
    t_hi = _search_end(solve_at, centre, +1, q_high, span, t_max)

    grid = np.linspace(t_lo, t_hi, n)
    todo = [t for t in grid if float(t) not in cache]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            results = list(pool.map(lambda t: (float(t), _solve_raw(mesh, nl, g, lo, hi, t, margin, solver_options)), todo))
        for key, val in results:
            cache[key] = val
    else:
        for t in todo:
            solve_at(t)
    rows = [cache[float(t)] for t in grid]
    s = np.array([r[0] for r in rows])
    q = np.array([r[1] for r in rows])
    diags = tuple(
        {"s": r[0], "Q": r[1], "residual": r[2].residual_inf, "energy": r[2].energy}
        for r in rows
    )
    meta = {
        "lambda1": lam1,
        "range": [lo, hi],
        "functional": g.kind,
        "nonlinearity": nl.kind,
        "samples": n,
        "t_range": [float(t_lo), float(t_hi)],
    }
    if np.any(q <= 0):
        raise ConvergenceError("nonpositive Q sample; the functional vanished on w_s")
    return QTable(
        s=s,
        q=q,
        lo=lo,
        hi=hi,
        monotone=bool(np.all(np.diff(q) > 0)),
        diagnostics=diags,
        meta=meta,
    )


def _solve_raw(mesh, nl, g, lo, hi, t, margin, options):
    s = float(from_t(float(t), lo, hi))
    sol = solve_auxiliary(mesh, nl, s, margin=margin, **options)
    return s, eval_functional(g, sol.w, mesh, aux=sol.aux), sol


def _search_end(solve_at, centre, direction, target, span, limit):
    if target is None:
        t = centre + direction * span
        if direction < 0:
            return max(t, limit)
        return min(t, limit)
    # the two searches start half a unit apart so the sampled range is never empty
    t = centre + 0.5 * direction
    step = 1.0
    for _ in range(MAX_SEARCH_STEPS):
        q = solve_at(t)[1]
        if (direction < 0 and q < target) or (direction > 0 and q > target):
            return t
        nxt = t + direction * step
        if (direction < 0 and nxt < limit) or (direction > 0 and nxt > limit):
            if t == limit:
                break
            nxt = limit
        t = nxt
    side = "lower" if direction < 0 else "upper"
    raise ConvergenceError(f"could not reach Q target {target:g} at the {side} end of the s-range")
