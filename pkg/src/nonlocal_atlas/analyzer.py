"""Scalar fixed-point analysis of the nonlocal problem on one window of a.

For a window (t_i, t_{i+1}) and λ > 0 the nonlocal problem has a solution
with g(u) = α exactly when P(α) = Q(λ / a(α)) equals α. Everything here
works with the tabulated Q: the admissible set where λ/a(α) is a valid
auxiliary parameter, the gap function T = P - id and its infimum c(λ),
the thresholds where c changes sign, and the fixed points themselves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ._numerics import dense_max, dense_min, golden_section_max, sign_change_roots
from .aux_solver import admissible_s_range, solve_auxiliary
from .errors import DomainError, GMismatchError, NotMonotoneError
from .model import eval_functional
from .qmap import q_eval_extended, q_inverse, tabulate_q

__all__ = [
    "Interval",
    "AdmissibleSet",
    "AnalysisContext",
    "FixedPoint",
    "SolutionRecord",
    "ThresholdResult",
    "WindowReport",
    "OscillationReport",
    "build_context",
    "admissible_set",
    "p_eval",
    "t_eval",
    "c_of_lambda",
    "thresholds",
    "find_fixed_points",
    "reconstruct_solution",
    "analyze_window",
    "oscillation_analysis",
    "h_eval",
]

N_SET = 4096
N_C = 4096
N_FIX = 8192
N_OSC = 16384
N_LAMBDA = 128
TOL_T = 1e-9
TOL_TANGENT = 1e-6
TOL_G = 1e-6
POLISH_RADIUS = 1e-3

COERCIVE = "inf"
VANISHING = "0"


@dataclass(frozen=True)
class Interval:
    """Maximal interval of the admissible set.

    ``left`` and ``right`` say which level the endpoint sits on: ``"inf"``
    for the lower level (a window zero or a θ-level crossing, where P blows
    up) and ``"0"`` for the β-level, where P vanishes.
    """

    lo: float
    hi: float
    left: str
    right: str

    @property
    def type(self):
        return f"{self.left}-{self.right}"

    def as_dict(self):
        return {"lo": self.lo, "hi": self.hi, "type": self.type}


@dataclass(frozen=True)
class AdmissibleSet:
    window: int
    bounds: tuple
    lam: float
    theta_level: float
    beta_level: float
    intervals: tuple

    @property
    def empty(self):
        return not self.intervals

    @property
    def all_coercive(self):
        return bool(self.intervals) and all(iv.type == "inf-inf" for iv in self.intervals)

    def contains(self, alpha, closed=True):
        """Membership in the set, or in its closure at β-level endpoints."""
        for iv in self.intervals:
            lo_ok = alpha > iv.lo or (closed and iv.left == VANISHING and alpha >= iv.lo)
            hi_ok = alpha < iv.hi or (closed and iv.right == VANISHING and alpha <= iv.hi)
            if lo_ok and hi_ok:
                return True
        return False


@dataclass(frozen=True, eq=False)
class AnalysisContext:
    """Immutable bundle of mesh, models and the tabulated Q."""

    mesh: object
    nl: object
    coef: object
    g: object
    table: object
    solver_options: dict = field(default_factory=dict)

    @property
    def lam1(self):
        return self.mesh.eigenpair.eigenvalue

    @property
    def s_range(self):
        return admissible_s_range(self.nl, self.lam1)

    def P(self, lam, alpha):
        """P(α) = Q(λ/a(α)) with its limits: 0 at the β-level, ∞ at the θ-level."""
        alpha = np.asarray(alpha, dtype=float)
        a = self.coef(alpha)
        with np.errstate(divide="ignore"):
            s = np.where(a > 0, lam / np.where(a > 0, a, 1.0), np.inf)
        return q_eval_extended(self.table, s)

    def T(self, lam, alpha):
        return self.P(lam, alpha) - np.asarray(alpha, dtype=float)

    def exact_gap(self, lam, alpha):
        """g(w_s) - α with s = λ/a(α) from an actual auxiliary solve."""
        s = lam / float(self.coef(np.array([alpha]))[0])
        opts = dict(self.solver_options)
        opts.setdefault("check_uniqueness", False)
        sol = solve_auxiliary(self.mesh, self.nl, s, **opts)
        return eval_functional(self.g, sol.w, self.mesh, aux=sol.aux) - alpha


def build_context(mesh, nl, coef, g, windows=None, n_samples=64, threads=1, table=None, **solver_options):
    """Tabulate Q over the range the analysis of ``windows`` needs.

    The table reaches below ``1e-4 t_1`` and above ``1.5 t_k`` where
    ``t_k`` is the right end of the last window analysed.
    """
    if table is None:
        last = coef.n_windows - 1 if windows is None else max(windows)
        t1 = coef.zeros[1]
        tk = coef.zeros[last + 1]
        table = tabulate_q(
            mesh, nl, g, n=n_samples, q_low=1e-4 * t1, q_high=1.5 * tk, threads=threads, **solver_options
        )
    return AnalysisContext(mesh=mesh, nl=nl, coef=coef, g=g, table=table, solver_options=dict(solver_options))


# ---------------------------------------------------------------------------
# Admissible set
# ---------------------------------------------------------------------------


def admissible_set(coef, i, lam, nl, lam1, n=N_SET):
    """Maximal intervals of {α in window i : θλ/λ₁ < a(α) < βλ/λ₁}."""
    lo, hi = coef.window(i)
    lt = nl.theta * lam / lam1
    lb = math.inf if math.isinf(nl.beta) else nl.beta * lam / lam1
    empty = AdmissibleSet(i, (lo, hi), lam, lt, lb, ())
    if lam <= 0 or (nl.theta > 0 and lam >= coef.window_max[i] * lam1 / nl.theta):
        return empty
    x = np.linspace(lo, hi, n + 1)
    y = coef(x)
    inside = (y > lt) & (y < lb)
    # a vanishes at the window ends even when roundoff says otherwise
    inside[0] = inside[-1] = False
    y[0] = y[-1] = 0.0
    if not np.any(inside):
        return empty
    flips = np.nonzero(inside[1:] != inside[:-1])[0]
    edges = []
    for k in flips:
        k_out = k if not inside[k] else k + 1
        edges.append(_refine_edge(coef, x[k], x[k + 1], y[k_out], lt, lb))
    # window edges are never inside since a vanishes there, so flips pair up
    intervals = []
    for (a_lo, tag_lo), (a_hi, tag_hi) in zip(edges[0::2], edges[1::2]):
        intervals.append(Interval(a_lo, a_hi, tag_lo, tag_hi))
    return AdmissibleSet(i, (lo, hi), lam, lt, lb, tuple(intervals))


def _refine_edge(coef, x0, x1, y_out, lt, lb):
    if y_out <= lt:
        level, tag = lt, COERCIVE
    else:
        level, tag = lb, VANISHING
    f = lambda t: float(coef(np.array([t]))[0]) - level
    f0, f1 = f(x0), f(x1)
    if f0 == 0 or (tag == COERCIVE and level == 0 and x0 in coef.zeros):
        return x0, tag
    if f1 == 0 or (tag == COERCIVE and level == 0 and x1 in coef.zeros):
        return x1, tag
    return brentq(f, x0, x1, xtol=1e-13, rtol=4 * np.finfo(float).eps), tag


# ---------------------------------------------------------------------------
# P, T and c(λ)
# ---------------------------------------------------------------------------


def p_eval(lam, alpha, ctx, i=None):
    """P(α) at a point of the closed admissible set.

    Returns 0 at β-level points and ``inf`` at θ-level (coercive) points;
    raises :class:`DomainError` where λ/a(α) is below the admissible range
    by more than roundoff.
    """
    alpha = float(alpha)
    a = float(ctx.coef(np.array([alpha]))[0])
    lo, hi = ctx.s_range
    if a <= 0:
        return math.inf
    s = lam / a
    if s < lo * (1 - 1e-12):
        raise DomainError(f"alpha={alpha} is outside the closed admissible set")
    if s <= lo:
        return 0.0
    if s >= hi:
        return math.inf
    return float(q_eval_extended(ctx.table, s))


def t_eval(lam, alpha, ctx):
    return ctx.T(lam, alpha)


def c_of_lambda(lam, i, ctx, n=N_C):
    """Infimum of T(λ, ·) over the closed admissible set of window i.

    Returns ``(value, argmin)``; an empty set gives ``(inf, None)``.
    """
    D = admissible_set(ctx.coef, i, lam, ctx.nl, ctx.lam1)
    if D.empty:
        return math.inf, None
    best = (math.inf, None)
    T = lambda a: ctx.T(lam, a)
    for iv in D.intervals:
        x, v = dense_min(T, iv.lo, iv.hi, n=n, endpoints=True)
        if v < best[0]:
            best = (v, x)
    return float(best[0]), best[1]


# ---------------------------------------------------------------------------
# Thresholds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdResult:
    """First and last zero of c on window i.

    ``lambda0_monotone`` is max a(α)Q⁻¹(α) over the window when Q is
    monotone, else ``None``. ``note`` explains any missing value.
    """

    window: int
    lambda0: Optional[float]
    lambda0_tilde: Optional[float]
    bracket0: Optional[tuple]
    bracket_tilde: Optional[tuple]
    lambda0_monotone: Optional[float]
    argmax_monotone: Optional[float]
    grid: tuple = ()
    note: str = ""

    def as_dict(self):
        return {
            "lambda0": {"value": self.lambda0, "bracket": list(self.bracket0) if self.bracket0 else None},
            "lambda0_tilde": {
                "value": self.lambda0_tilde,
                "bracket": list(self.bracket_tilde) if self.bracket_tilde else None,
            },
            "lambda0_monotone": self.lambda0_monotone,
            "note": self.note,
        }


def h_eval(ctx, alpha):
    """H(α) = a(α) Q⁻¹(α); needs a monotone Q table."""
    alpha = np.asarray(alpha, dtype=float)
    return ctx.coef(alpha) * q_inverse(ctx.table, alpha, extrapolate=True)


def _lambda_span(i, ctx):
    """λ-interval whose ends have c < 0 and c > 0 (or the top of the range)."""
    A = ctx.coef.window_max[i]
    c = lambda lam: c_of_lambda(lam, i, ctx)[0]
    if ctx.nl.theta > 0:
        top = A * ctx.lam1 / ctx.nl.theta * (1 - 1e-9)
    else:
        top = A * ctx.table.s[-1]
        for _ in range(60):
            if c(top) > 0:
                break
            top *= 2.0
    bottom = top * 1e-3
    for _ in range(30):
        if c(bottom) < 0:
            break
        bottom *= 1e-2
    return bottom, top


def thresholds(i, ctx, n=N_LAMBDA, rtol=1e-8):
    """Bracket λ₀ (first zero of c) and λ̃₀ (last zero) on a geometric λ-grid."""
    bottom, top = _lambda_span(i, ctx)
    lams = np.geomspace(bottom, top, n)
    cs = np.array([c_of_lambda(lam, i, ctx)[0] for lam in lams])
    c = lambda lam: c_of_lambda(lam, i, ctx)[0]
    neg = cs < 0
    changes = np.nonzero(neg[:-1] & ~neg[1:])[0]
    if ctx.table.monotone:
        xm, hm = dense_max(lambda a: h_eval(ctx, a), *ctx.coef.window(i), n=N_C, endpoints=False)
    else:
        xm = hm = None
    grid = (tuple(float(v) for v in lams), tuple(float(v) for v in cs))
    if len(changes) == 0:
        note = "c < 0 on the whole grid" if np.all(neg) else "c >= 0 on the whole grid"
        return ThresholdResult(i, None, None, None, None, hm, xm, grid, note)

    def root(k):
        a, b = float(lams[k]), float(lams[k + 1])
        cb = cs[k + 1]
        if not np.isfinite(cb):
            # c jumps to +inf where the set empties; bisect on the sign instead
            for _ in range(200):
                m = 0.5 * (a + b)
                if c(m) < 0:
                    a = m
                else:
                    b = m
                if b - a <= rtol * b:
                    break
            return 0.5 * (a + b), (a, b)
        if cb == 0:
            return b, (a, b)
        r = brentq(c, a, b, rtol=rtol)
        return r, (a, b)

    l0, b0 = root(changes[0])
    lt, bt = root(changes[-1])
    return ThresholdResult(i, l0, lt, b0, bt, hm, xm, grid, "")


# ---------------------------------------------------------------------------
# Fixed points and solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FixedPoint:
    alpha: float
    tangential: bool
    t_value: float
    exact: bool = False

    def as_dict(self):
        return {"alpha": self.alpha, "tangential": self.tangential, "t_value": self.t_value}


def find_fixed_points(lam, i, ctx, n=N_FIX, exact=False, tol_tangent=TOL_TANGENT):
    """Fixed points of P on window i, in increasing order.

    Crossings are isolated by sign changes of T on ``n`` points per
    interval; touching points without a sign change are found by refining
    local minima of |T| and tagged ``tangential``. With ``exact`` each
    crossing is re-solved against actual auxiliary solves.
    """
    D = admissible_set(ctx.coef, i, lam, ctx.nl, ctx.lam1)
    out = []
    T = lambda a: ctx.T(lam, a)
    for iv in D.intervals:
        x = np.linspace(iv.lo, iv.hi, n)
        y = T(x)
        roots = sign_change_roots(T, x, y)
        for r in roots:
            tv = float(T(np.array([r]))[0])
            fp = FixedPoint(float(r), False, tv)
            if exact:
                fp = _polish(lam, fp, ctx)
            out.append(fp)
        out.extend(_tangential(T, x, y, roots, tol_tangent))
    out.sort(key=lambda fp: fp.alpha)
    return out


def _tangential(T, x, y, roots, tol):
    found = []
    ay = np.abs(np.where(np.isfinite(y), y, np.inf))
    s = np.sign(y)
    for k in range(1, len(x) - 1):
        if not (ay[k] <= ay[k - 1] and ay[k] <= ay[k + 1]):
            continue
        if s[k - 1] != s[k + 1] or s[k] == 0 or s[k - 1] != s[k]:
            continue
        sign = s[k]
        f = lambda t: -sign * float(T(np.array([t]))[0])
        xm, fm = golden_section_max(f, x[k - 1], x[k + 1])
        val = -sign * fm
        if abs(val) <= tol * (1 + abs(xm)) and not any(abs(xm - r) <= 2 * (x[1] - x[0]) for r in roots):
            found.append(FixedPoint(float(xm), True, float(val)))
    return found


def _polish(lam, fp, ctx, radius=POLISH_RADIUS):
    """Root of the exact gap g(w_{λ/a(α)}) - α near a table fixed point."""
    E = lambda a: ctx.exact_gap(lam, a)
    a0 = fp.alpha
    e0 = E(a0)
    if e0 == 0:
        return FixedPoint(a0, fp.tangential, 0.0, True)
    d = 1e-7 * (1 + a0)
    while d <= radius * (1 + a0):
        for b in (a0 - d, a0 + d):
            try:
                eb = E(b)
            except DomainError:
                continue
            if eb == 0:
                return FixedPoint(b, fp.tangential, 0.0, True)
            if np.sign(eb) != np.sign(e0):
                lo, hi = sorted((a0, b))
                r = brentq(E, lo, hi, xtol=1e-14 * (1 + a0), rtol=4 * np.finfo(float).eps)
                return FixedPoint(float(r), fp.tangential, float(E(r)), True)
        d *= 10.0
    raise GMismatchError(f"no exact fixed point within {radius:g} of alpha={a0}")


@dataclass(frozen=True, eq=False)
class SolutionRecord:
    """A solution u of the nonlocal problem rebuilt from a fixed point."""

    alpha: float
    s: float
    solution: object = field(repr=False)
    g_value: float
    g_residual: float
    pde_residual: float
    pde_scale: float
    tangential: bool = False

    @property
    def u(self):
        return self.solution.w

    @property
    def relative_pde_residual(self):
        return self.pde_residual / self.pde_scale if self.pde_scale > 0 else self.pde_residual

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "s": self.s,
            "tangential": self.tangential,
            "g_residual": self.g_residual,
            "pde_residual": self.pde_residual,
        }


def reconstruct_solution(lam, alpha, ctx, tol_g=TOL_G, refine=True, tangential=False):
    """Solve the auxiliary problem at s = λ/a(α*) and check it solves the nonlocal one.

    The g-check is ``|g(u) - α*| <= tol_g (1 + α*)``. On failure with
    ``refine`` the fixed point is re-solved once against exact auxiliary
    solves within a small radius; a remaining mismatch raises
    :class:`GMismatchError`.
    """
    alpha = float(alpha)
    rec = _reconstruct(lam, alpha, ctx, tangential)
    if rec.g_residual <= tol_g * (1 + alpha):
        return rec
    if refine:
        fp = _polish(lam, FixedPoint(alpha, tangential, math.nan), ctx)
        rec = _reconstruct(lam, fp.alpha, ctx, tangential)
        if rec.g_residual <= tol_g * (1 + fp.alpha):
            return rec
    raise GMismatchError(
        f"g(u) = {rec.g_value:.12g} differs from alpha = {alpha:.12g} by {rec.g_residual:.3e}"
    )


def _reconstruct(lam, alpha, ctx, tangential):
    a = float(ctx.coef(np.array([alpha]))[0])
    if a <= 0:
        raise DomainError(f"a vanishes at alpha={alpha}")
    s = lam / a
    sol = solve_auxiliary(ctx.mesh, ctx.nl, s, **ctx.solver_options)
    u = sol.w
    gu = eval_functional(ctx.g, u, ctx.mesh, aux=sol.aux)
    agu = float(ctx.coef(np.array([gu]))[0])
    rhs = lam * ctx.nl.f(u)
    res = float(np.max(np.abs(agu * (ctx.mesh.laplacian @ u) - rhs)))
    return SolutionRecord(
        alpha=alpha,
        s=s,
        solution=sol,
        g_value=gu,
        g_residual=abs(gu - alpha),
        pde_residual=res,
        pde_scale=float(np.max(np.abs(rhs))),
        tangential=tangential,
    )


# ---------------------------------------------------------------------------
# Window report
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WindowReport:
    window: int
    lam: float
    admissible: AdmissibleSet
    fixed_points: tuple
    solutions: tuple
    c_value: float
    c_argmin: Optional[float]
    thresholds: Optional[ThresholdResult]

    @property
    def count(self):
        return len(self.fixed_points)

    def as_dict(self):
        fps = []
        sol_by_alpha = {id(fp): rec for fp, rec in zip(self.fixed_points, self.solutions)}
        for fp in self.fixed_points:
            entry = {"alpha": fp.alpha, "tangential": fp.tangential, "g_residual": None, "pde_residual": None}
            rec = sol_by_alpha.get(id(fp))
            if rec is not None:
                entry["g_residual"] = rec.g_residual
                entry["pde_residual"] = rec.pde_residual
            fps.append(entry)
        out = {
            "i": self.window,
            "window": list(self.admissible.bounds),
            "lambda": self.lam,
            "intervals": [iv.as_dict() for iv in self.admissible.intervals],
            "c": {"value": self.c_value, "argmin": self.c_argmin},
            "count_at_least": self.count,
            "fixed_points": fps,
        }
        if self.thresholds is not None:
            out.update(self.thresholds.as_dict())
        return out


def analyze_window(lam, i, ctx, with_thresholds=True, reconstruct=True, exact=True):
    """Full analysis of window i at λ: set, c(λ), fixed points, solutions."""
    D = admissible_set(ctx.coef, i, lam, ctx.nl, ctx.lam1)
    cv, ca = c_of_lambda(lam, i, ctx)
    fps = find_fixed_points(lam, i, ctx, exact=exact and reconstruct)
    sols = ()
    if reconstruct:
        sols = tuple(
            reconstruct_solution(lam, fp.alpha, ctx, tangential=fp.tangential)
            for fp in fps
            if not fp.tangential
        )
        fps = tuple(fp for fp in fps if not fp.tangential) + tuple(fp for fp in fps if fp.tangential)
    th = thresholds(i, ctx) if with_thresholds else None
    return WindowReport(i, lam, D, tuple(fps), sols, cv, ca, th)


# ---------------------------------------------------------------------------
# Oscillation count
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OscillationReport:
    """Local extrema of H = a·Q⁻¹ and the fixed-point counts they predict.

    ``m`` is the largest local minimum and ``M`` the smallest local
    maximum; ``j`` is the number of local maximizers. The window ends,
    where H vanishes, count as minima, so a single bump gives ``m = 0``.
    """

    window: int
    maximizers: tuple
    minimizers: tuple
    m: float
    M: float
    j: int
    has_gap: bool
    probes: tuple = ()
    counts: tuple = ()
    alpha: tuple = field(default=(), repr=False)
    h: tuple = field(default=(), repr=False)

    def as_dict(self):
        return {
            "i": self.window,
            "maximizers": list(self.maximizers),
            "minimizers": list(self.minimizers),
            "m": self.m,
            "M": self.M,
            "j": self.j,
            "has_gap": self.has_gap,
            "probes": list(self.probes),
            "counts_at_least": list(self.counts),
        }


def _extrema(x, y):
    """Strict local extrema; a plateau counts once, at its midpoint."""
    keep = np.concatenate([[True], y[1:] != y[:-1]])
    starts = np.nonzero(keep)[0]
    ends = np.concatenate([starts[1:] - 1, [len(y) - 1]])
    vals = y[starts]
    mids = 0.5 * (x[starts] + x[ends])
    maxi, mini = [], []
    for k in range(1, len(vals) - 1):
        if vals[k] > vals[k - 1] and vals[k] > vals[k + 1]:
            maxi.append((mids[k], vals[k]))
        elif vals[k] < vals[k - 1] and vals[k] < vals[k + 1]:
            mini.append((mids[k], vals[k]))
    return maxi, mini


def oscillation_analysis(i, ctx, probes=None, n=N_OSC, n_probes=5):
    """Extrema of H on window i and fixed-point counts at probe λ in (m, M)."""
    if not ctx.table.monotone:
        raise NotMonotoneError("oscillation analysis needs a monotone Q table")
    lo, hi = ctx.coef.window(i)
    x = np.linspace(lo, hi, n + 2)[1:-1]
    h = h_eval(ctx, x)
    maxi, mini = _extrema(x, h)
    if not maxi:
        return OscillationReport(i, (), tuple(p for p, _ in mini), 0.0, math.nan, 0, False, alpha=tuple(x), h=tuple(h))
    M = float(min(v for _, v in maxi))
    m = float(max((v for _, v in mini), default=0.0))
    has_gap = m < M
    if probes is None:
        probes = [m + (M - m) * k / (n_probes + 1) for k in range(1, n_probes + 1)] if has_gap else []
    counts = tuple(len(find_fixed_points(lam, i, ctx)) for lam in probes)
    return OscillationReport(
        i,
        tuple(float(p) for p, _ in maxi),
        tuple(float(p) for p, _ in mini),
        m,
        M,
        len(maxi),
        has_gap,
        tuple(float(p) for p in probes),
        counts,
        tuple(x),
        tuple(h),
    )
