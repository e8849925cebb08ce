"""Closed-form analysis for f(t) = t^(p-1) and a homogeneous functional g.

Every candidate solution is a multiple u = s v of one positive solution v
of -Δv = v^(p-1). With C_v = g(v) and g of degree γ, the relation
g(u) = α = C_v s^γ turns the nonlocal problem into the scalar curve

    λ(α) = C_v^((p-2)/γ) a(α) α^((2-p)/γ),

so solutions in a window are the roots of λ(α) = λ there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ._numerics import dense_max, sign_change_roots
from .aux_solver import solve_auxiliary
from .errors import ConvergenceError, DomainError, ParameterError
from .mesh import cell_gradient_squared, integrate
from .model import eval_functional, make_nonlinearity

__all__ = [
    "PowerlikeModel",
    "ScaledSolution",
    "P_CAP",
    "solve_normalized",
    "build_powerlike",
    "lambda_of_alpha",
    "powerlike_threshold",
    "mu0_limit",
    "enumerate_scaled_solutions",
    "scaled_residual",
    "cross_validate",
]

P_CAP = 6.0
TOL_NORMALIZED = 1e-12


def _check_p(p):
    p = float(p)
    if not (1 < p < 2 or 2 < p <= P_CAP):
        raise ParameterError(f"exponent p must be in (1, 2) or (2, {P_CAP:g}], got {p}")
    return p


def solve_normalized(mesh, p, tol=TOL_NORMALIZED, max_iters=10_000):
    """Positive solution v of -Δv = v^(p-1) with zero boundary values.

    For 1 < p < 2 this is the unique solution, from the auxiliary solver at
    s = 1. For p > 2 it starts from φ₁ and iterates u <- (-Δ)^{-1} u^(p-1),
    rescaling after every step so that the Nehari identity
    ∫|∇u|² = ∫u^p holds, and finishes with Newton. The result is one
    positive solution; uniqueness is not claimed.
    """
    p = _check_p(p)
    if p < 2:
        nl = make_nonlinearity("power", p=p)
        return solve_auxiliary(mesh, nl, 1.0).w
    u = mesh.eigenpair.eigenfunction.copy()
    u = _nehari_scale(mesh, u, p)
    for it in range(1, max_iters + 1):
        new = _nehari_scale(mesh, mesh.lu_solve(u ** (p - 1)), p)
        step = float(np.max(np.abs(new - u)))
        u = new
        if step <= 1e-6 * float(np.max(u)):
            break
    else:
        raise ConvergenceError(f"normalized iteration stalled for p={p}", max_iters)
    A = mesh.laplacian
    for k in range(1, 51):
        F = A @ u - u ** (p - 1)
        J = (A - sp.diags((p - 1) * u ** (p - 2))).tocsc()
        delta = splu(J).solve(-F)
        u = u + delta
        if np.any(u <= 0):
            raise ConvergenceError(f"Newton polish lost positivity for p={p}", it + k)
        if float(np.max(np.abs(delta))) <= tol * float(np.max(u)):
            break
    else:
        raise ConvergenceError(f"Newton polish did not converge for p={p}", it + 50)
    return u


def _nehari_scale(mesh, u, p):
    dirichlet = mesh.cell_weight * float(np.sum(cell_gradient_squared(mesh, u)))
    potential = integrate(mesh, u**p)
    return u * (dirichlet / potential) ** (1.0 / (p - 2))


@dataclass(frozen=True, eq=False)
class PowerlikeModel:
    """Normalized profile v with C_v = g(v) and the degree γ of g."""

    p: float
    gamma: float
    v: np.ndarray = field(repr=False)
    C_v: float
    residual: float
    mesh: object = field(repr=False)
    g: object = field(repr=False)

    @property
    def scale(self):
        """C_v^((p-2)/γ), the factor in front of the λ(α) curve."""
        return self.C_v ** ((self.p - 2) / self.gamma)

    def s_of_alpha(self, alpha):
        return (np.asarray(alpha, dtype=float) / self.C_v) ** (1.0 / self.gamma)

    def q(self, s):
        """Closed-form Q(s) = C_v s^(γ/(2-p)) for p < 2."""
        return self.C_v * np.asarray(s, dtype=float) ** (self.gamma / (2 - self.p))

    def q_inverse(self, alpha):
        return (np.asarray(alpha, dtype=float) / self.C_v) ** ((2 - self.p) / self.gamma)


def build_powerlike(mesh, p, g):
    """Solve for v once and record C_v = g(v); g must be homogeneous."""
    p = _check_p(p)
    if g.homogeneity is None:
        raise ParameterError(f"functional {g.kind} has no homogeneity degree")
    v = solve_normalized(mesh, p)
    rhs = v ** (p - 1)
    C_v = eval_functional(g, v, mesh, aux=rhs)
    res = float(np.max(np.abs(mesh.laplacian @ v - rhs)))
    if not C_v > 0:
        raise ConvergenceError("C_v is not positive", 0)
    return PowerlikeModel(p=p, gamma=float(g.homogeneity), v=v, C_v=C_v, residual=res, mesh=mesh, g=g)


def _weighted(model, coef, alpha):
    """a(α) α^((2-p)/γ), with the value 0 at α = 0 only when p < 2."""
    alpha = np.asarray(alpha, dtype=float)
    e = (2 - model.p) / model.gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        out = coef(alpha) * np.where(alpha > 0, alpha, np.nan) ** e
    return np.where(alpha > 0, out, 0.0 if e > 0 else np.nan)


def lambda_of_alpha(model, coef, alpha):
    """The curve λ(α) = C_v^((p-2)/γ) a(α) α^((2-p)/γ)."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise DomainError("lambda_of_alpha needs alpha > 0")
    out = model.scale * _weighted(model, coef, alpha)
    return out if out.ndim else float(out)


def powerlike_threshold(model, coef, i, n=4096):
    """λ_{0,i}: the maximum of λ(α) over window i, and where it is attained.

    Returns ``(value, argmax)``. For p > 2 on the first window the supremum
    may sit at α → 0⁺; compare against :func:`mu0_limit` there.
    """
    lo, hi = coef.window(i)
    x, v = dense_max(lambda a: lambda_of_alpha(model, coef, a), lo, hi, n=n, endpoints=False)
    return float(v), float(x)


def mu0_limit(model, coef, ks=range(2, 9)):
    """Limit of a(α) α^((2-p)/γ) as α → 0⁺, with a classification tag.

    Samples α = 10^-k. The local log-log slope decides between ``"zero"``
    and ``"infinite"``; otherwise the limit is ``"finite"`` and estimated by
    Richardson extrapolation with an order fitted from the last three
    samples. Returns ``(value, tag)``.
    """
    alpha = np.array([10.0 ** (-k) for k in ks])
    h = _weighted(model, coef, alpha)
    if np.all(h == 0):
        return 0.0, "zero"
    slope = np.polyfit(np.log(alpha[-4:]), np.log(np.abs(h[-4:])), 1)[0]
    if slope > 0.05:
        return 0.0, "zero"
    if slope < -0.05:
        return math.inf, "infinite"
    h0, h1, h2 = h[-3:]
    d1, d2 = h1 - h0, h2 - h1
    if d1 == 0 or d2 == 0 or np.sign(d1) != np.sign(d2) or abs(d2) >= abs(d1):
        return float(h2), "finite"
    ratio = d2 / d1
    return float(h2 + d2 * ratio / (1 - ratio)), "finite"


@dataclass(frozen=True)
class ScaledSolution:
    """Root α of λ(α) = λ with s = (α/C_v)^(1/γ); the solution is u = s v."""

    alpha: float
    s: float
    tangential: bool
    exactness: str

    def as_dict(self):
        return {"alpha": self.alpha, "s": self.s, "tangential": self.tangential, "exactness_tag": self.exactness}


def _concave(values):
    d2 = np.diff(values, 2)
    return bool(np.all(d2 < 0))


def exactness_tag(model, coef, i, n=2048):
    """``"exactly"`` when the concavity hypotheses hold on window i, else ``"at least"``."""
    lo, hi = coef.window(i)
    x = np.linspace(lo, hi, n + 2)[1:-1]
    a_concave = _concave(coef(x))
    h_concave = _concave(_weighted(model, coef, x))
    if model.p < 2:
        ok = a_concave or h_concave
    else:
        ok = h_concave or (a_concave and model.gamma + 2 < model.p)
    return "exactly" if ok else "at least"


def enumerate_scaled_solutions(model, coef, lam, i, n=8192, tol_tangent=1e-9):
    """All roots of λ(α) = λ on window i, each with s = (α/C_v)^(1/γ).

    Crossings come from a sign-change scan plus bisection. The maximizer of
    λ(α) is reported as a tangential root when it matches λ within
    ``tol_tangent`` relative.
    """
    if lam <= 0:
        return []
    lo, hi = coef.window(i)
    x = np.linspace(lo, hi, n + 2)[1:-1]
    F = lambda a: lambda_of_alpha(model, coef, a) - lam
    y = F(x)
    roots = sign_change_roots(F, x, y)
    tag = exactness_tag(model, coef, i)
    out = [ScaledSolution(float(r), float(model.s_of_alpha(r)), False, tag) for r in roots]
    top, xm = powerlike_threshold(model, coef, i)
    if abs(top - lam) <= tol_tangent * lam and not any(abs(r - xm) <= 2 * (x[1] - x[0]) for r in roots):
        out.append(ScaledSolution(xm, float(model.s_of_alpha(xm)), True, tag))
    out.sort(key=lambda r: r.alpha)
    return out


def scaled_residual(model, coef, lam, alpha):
    """Relative residual of u = s v in -a(g(u))Δu = λ u^(p-1)."""
    s = float(model.s_of_alpha(alpha))
    u = s * model.v
    gu = eval_functional(model.g, u, model.mesh, aux=s * model.v ** (model.p - 1))
    a = float(coef(np.array([gu]))[0])
    rhs = lam * u ** (model.p - 1)
    res = float(np.max(np.abs(a * (model.mesh.laplacian @ u) - rhs)))
    return res / float(np.max(np.abs(rhs)))


def cross_validate(model, coef, ctx, i, lams=(), n_alpha=50):
    """Compare the generic table-based pipeline with the closed forms.

    Reports the relative threshold deviation, the largest fixed-point
    location deviation (as a fraction of the window width) over ``lams``,
    and the relative Q⁻¹ deviation on ``n_alpha`` values inside the table.
    """
    from .analyzer import find_fixed_points, thresholds
    from .qmap import q_inverse

    closed, _ = powerlike_threshold(model, coef, i)
    th = thresholds(i, ctx)
    generic = th.lambda0
    dev_threshold = abs(generic - closed) / closed if generic is not None else math.inf
    lo, hi = coef.window(i)
    dev_fixed = 0.0
    for lam in lams:
        a = [fp.alpha for fp in find_fixed_points(lam, i, ctx) if not fp.tangential]
        b = [r.alpha for r in enumerate_scaled_solutions(model, coef, lam, i) if not r.tangential]
        if len(a) != len(b):
            dev_fixed = math.inf
            break
        if a:
            dev_fixed = max(dev_fixed, max(abs(x - y) for x, y in zip(a, b)) / (hi - lo))
    qa, qb = ctx.table.q_hull
    alphas = np.geomspace(qa, qb, n_alpha + 2)[1:-1]
    dev_qinv = float(np.max(np.abs(q_inverse(ctx.table, alphas) / model.q_inverse(alphas) - 1)))
    return {
        "window": i,
        "lambda0_closed": closed,
        "lambda0_generic": generic,
        "threshold_deviation": dev_threshold,
        "fixed_point_deviation": dev_fixed,
        "q_inverse_deviation": dev_qinv,
        "passed": bool(dev_threshold <= 1e-2 and dev_fixed <= 1e-2 and dev_qinv <= 1e-3),
    }
