"""Positive solutions of the auxiliary problem -Δw = s f(w), w = 0 on the boundary.

The solver brackets the solution between the subsolution η_s φ₁
(η_s = ψ⁻¹(λ₁/s)) and a supersolution built from a torsion-type function,
then runs monotone Picard iteration from both ends. Each pass is finished
with a damped Newton polish. Agreement of the two limits is the discrete
witness that the positive solution is unique.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConvergenceError, DomainError, UniquenessError
from .mesh import cell_gradient_squared, integrate
from .model import psi_inverse

__all__ = [
    "AuxSolution",
    "admissible_s_range",
    "solve_auxiliary",
    "energy",
    "residual",
    "TOL_FP",
    "S_MARGIN",
]

TOL_FP = 1e-10
TOL_PDE = 1e-9
S_MARGIN = 1e-8
MAX_DOUBLINGS = 60
NEWTON_SWITCH = 1e-5
MAX_NEWTON = 50
MAX_POLISH = 4
EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class AuxSolution:
    """Converged auxiliary solution with diagnostics.

    ``aux`` holds ``s f(w)``, which is ``-Δw`` at the discrete solution; the
    Laplacian-based functionals read it instead of differencing ``w`` again.
    ``gap`` is the sup-norm distance between the upward and downward limits
    (``nan`` when the downward pass was skipped).
    """

    s: float
    w: np.ndarray = field(repr=False)
    aux: np.ndarray = field(repr=False)
    residual_inf: float
    energy: float
    iterations: dict
    eta: float
    supersolution: dict
    gap: float

    @property
    def sup(self):
        return float(np.max(self.w))

    def diagnostics(self):
        return {
            "s": self.s,
            "energy": self.energy,
            "residual_inf": self.residual_inf,
            "iterations": dict(self.iterations),
            "eta": self.eta,
            "gap": self.gap,
        }


def admissible_s_range(nl, lam1):
    """Open interval ``(λ₁/β, λ₁/θ)`` with ``λ₁/∞ = 0`` and ``λ₁/0 = ∞``."""
    lo = 0.0 if math.isinf(nl.beta) else lam1 / nl.beta
    hi = math.inf if nl.theta == 0 else lam1 / nl.theta
    return lo, hi


def _check_s(nl, s, lam1, margin):
    lo, hi = admissible_s_range(nl, lam1)
    if not (s > lo * (1 + margin) and s > 0 and (math.isinf(hi) or s < hi * (1 - margin))):
        raise DomainError(
            f"s={s!r} is not inside ({lo}, {hi}) with relative margin {margin:.0e}"
        )


def residual(mesh, nl, s, u):
    """Sup norm of ``-Δu - s f(u)``."""
    u = mesh.check_field(u)
    return float(np.max(np.abs(mesh.laplacian @ u - s * nl.f(u)), initial=0.0))


def energy(mesh, nl, s, u):
    """Discrete ``½∫|∇u|² - s∫F(u)``."""
    u = mesh.check_field(u)
    dirichlet = mesh.cell_weight * float(np.sum(cell_gradient_squared(mesh, u)))
    return 0.5 * dirichlet - s * integrate(mesh, nl.F(u))


def _supersolution(mesh, nl, s, floor):
    """A field S with -ΔS >= s f(S) at every node and S >= ``floor``.

    Bounded f: S = s L v with v the torsion function. Otherwise S = M ζ
    where (-Δ - c) ζ = 1, c = 0 if θ = 0 and c halfway between sθ and λ₁
    otherwise; M is doubled until the inequality holds.
    """
    if nl.sup is not None and math.isfinite(nl.sup):
        S = s * nl.sup * mesh.torsion
        if np.all(S >= floor):
            return S, {"kind": "bounded", "M": s * nl.sup, "c": 0.0, "doublings": 0}
    lam1 = mesh.eigenpair.eigenvalue
    if nl.theta == 0:
        c = 0.0
        zeta = mesh.torsion
        lap_zeta = np.ones(mesh.size)
    else:
        c = s * nl.theta + 0.5 * (lam1 - s * nl.theta)
        op = (mesh.laplacian - c * sp.identity(mesh.size, format="csc")).tocsc()
        zeta = splu(op).solve(np.ones(mesh.size))
        if np.any(zeta <= 0):
            raise ConvergenceError("shifted torsion function is not positive", 0)
        lap_zeta = mesh.laplacian @ zeta
    M = max(1.0, float(np.max(floor / zeta)))
    for k in range(MAX_DOUBLINGS + 1):
        S = M * zeta
        if np.all(M * lap_zeta >= s * nl.f(S)):
            return S, {"kind": "shifted_torsion" if c else "torsion", "M": M, "c": c, "doublings": k}
        M *= 2.0
    raise ConvergenceError(
        f"no supersolution found after {MAX_DOUBLINGS} doublings at s={s}", MAX_DOUBLINGS
    )


def _picard(mesh, nl, s, w, lower, upper, tol, max_iters, stop_at, callback, label):
    """Monotone iteration w <- (-Δ)^{-1} s f(w) started at a sub/supersolution."""
    slack = 1e-12
    for it in range(1, max_iters + 1):
        new = mesh.lu_solve(s * nl.f(w))
        step = float(np.max(np.abs(new - w)))
        scale = max(1.0, float(np.max(new)))
        if np.any(new < lower - slack * scale) or np.any(new > upper + slack * scale):
            raise ConvergenceError(f"{label} iterate left the order bracket at s={s}", it)
        w = new
        if callback is not None:
            callback(label, it, w, step)
        if step <= stop_at * scale:
            return w, it
    if stop_at > tol:
        return w, max_iters
    raise ConvergenceError(f"{label} monotone iteration did not converge at s={s}", max_iters)


def _newton(mesh, nl, s, w, tol, callback, label):
    A = mesh.laplacian
    F = A @ w - s * nl.f(w)
    rnorm = float(np.max(np.abs(F)))
    polished = 0
    last = math.inf
    for it in range(1, MAX_NEWTON + 1):
        J = (A - sp.diags(s * nl.df(w))).tocsc()
        delta = -splu(J).solve(F)
        t = 1.0
        while True:
            trial = w + t * delta
            if np.all(trial > 0):
                Ft = A @ trial - s * nl.f(trial)
                rt = float(np.max(np.abs(Ft)))
                if rt < rnorm or t < 1e-3 or rt <= 1e-14 * max(1.0, float(np.max(np.abs(s * nl.f(trial))))):
                    break
            t *= 0.5
            if t < 1e-6:
                raise ConvergenceError(f"{label} Newton line search failed at s={s}", it)
        w, F, rnorm = trial, Ft, rt
        step = t * float(np.max(np.abs(delta)))
        if callback is not None:
            callback(label + "-newton", it, w, step)
        scale = max(1.0, float(np.max(w)))
        if polished:
            # keep polishing while steps still shrink, down to rounding level
            if polished >= MAX_POLISH or step <= 8 * EPS * scale or step > 0.5 * last:
                return w, it
            polished += 1
        elif step <= tol * scale:
            # near λ₁/θ the Jacobian is poorly conditioned, so the step that
            # meets tol is not yet at rounding level
            polished = 1
        last = step
    raise ConvergenceError(f"{label} Newton polish did not converge at s={s}", MAX_NEWTON)


def solve_auxiliary(
    mesh,
    nl,
    s,
    tol_fp=TOL_FP,
    tol_pde=TOL_PDE,
    max_iters=50_000,
    newton=True,
    check_uniqueness=True,
    margin=S_MARGIN,
    callback=None,
):
    """Unique positive solution of ``-Δw = s f(w)``.

    Parameters
    ----------
    s : float
        Must lie inside ``admissible_s_range`` with relative ``margin``.
    tol_fp : float
        Sup-norm step tolerance, relative to ``max(1, max w)``.
    newton : bool
        Switch from Picard to damped Newton once the Picard step falls below
        ``1e-5`` relative. Without it Picard runs to ``tol_fp``.
    check_uniqueness : bool
        Also run the downward pass from the supersolution and require the
        two limits to agree within ``10 * tol_fp``.
    callback : callable, optional
        Called as ``callback(label, iteration, w, step)``.
    """
    s = float(s)
    eig = mesh.eigenpair
    lam1 = eig.eigenvalue
    _check_s(nl, s, lam1, margin)
    eta = psi_inverse(nl, lam1 / s)
    z = eta * eig.eigenfunction
    stop_at = max(NEWTON_SWITCH, tol_fp) if newton else tol_fp
    iterations = {}

    super_needed = check_uniqueness
    S, sdesc = _supersolution(mesh, nl, s, z) if super_needed else (np.full(mesh.size, np.inf), {})

    w_up, iterations["up"] = _picard(mesh, nl, s, z, z, S, tol_fp, max_iters, stop_at, callback, "up")
    if newton:
        w_up, iterations["up_newton"] = _newton(mesh, nl, s, w_up, tol_fp, callback, "up")
    w = w_up
    gap = math.nan
    if check_uniqueness:
        w_dn, iterations["down"] = _picard(mesh, nl, s, S, z, S, tol_fp, max_iters, stop_at, callback, "down")
        if newton:
            w_dn, iterations["down_newton"] = _newton(mesh, nl, s, w_dn, tol_fp, callback, "down")
        gap = float(np.max(np.abs(w_up - w_dn)))
        if gap > 10 * tol_fp * max(1.0, float(np.max(w_up))):
            raise UniquenessError(
                f"upward and downward limits differ by {gap:.3e} at s={s}",
                sum(iterations.values()),
            )

    if np.any(w <= 0):
        raise ConvergenceError(f"auxiliary solution is not positive at s={s}", sum(iterations.values()))
    aux = s * nl.f(w)
    res = float(np.max(np.abs(mesh.laplacian @ w - aux)))
    if res > tol_pde * float(np.max(np.abs(aux))) + 1e-12:
        raise ConvergenceError(f"PDE residual {res:.3e} above tolerance at s={s}", sum(iterations.values()))
    return AuxSolution(
        s=s,
        w=w,
        aux=aux,
        residual_inf=res,
        energy=energy(mesh, nl, s, w),
        iterations=iterations,
        eta=float(eta),
        supersolution=sdesc,
        gap=gap,
    )
