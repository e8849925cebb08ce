"""Two-sided certificates for Q and λ₀ when g(u) = ∫|u|^γ.

The subsolution η_s e₁ (e₁ the principal eigenfunction with max 1) gives
a lower bound on w_s; when f is bounded by L, the comparison w_s <= s L v
with the torsion function v gives an upper bound. Both translate into
bounds on Q and, through Q⁻¹, on the threshold λ₀.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._numerics import dense_max
from .aux_solver import admissible_s_range
from .errors import DomainError, ParameterError
from .mesh import integrate
from .model import psi_inverse

__all__ = ["BoundsContext", "build_bounds_context", "q_lower_bound", "q_upper_bound", "lambda0_bounds"]


@dataclass(frozen=True, eq=False)
class BoundsContext:
    """Eigenfunction and torsion data on a mesh for exponent γ.

    ``C_e = (∫e₁^γ)^(1/γ)`` and ``C_tor = (∫v^γ)^(1/γ)``.
    """

    gamma: float
    lam1: float
    e1: np.ndarray = field(repr=False)
    C_e: float
    v: np.ndarray = field(repr=False)
    C_tor: float

    def as_dict(self):
        return {"gamma": self.gamma, "lambda1": self.lam1, "C_e": self.C_e, "C_tor": self.C_tor}


def build_bounds_context(mesh, gamma):
    gamma = float(gamma)
    if not gamma >= 1:
        raise ParameterError(f"gamma must be >= 1, got {gamma}")
    eig = mesh.eigenpair
    e1 = eig.eigenfunction
    v = mesh.torsion
    C_e = integrate(mesh, e1**gamma) ** (1 / gamma)
    C_tor = integrate(mesh, v**gamma) ** (1 / gamma)
    return BoundsContext(gamma=gamma, lam1=eig.eigenvalue, e1=e1, C_e=C_e, v=v, C_tor=C_tor)


def _check_g(ctx, g):
    if g is None:
        return
    if g.kind != "lp_of_u":
        raise ParameterError(f"bounds apply to g = ∫|u|^γ only, got {g.kind}")
    if abs(g.gamma - ctx.gamma) > 0:
        raise ParameterError(f"functional has gamma={g.gamma}, bounds context has {ctx.gamma}")


def q_lower_bound(ctx, nl, s, g=None):
    """(ψ⁻¹(λ₁/s))^γ C_e^γ."""
    _check_g(ctx, g)
    lo, hi = admissible_s_range(nl, ctx.lam1)
    if not lo < s < hi:
        raise DomainError(f"s={s} outside the admissible range ({lo}, {hi})")
    return (psi_inverse(nl, ctx.lam1 / s) * ctx.C_e) ** ctx.gamma


def q_upper_bound(ctx, nl, s, g=None):
    """(s L C_tor)^γ with L = sup f; requires bounded f."""
    _check_g(ctx, g)
    if nl.sup is None or not math.isfinite(nl.sup):
        raise DomainError(f"{nl.kind} nonlinearity is unbounded; no upper bound on Q")
    if not s > 0:
        raise DomainError("q_upper_bound needs s > 0")
    return (s * nl.sup * ctx.C_tor) ** ctx.gamma


def lambda0_bounds(ctx, nl, coef, i, n=4096):
    """``(lower, upper)`` bounds on λ₀ for window i.

    upper = λ₁ max a(α) / ψ(α^(1/γ)/C_e);
    lower = max a(α) α^(1/γ) / (L C_tor), or ``None`` when f is unbounded.
    """
    lo, hi = coef.window(i)
    gam = ctx.gamma

    def upper_fn(a):
        return ctx.lam1 * coef(a) / nl.psi(a ** (1 / gam) / ctx.C_e)

    _, upper = dense_max(upper_fn, lo, hi, n=n, endpoints=False)
    if nl.sup is None or not math.isfinite(nl.sup):
        return None, float(upper)
    _, lower = dense_max(lambda a: coef(a) * a ** (1 / gam), lo, hi, n=n, endpoints=False)
    return float(lower / (nl.sup * ctx.C_tor)), float(upper)
