"""Catalogue of nonlinearities f, degenerate coefficients a and nonlocal terms g.

Structural data (the limits β and θ of f(t)/t, the zeros of a, homogeneity
degrees of g) are stored analytically per catalogue kind; nothing that
decides a domain boundary is estimated numerically.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq

from ._numerics import dense_max
from .errors import DomainError, ParameterError
from .mesh import cell_gradient_squared

__all__ = [
    "Nonlinearity",
    "Coefficient",
    "NonlocalFunctional",
    "make_nonlinearity",
    "make_coefficient",
    "make_functional",
    "psi_inverse",
    "eval_functional",
    "audit_nonlinearity",
    "audit_coefficient",
    "NONLINEARITY_KINDS",
    "COEFFICIENT_KINDS",
    "FUNCTIONAL_KINDS",
    "PHI_KINDS",
    "TOL_ZERO",
]

TOL_ZERO = 1e-10
T_FLOOR = 1e-300


def _pos(t):
    return np.maximum(np.asarray(t, dtype=float), T_FLOOR)


# ---------------------------------------------------------------------------
# Nonlinearities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """A nonlinearity f with ψ(t) = f(t)/t strictly decreasing.

    ``beta`` and ``theta`` are the limits of ψ at 0 and ∞ (``beta`` may be
    ``inf``). ``tail`` is ``(p, c0)`` when ``f(t) / t**(p-1) -> c0`` and θ = 0.
    ``sup`` is ``sup f`` when finite, else ``None``.
    """

    kind: str
    params: dict
    beta: float
    theta: float
    tail: Optional[tuple]
    sup: Optional[float]
    _f: Callable = field(repr=False)
    _df: Callable = field(repr=False)
    _F: Callable = field(repr=False)
    _psi: Callable = field(repr=False)
    _psi_inv: Optional[Callable] = field(default=None, repr=False)

    def f(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, self._f(_pos(t)), 0.0)

    def df(self, t):
        return self._df(_pos(t))

    def F(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, self._F(_pos(t)), 0.0)

    def psi(self, t):
        return self._psi(_pos(t))

    @property
    def satisfies_tail_condition(self):
        """True unless θ = 0 and no sublinear power tail is available."""
        return self.theta > 0 or self.tail is not None

    def __call__(self, t):
        return self.f(t)


def _power(params):
    p = float(params["p"])
    if not 1 < p < 2:
        raise ParameterError(f"power nonlinearity needs 1 < p < 2, got p={p}")
    return dict(
        beta=math.inf,
        theta=0.0,
        tail=(p, 1.0),
        sup=None,
        _f=lambda t: t ** (p - 1),
        _df=lambda t: (p - 1) * t ** (p - 2),
        _F=lambda t: t**p / p,
        _psi=lambda t: t ** (p - 2),
        _psi_inv=lambda y: y ** (1.0 / (p - 2)),
    )


def _saturating(params):
    b = float(params["beta0"])
    if not b > 0:
        raise ParameterError(f"saturating nonlinearity needs beta0 > 0, got {b}")
    return dict(
        beta=b,
        theta=0.0,
        tail=None,
        sup=b,
        _f=lambda t: b * t / (1 + t),
        _df=lambda t: b / (1 + t) ** 2,
        _F=lambda t: b * (t - np.log1p(t)),
        _psi=lambda t: b / (1 + t),
        _psi_inv=lambda y: (b - y) / y,
    )


def _sqrt_shift(params):
    th = float(params["theta0"])
    if not th > 0:
        raise ParameterError(f"sqrt_shift nonlinearity needs theta0 > 0, got {th}")
    return dict(
        beta=math.inf,
        theta=th,
        tail=None,
        sup=None,
        _f=lambda t: th * t + np.sqrt(t),
        _df=lambda t: th + 0.5 / np.sqrt(t),
        _F=lambda t: 0.5 * th * t**2 + (2.0 / 3.0) * t**1.5,
        _psi=lambda t: th + 1 / np.sqrt(t),
        _psi_inv=lambda y: (y - th) ** -2.0,
    )


def _check_theta_beta(params):
    th, b = float(params["theta0"]), float(params["beta0"])
    if not 0 < th < b:
        raise ParameterError(f"need 0 < theta0 < beta0, got theta0={th}, beta0={b}")
    return th, b


def _rational(params):
    th, b = _check_theta_beta(params)
    c = b - th
    return dict(
        beta=b,
        theta=th,
        tail=None,
        sup=None,
        _f=lambda t: t * (th + c / (1 + t)),
        _df=lambda t: th + c / (1 + t) ** 2,
        _F=lambda t: 0.5 * th * t**2 + c * (t - np.log1p(t)),
        _psi=lambda t: th + c / (1 + t),
        _psi_inv=lambda y: (b - y) / (y - th),
    )


def _arctan(params):
    th, b = _check_theta_beta(params)
    c = b - th
    k = 2.0 / math.pi
    return dict(
        beta=b,
        theta=th,
        tail=None,
        sup=None,
        _f=lambda t: t * (th + c * (1 - k * np.arctan(t))),
        _df=lambda t: b - c * k * (np.arctan(t) + t / (1 + t * t)),
        _F=lambda t: 0.5 * b * t**2 - (c / math.pi) * ((t * t + 1) * np.arctan(t) - t),
        _psi=lambda t: th + c * (1 - k * np.arctan(t)),
        # tan(π/2 (1 - r)) written as 1 / tan(π r / 2) to keep precision near θ
        _psi_inv=lambda y: 1.0 / np.tan(0.5 * math.pi * (y - th) / c),
    )


_NONLINEARITY_BUILDERS = {
    "power": _power,
    "saturating": _saturating,
    "sqrt_shift": _sqrt_shift,
    "rational": _rational,
    "arctan": _arctan,
}
NONLINEARITY_KINDS = tuple(_NONLINEARITY_BUILDERS) + ("custom",)


def make_nonlinearity(kind, params=None, **kwargs):
    """Build a catalogue nonlinearity.

    Kinds and parameters:

    ``power``       f(t) = t^(p-1), ``p`` in (1, 2)
    ``saturating``  f(t) = β0 t / (1 + t)
    ``sqrt_shift``  f(t) = θ0 t + √t
    ``rational``    f(t) = t (θ0 + (β0 - θ0) / (1 + t))
    ``arctan``      f(t) = t [θ0 + (β0 - θ0)(1 - (2/π) arctan t)]
    ``custom``      callables ``f``, ``F`` (and optionally ``df``, ``psi_inverse``)
                    with declared ``beta``, ``theta``, ``tail``, ``sup``.
    """
    params = dict(params or {}, **kwargs)
    if kind == "custom":
        return _custom_nonlinearity(params)
    try:
        builder = _NONLINEARITY_BUILDERS[kind]
    except KeyError:
        raise ParameterError(f"unknown nonlinearity kind {kind!r}") from None
    try:
        data = builder(params)
    except KeyError as exc:
        raise ParameterError(f"{kind} nonlinearity is missing parameter {exc}") from None
    nl = Nonlinearity(kind=kind, params=params, **data)
    if not nl.satisfies_tail_condition:
        warnings.warn(
            f"{kind} nonlinearity has theta=0 and no sublinear power tail; "
            "pair it with a functional that grows with |u| itself",
            stacklevel=2,
        )
    return nl


def _custom_nonlinearity(params):
    f = params["f"]
    F = params["F"]
    h = 1e-7
    df = params.get("df") or (lambda t: (f(t * (1 + h)) - f(t * (1 - h))) / (2 * h * t))
    beta = float(params.get("beta", math.inf))
    theta = float(params.get("theta", 0.0))
    if not 0 <= theta < beta:
        raise ParameterError(f"need 0 <= theta < beta, got theta={theta}, beta={beta}")
    return Nonlinearity(
        kind="custom",
        params={k: v for k, v in params.items() if not callable(v)},
        beta=beta,
        theta=theta,
        tail=params.get("tail"),
        sup=params.get("sup"),
        _f=f,
        _df=df,
        _F=F,
        _psi=lambda t: f(t) / t,
        _psi_inv=params.get("psi_inverse"),
    )


def psi_inverse(nl, y, rtol=1e-12, closed_form=True):
    """Solve ``ψ(t) = y`` for ``t > 0``; requires θ < y < β.

    Uses the closed form of the catalogue kind when available, otherwise
    bisection in ``log t`` on an exponentially expanded bracket.
    """
    y = float(y)
    if not nl.theta < y < nl.beta:
        raise DomainError(f"psi_inverse needs {nl.theta} < y < {nl.beta}, got {y}")
    if closed_form and nl._psi_inv is not None:
        return float(nl._psi_inv(y))
    psi = lambda t: float(nl.psi(np.array([t]))[0])
    lo = hi = 1.0
    for _ in range(2000):
        if psi(hi) <= y:
            break
        hi *= 2.0
    for _ in range(2000):
        if psi(lo) >= y:
            break
        lo *= 0.5
    a, b = math.log(lo), math.log(hi)
    t = lo
    for _ in range(400):
        m = 0.5 * (a + b)
        t = math.exp(m)
        v = psi(t)
        if abs(v - y) <= rtol * y or b - a <= 4e-16 * max(1.0, abs(m)):
            break
        if v > y:
            a = m
        else:
            b = m
    return t


def audit_nonlinearity(nl, n=10_000):
    """Sampled structural checks; returns a dict of booleans."""
    t = np.logspace(-6, 6, n)
    f = nl.f(t)
    psi = nl.psi(t)
    report = {
        "f_positive": bool(np.all(f > 0)),
        "f_zero_at_origin": bool(abs(float(nl.f(np.array([1e-300]))[0])) < 1e-100),
        "psi_decreasing": bool(np.all(np.diff(psi) < 0)),
        "theta_below_beta": bool(0 <= nl.theta < nl.beta),
    }
    if nl.theta == 0 and nl.tail is not None:
        p, c0 = nl.tail
        ts = np.array([1e3, 1e4, 1e5])
        ratio = nl.f(ts) / ts ** (p - 1)
        report["tail_limit"] = bool(np.all(np.abs(ratio - c0) <= 0.05 * c0))
    return report


# ---------------------------------------------------------------------------
# Coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Coefficient:
    """Degenerate coefficient a with zeros ``0 = t_0 < t_1 < ... < t_k``.

    ``window_max[i]`` is ``max a`` over ``[t_i, t_{i+1}]``.
    """

    kind: str
    params: dict
    zeros: tuple
    window_max: tuple
    _a: Callable = field(repr=False)

    def __call__(self, alpha):
        return self._a(np.asarray(alpha, dtype=float))

    @property
    def n_windows(self):
        return len(self.zeros) - 1

    def window(self, i):
        if not 0 <= i < self.n_windows:
            raise DomainError(f"window index {i} outside 0..{self.n_windows - 1}")
        return self.zeros[i], self.zeros[i + 1]


COEFFICIENT_KINDS = ("abs_sin", "abs_sin_power_weight", "polynomial_bumps", "user_table", "custom")


def _window_maxima(a, zeros, n=4096):
    maxima = []
    for lo, hi in zip(zeros[:-1], zeros[1:]):
        _, m = dense_max(a, lo, hi, n=n, endpoints=False)
        maxima.append(m)
    return tuple(maxima)


def _scan_zeros(a, lo, hi, n=20_000):
    """Sign-change zeros of ``a`` on ``[lo, hi]`` refined by bisection."""
    x = np.linspace(lo, hi, n + 1)
    y = a(x)
    zeros = [float(x[k]) for k in np.nonzero(np.abs(y) <= TOL_ZERO)[0]]
    for k in np.nonzero(y[:-1] * y[1:] < 0)[0]:
        zeros.append(brentq(lambda t: float(a(np.array([t]))[0]), x[k], x[k + 1], xtol=1e-15))
    return zeros


def _cluster(values, tol):
    """Merge sorted values closer than ``tol`` into their mean."""
    groups = []
    for v in sorted(values):
        if groups and v - groups[-1][-1] <= tol:
            groups[-1].append(v)
        else:
            groups.append([v])
    return [float(np.mean(g)) for g in groups]


def _dedupe(values, tol=1e-9):
    out = []
    for v in sorted(values):
        if not out or v - out[-1] > tol * max(1.0, abs(v)):
            out.append(v)
    return out


def make_coefficient(kind, params=None, k_max=None, declared_zeros=(), **kwargs):
    """Build a degenerate coefficient.

    Kinds and parameters:

    ``abs_sin``               a(α) = c |sin(ωα)|; ``scale`` c = 1, ``omega`` ω = 1
    ``abs_sin_power_weight``  a(α) = |sin α| α^((p-2)/γ); ``p``, ``gamma``
    ``polynomial_bumps``      a(α) = |P(α)|; ``coefficients`` (ascending), ``range``
    ``user_table``            piecewise-linear through ``alpha``, ``values``
    ``custom``                callable ``a`` with ``zeros`` or a ``range`` to scan

    ``k_max`` truncates the number of windows (and is required for the
    periodic sine kinds). Tangential zeros of tables or callables, which a
    sign scan cannot see, go in ``declared_zeros``.
    """
    params = dict(params or {}, **kwargs)
    declared = [float(z) for z in declared_zeros]
    if kind in ("abs_sin", "abs_sin_power_weight"):
        if k_max is None or int(k_max) < 1:
            raise ParameterError(f"{kind} needs k_max >= 1")
        k_max = int(k_max)
        if kind == "abs_sin":
            c = float(params.get("scale", 1.0))
            w = float(params.get("omega", 1.0))
            if c <= 0 or w <= 0:
                raise ParameterError("abs_sin needs positive scale and omega")
            a = lambda x: c * np.abs(np.sin(w * x))
            zeros = [i * math.pi / w for i in range(k_max + 1)]
            maxima = (c,) * k_max
        else:
            p = float(params["p"])
            g = float(params["gamma"])
            if p == 2 or g <= 0:
                raise ParameterError("abs_sin_power_weight needs p != 2 and gamma > 0")
            e = (p - 2) / g
            if e <= -1:
                raise ParameterError("abs_sin_power_weight needs (p-2)/gamma > -1 so that a(0) = 0")
            c = float(params.get("scale", 1.0))

            def a(x, e=e, c=c):
                x = np.asarray(x, dtype=float)
                xs = np.where(x > 0, x, 1.0)
                return np.where(x > 0, c * np.abs(np.sin(xs)) * xs**e, 0.0)

            zeros = [i * math.pi for i in range(k_max + 1)]
            maxima = None
    elif kind == "polynomial_bumps":
        coeffs = np.asarray(params["coefficients"], dtype=float)
        lo, hi = (float(v) for v in params.get("range", (0.0, None)))
        a = lambda x, c=coeffs: np.abs(npoly.polyval(np.asarray(x, dtype=float), c))
        raw = lambda x, c=coeffs: npoly.polyval(np.asarray(x, dtype=float), c)
        zeros = _scan_zeros(raw, lo, hi)
        # even-multiplicity roots do not change sign; take them from the companion matrix
        # (a double root splits into a pair ~1e-8 apart, so cluster before use)
        cand = [r.real for r in npoly.polyroots(coeffs) if abs(r.imag) <= 1e-6]
        for r in _cluster(cand, 1e-6):
            if lo - 1e-12 <= r <= hi + 1e-12 and abs(float(raw(np.array([r]))[0])) <= TOL_ZERO:
                zeros.append(min(max(r, lo), hi))
        zeros = _dedupe(_cluster(zeros, 1e-6) + declared)
        maxima = None
    elif kind == "user_table":
        xs = np.asarray(params["alpha"], dtype=float)
        ys = np.asarray(params["values"], dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2 or np.any(np.diff(xs) <= 0):
            raise ParameterError("user_table needs strictly increasing alpha and matching values")
        a = lambda x, xs=xs, ys=ys: np.interp(np.asarray(x, dtype=float), xs, ys)
        zeros = _dedupe(_scan_zeros(a, xs[0], xs[-1], n=max(20_000, 8 * len(xs))) + declared)
        maxima = None
    elif kind == "custom":
        a = params["a"]
        if "zeros" in params:
            zeros = _dedupe([float(z) for z in params["zeros"]] + declared)
        else:
            lo, hi = (float(v) for v in params["range"])
            zeros = _dedupe(_scan_zeros(a, lo, hi) + declared)
        maxima = None
        params = {k: v for k, v in params.items() if not callable(v)}
    else:
        raise ParameterError(f"unknown coefficient kind {kind!r}")

    if not zeros:
        raise ParameterError("no zeros of the coefficient found in range")
    if abs(zeros[0]) > 1e-12:
        raise ParameterError(f"the first zero must be t_0 = 0, found {zeros[0]}")
    zeros[0] = 0.0
    if k_max is not None:
        zeros = zeros[: int(k_max) + 1]
    if len(zeros) < 2:
        raise ParameterError("coefficient needs at least one window (two zeros)")
    zeros = tuple(float(z) for z in zeros)
    _check_windows(a, zeros)
    if maxima is None:
        maxima = _window_maxima(a, zeros)
    return Coefficient(kind=kind, params=params, zeros=zeros, window_max=tuple(maxima), _a=a)


def _check_windows(a, zeros, n=2048):
    vals = a(np.asarray(zeros))
    if np.any(np.abs(vals) > TOL_ZERO):
        bad = [z for z, v in zip(zeros, vals) if abs(v) > TOL_ZERO]
        raise ParameterError(f"coefficient does not vanish at listed zeros {bad}")
    for lo, hi in zip(zeros[:-1], zeros[1:]):
        x = np.linspace(lo, hi, n + 2)[1:-1]
        if np.any(a(x) <= 0):
            raise ParameterError(f"coefficient is not positive inside window ({lo}, {hi})")


def audit_coefficient(coef, offset=1e-3, n=4096):
    """Zero and positivity audit; returns a dict of booleans."""
    zeros_ok = bool(np.all(np.abs(coef(np.asarray(coef.zeros))) <= TOL_ZERO))
    interior_ok = True
    for i in range(coef.n_windows):
        lo, hi = coef.window(i)
        x = np.linspace(lo + offset, hi - offset, n)
        interior_ok &= bool(np.min(coef(x)) > 0)
    return {
        "zeros_vanish": zeros_ok,
        "positive_inside": interior_ok,
        "window_max_positive": all(m > 0 for m in coef.window_max),
    }


# ---------------------------------------------------------------------------
# Nonlocal functionals
# ---------------------------------------------------------------------------

FUNCTIONAL_KINDS = (
    "lp_of_u",
    "lp_of_grad",
    "lp_of_laplacian",
    "phi_of_norm",
    "integral_phi_of_u",
    "integral_phi_of_grad",
    "integral_phi_of_laplacian",
)


def _phi_power(q):
    return lambda t: t**q


PHI_KINDS = {
    "power": (("q",), lambda q: (lambda t: t**q)),
    "log1p": ((), lambda: np.log1p),
    "loglog1p": ((), lambda: (lambda t: np.log1p(np.log1p(t)))),
    "expm1_power": (("q",), lambda q: (lambda t: np.expm1(t**q))),
    "expexp": ((), lambda: (lambda t: np.exp(np.exp(t)) - math.e)),
    "power_log": (("q",), lambda q: (lambda t: t**q * np.log1p(t))),
    "power_cos2": (("q",), lambda q: (lambda t: t**q * (1 + np.cos(t) ** 2))),
    "two_powers": (("q", "r"), lambda q, r: (lambda t: t**q + t**r)),
    "ratio_sqrt": ((), lambda: (lambda t: t**2 / np.sqrt(1 + t**2))),
    "power_ratio": (("q",), lambda q: (lambda t: t**q / (1 + t**q) ** (1.0 / q))),
}


@dataclass(frozen=True, eq=False)
class NonlocalFunctional:
    """A nonlocal term g(u).

    ``source`` is what the integrand or norm is taken of: ``"u"``,
    ``"grad"`` or ``"laplacian"``. ``homogeneity`` is the degree γ with
    ``g(tu) = t**γ g(u)`` when such a degree exists, else ``None``.
    """

    kind: str
    source: str
    params: dict
    homogeneity: Optional[float]
    phi: Callable = field(repr=False)
    norm_order: Optional[float] = None

    @property
    def needs_laplacian(self):
        return self.source == "laplacian"

    @property
    def gamma(self):
        return self.params.get("gamma")


def _parse_phi(entry):
    if entry is None:
        raise ParameterError("functional needs a composition phi")
    if isinstance(entry, str):
        name, params = entry, {}
    else:
        entry = dict(entry)
        name = entry.pop("name")
        params = dict(entry.pop("params", {}), **entry)
    try:
        names, builder = PHI_KINDS[name]
    except KeyError:
        raise ParameterError(f"unknown phi {name!r}") from None
    try:
        args = [float(params[n]) for n in names]
    except KeyError as exc:
        raise ParameterError(f"phi {name!r} is missing parameter {exc}") from None
    if any(v <= 0 for v in args):
        raise ParameterError(f"phi {name!r} parameters must be positive")
    hom = args[0] if name == "power" else None
    return name, dict(zip(names, args)), builder(*args), hom


def make_functional(kind, params=None, **kwargs):
    """Build a nonlocal functional.

    ``lp_of_u``, ``lp_of_grad``, ``lp_of_laplacian`` take ``gamma`` ≥ 1 and
    integrate ``|·|**gamma``. ``integral_phi_of_*`` integrate ``phi(|·|)``.
    ``phi_of_norm`` evaluates ``phi(‖·‖)`` where the norm has ``order``
    (≥ 1 or ``inf``) and is taken of ``norm`` ∈ {u, grad, laplacian}.
    """
    params = dict(params or {}, **kwargs)
    if kind not in FUNCTIONAL_KINDS:
        raise ParameterError(f"unknown functional kind {kind!r}")
    if kind.startswith("lp_of_"):
        gamma = params.get("gamma")
        if gamma is None or not float(gamma) >= 1:
            raise ParameterError(f"{kind} needs gamma >= 1, got {gamma}")
        gamma = float(gamma)
        source = kind[len("lp_of_"):]
        return NonlocalFunctional(
            kind=kind,
            source=source,
            params={"gamma": gamma},
            homogeneity=gamma,
            phi=_phi_power(gamma),
        )
    name, phi_params, phi, hom = _parse_phi(params.get("phi"))
    if kind == "phi_of_norm":
        source = params.get("norm", "u")
        if source not in ("u", "grad", "laplacian"):
            raise ParameterError(f"norm must be u, grad or laplacian, got {source!r}")
        order = float(params.get("order", 2.0))
        if not order >= 1:
            raise ParameterError(f"norm order must be >= 1, got {order}")
        return NonlocalFunctional(
            kind=kind,
            source=source,
            params={"phi": name, **phi_params, "norm": source, "order": order},
            homogeneity=hom,
            phi=phi,
            norm_order=order,
        )
    source = kind[len("integral_phi_of_"):]
    return NonlocalFunctional(
        kind=kind,
        source=source,
        params={"phi": name, **phi_params},
        homogeneity=hom,
        phi=phi,
    )


def _pointwise(g, u, mesh, aux):
    """Magnitudes the functional integrates, with their quadrature weights."""
    if g.source == "u":
        return np.abs(u), mesh.interior_weights
    if g.source == "grad":
        mag = np.sqrt(cell_gradient_squared(mesh, u))
        return mag, np.full(mag.shape, mesh.cell_weight)
    if aux is None:
        raise ParameterError(f"{g.kind} on the Laplacian needs aux = -Δu")
    return np.abs(mesh.check_field(aux, "aux")), mesh.interior_weights


def eval_functional(g, u, mesh, aux=None):
    """Evaluate ``g(u)`` by mesh quadrature.

    For Laplacian-based kinds ``aux`` must hold ``-Δu`` (the auxiliary
    solver supplies it exactly as ``s * f(w)``).
    """
    u = mesh.check_field(u)
    mag, w = _pointwise(g, u, mesh, aux)
    if g.kind == "phi_of_norm":
        q = g.norm_order
        if math.isinf(q):
            norm = float(np.max(mag, initial=0.0))
        else:
            norm = float(w @ mag**q) ** (1.0 / q)
        return float(g.phi(norm))
    return float(w @ g.phi(mag))
