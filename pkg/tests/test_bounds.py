import math

import pytest

from nonlocal_atlas import (
    build_bounds_context,
    build_context,
    lambda0_bounds,
    make_coefficient,
    make_functional,
    q_lower_bound,
    q_upper_bound,
    thresholds,
)
from nonlocal_atlas.errors import DomainError, ParameterError

from conftest import make_nl


def test_constants_closed_form(mesh):
    b1 = build_bounds_context(mesh, 1.0)
    assert b1.C_tor == pytest.approx(1 / 12, rel=1e-5)
    b2 = build_bounds_context(mesh, 2.0)
    assert b2.C_e == pytest.approx(math.sqrt(0.5), rel=1e-5)
    assert b2.C_tor == pytest.approx(math.sqrt(1 / 120), rel=1e-5)
    with pytest.raises(ParameterError):
        build_bounds_context(mesh, 0.5)


@pytest.mark.parametrize("kind,params", [("saturating", {"beta0": 2.0}), ("power", {"p": 1.5})])
def test_sandwich_on_tables(mesh, kind, params):
    nl = make_nl(kind, params)
    g = make_functional("lp_of_u", gamma=2)
    coef = make_coefficient("abs_sin", k_max=1)
    ctx = build_context(mesh, nl, coef, g, n_samples=24)
    B = build_bounds_context(mesh, 2.0)
    for s, q in zip(ctx.table.s, ctx.table.q):
        assert q_lower_bound(B, nl, s, g) <= q * (1 + 1e-9)
        if kind == "saturating":
            assert q <= q_upper_bound(B, nl, s, g) * (1 + 1e-9)
    lower, upper = lambda0_bounds(B, nl, coef, 0)
    lam0 = thresholds(0, ctx).lambda0
    assert lam0 <= upper
    if kind == "saturating":
        assert lower <= lam0
    else:
        assert lower is None
        with pytest.raises(DomainError):
            q_upper_bound(B, nl, 1.0)


def test_wrong_functional_rejected(mesh):
    B = build_bounds_context(mesh, 2.0)
    nl = make_nl("saturating", {"beta0": 2.0})
    with pytest.raises(ParameterError):
        q_lower_bound(B, nl, 10.0, make_functional("lp_of_grad", gamma=2))
    with pytest.raises(ParameterError):
        q_lower_bound(B, nl, 10.0, make_functional("lp_of_u", gamma=1))
