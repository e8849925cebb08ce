"""Acceptance gate: one test per criterion, reported in the terminal summary.

All runs use the unit interval with 1024 interior nodes unless noted.
"""
import filecmp
import json
import math
import time

import numpy as np
import pytest
from scipy.interpolate import PchipInterpolator

from nonlocal_atlas import (
    admissible_s_range,
    admissible_set,
    build_bounds_context,
    build_context,
    build_mesh,
    build_powerlike,
    c_of_lambda,
    certify_monotone,
    enumerate_scaled_solutions,
    find_fixed_points,
    lambda0_bounds,
    make_coefficient,
    make_functional,
    oscillation_analysis,
    powerlike_threshold,
    principal_eigenpair,
    q_lower_bound,
    q_upper_bound,
    reconstruct_solution,
    solve_auxiliary,
    tabulate_q,
    thresholds,
)
from nonlocal_atlas import cli
from nonlocal_atlas.powerlike import cross_validate
from nonlocal_atlas.qmap import from_t

from conftest import CATALOGUE, make_nl

KIND_IDS = [k for k, _ in CATALOGUE]


def _random_nl(rng):
    kind = rng.choice(KIND_IDS)
    if kind == "power":
        params = {"p": rng.uniform(1.2, 1.8)}
    elif kind == "saturating":
        params = {"beta0": rng.uniform(1.0, 5.0)}
    elif kind == "sqrt_shift":
        params = {"theta0": rng.uniform(0.2, 1.0)}
    else:
        theta = rng.uniform(0.2, 1.0)
        params = {"theta0": theta, "beta0": theta + rng.uniform(1.0, 4.0)}
    return make_nl(str(kind), params)


def _random_coefficient(rng):
    if rng.uniform() < 0.5:
        return make_coefficient("abs_sin", {"scale": rng.uniform(0.5, 2.0), "omega": rng.uniform(0.7, 1.5)}, k_max=2)
    r1 = rng.uniform(0.5, 1.5)
    r2 = r1 + rng.uniform(0.5, 1.5)
    c = rng.uniform(0.5, 3.0)
    # c x (x - r1)(x - r2), ascending coefficients
    coeffs = [0.0, c * r1 * r2, -c * (r1 + r2), c]
    return make_coefficient("polynomial_bumps", {"coefficients": coeffs, "range": [0.0, r2]})


def _random_functional(rng):
    choice = rng.integers(4)
    if choice == 3:
        return make_functional("lp_of_grad", gamma=2)
    return make_functional("lp_of_u", gamma=float(choice + 1))


# -- 1 ------------------------------------------------------------------------


@pytest.mark.criterion(1, "principal eigenvalue within 1e-4 of pi^2 (1D) and 2pi^2 (2D), < 5 s")
@pytest.mark.parametrize("dim,n,exact", [(1, 1024, math.pi**2), (2, 128, 2 * math.pi**2)])
def test_eigenpair_oracle(dim, n, exact):
    start = time.perf_counter()
    eig = principal_eigenpair(build_mesh(dim, 1.0, n))
    elapsed = time.perf_counter() - start
    assert abs(eig.eigenvalue - exact) <= 1e-4 * exact
    assert elapsed < 5.0


# -- 2 ------------------------------------------------------------------------


@pytest.mark.criterion(2, "upward/downward iterations agree within 1e-9 on a 5x5 kind-by-s matrix")
@pytest.mark.parametrize("kind,params", CATALOGUE, ids=KIND_IDS)
def test_uniqueness_witness(mesh, kind, params):
    nl = make_nl(kind, params)
    lo, hi = admissible_s_range(nl, mesh.eigenpair.eigenvalue)
    # five parameters spread through the admissible range in mapped coordinates
    for t in (-4.0, -2.0, 0.0, 1.0, 2.0):
        sol = solve_auxiliary(mesh, nl, float(from_t(t, lo, hi)), check_uniqueness=True)
        assert sol.gap <= 1e-9, (kind, t, sol.gap)


# -- 3 ------------------------------------------------------------------------


@pytest.mark.criterion(3, "Q strictly increasing for Lp norms of u and the gradient energy, all kinds")
@pytest.mark.parametrize("kind,params", CATALOGUE, ids=KIND_IDS)
@pytest.mark.parametrize(
    "gkind,gamma", [("lp_of_u", 1), ("lp_of_u", 2), ("lp_of_u", 3), ("lp_of_grad", 2)]
)
def test_q_monotone(mesh, kind, params, gkind, gamma):
    table = tabulate_q(mesh, make_nl(kind, params), make_functional(gkind, gamma=gamma), n=64)
    assert len(table.q) == 64
    assert certify_monotone(table)["monotone"]
    assert np.all(np.diff(table.q) > 0)


# -- 4 ------------------------------------------------------------------------


@pytest.mark.criterion(4, "power nonlinearity: log-log slope gamma/(2-p) within 1e-3, intercept C_v within 1e-3")
@pytest.mark.parametrize("p", [1.3, 1.5, 1.8])
@pytest.mark.parametrize("gamma", [1.0, 2.0])
def test_homogeneity_oracle(mesh, p, gamma):
    g = make_functional("lp_of_u", gamma=gamma)
    table = tabulate_q(mesh, make_nl("power", {"p": p}), g, n=64)
    slope, intercept = np.polyfit(np.log(table.s), np.log(table.q), 1)
    assert abs(slope - gamma / (2 - p)) <= 1e-3
    C_v = build_powerlike(mesh, p, g).C_v
    assert abs(math.exp(intercept) / C_v - 1) <= 1e-3


# -- 5 ------------------------------------------------------------------------


@pytest.mark.criterion(5, "generic threshold matches the closed form within 1e-2, windows 0-2, < 2 min")
@pytest.mark.parametrize(
    "coef_kind,coef_params,gamma",
    [("abs_sin", {}, 2.0), ("abs_sin_power_weight", {"p": 1.5, "gamma": 1.0}, 1.0)],
    ids=["abs_sin", "power_weight"],
)
def test_threshold_agreement(mesh, coef_kind, coef_params, gamma):
    start = time.perf_counter()
    g = make_functional("lp_of_u", gamma=gamma)
    coef = make_coefficient(coef_kind, coef_params, k_max=3)
    model = build_powerlike(mesh, 1.5, g)
    ctx = build_context(mesh, make_nl("power", {"p": 1.5}), coef, g)
    for i in range(3):
        closed, _ = powerlike_threshold(model, coef, i)
        rep = cross_validate(model, coef, ctx, i, lams=[0.5 * closed])
        assert rep["threshold_deviation"] <= 1e-2, rep
        assert rep["passed"], rep
    assert time.perf_counter() - start < 120.0


# -- 6 ------------------------------------------------------------------------


@pytest.mark.criterion(6, "weighted-sine coefficient: constant thresholds, fixed point at pi/2 + i pi")
def test_weighted_sine_exactness(mesh):
    model = build_powerlike(mesh, 1.5, make_functional("lp_of_u", gamma=1.0))
    coef = make_coefficient("abs_sin_power_weight", {"p": 1.5, "gamma": 1.0}, k_max=4)
    tops = [powerlike_threshold(model, coef, i)[0] for i in range(4)]
    assert (max(tops) - min(tops)) <= 1e-6 * max(tops)
    assert tops[0] == pytest.approx(model.scale, rel=1e-6)
    for i, top in enumerate(tops):
        roots = enumerate_scaled_solutions(model, coef, top, i)
        assert len(roots) == 1 and roots[0].tangential
        assert abs(roots[0].alpha - (math.pi / 2 + i * math.pi)) <= 1e-6


# -- 7 ------------------------------------------------------------------------


def _seventh_configs(mesh):
    rng = np.random.default_rng(20240611)
    out = []
    while len(out) < 20:
        nl, coef, g = _random_nl(rng), _random_coefficient(rng), _random_functional(rng)
        ctx = build_context(mesh, nl, coef, g)
        if certify_monotone(ctx.table)["monotone"]:
            out.append(ctx)
    return out


@pytest.mark.criterion(7, "20 random configurations: >=2 fixed points at 0.5 lambda0, none above 1.05 lambda0~")
def test_count_dichotomy(mesh):
    failures = []
    for k, ctx in enumerate(_seventh_configs(mesh)):
        for i in range(ctx.coef.n_windows):
            th = thresholds(i, ctx)
            tag = f"config {k} ({ctx.nl.kind}, {ctx.coef.kind}, {ctx.g.kind}) window {i}"
            if th.lambda0 is None:
                failures.append(f"{tag}: no threshold ({th.note})")
                continue
            lam = 0.5 * th.lambda0
            fps = [fp for fp in find_fixed_points(lam, i, ctx, exact=True) if not fp.tangential]
            if len(fps) < 2:
                failures.append(f"{tag}: {len(fps)} fixed points at 0.5 lambda0")
            for fp in fps:
                rec = reconstruct_solution(lam, fp.alpha, ctx)
                u = rec.u
                a = float(ctx.coef(np.array([rec.g_value]))[0])
                lhs = a * (ctx.mesh.laplacian @ u)
                rhs = lam * ctx.nl.f(u)
                if np.max(np.abs(lhs - rhs)) > 1e-6 * np.max(np.abs(rhs)):
                    failures.append(f"{tag}: PDE residual at alpha={fp.alpha}")
                if abs(rec.g_value - fp.alpha) > 1e-6 * (1 + fp.alpha):
                    failures.append(f"{tag}: g mismatch at alpha={fp.alpha}")
            above = find_fixed_points(1.05 * th.lambda0_tilde, i, ctx)
            if len(above) != 0:
                failures.append(f"{tag}: {len(above)} fixed points above 1.05 lambda0~")
    assert not failures, "\n".join(failures)


# -- 8 ------------------------------------------------------------------------


@pytest.mark.criterion(8, "three-bump H gives >=6 fixed points for 5 probes in (m, M)")
def test_oscillation_multiplicity(mesh):
    g = make_functional("lp_of_u", gamma=1.0)
    model = build_powerlike(mesh, 1.5, g)
    knots = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
    b = PchipInterpolator(knots, [0.0, 1.0, 0.2, 1.0, 0.2, 1.0, 0.0])

    def a(x):
        # a = b / Q⁻¹ so that H = a Q⁻¹ = b
        x = np.asarray(x, dtype=float)
        xs = np.where(x > 0, x, 1.0)
        return np.where((x > 0) & (x < 3.0), b(np.clip(x, 0, 3)) / model.q_inverse(xs), 0.0)

    coef = make_coefficient("custom", {"a": a, "zeros": [0.0, 3.0]})
    ctx = build_context(mesh, make_nl("power", {"p": 1.5}), coef, g)
    rep = oscillation_analysis(0, ctx)
    assert rep.j == 3 and rep.has_gap
    assert rep.m == pytest.approx(0.2, rel=1e-4) and rep.M == pytest.approx(1.0, rel=1e-4)
    assert len(rep.probes) == 5 and all(rep.m < p < rep.M for p in rep.probes)
    assert all(c >= 6 for c in rep.counts), rep.counts


# -- 9 ------------------------------------------------------------------------


@pytest.mark.criterion(9, "bounds sandwich Q and lambda0 for the saturating kind, slack 1e-6")
@pytest.mark.parametrize("beta0", [1.0, 2.0, 5.0])
@pytest.mark.parametrize("gamma", [1.0, 2.0])
def test_bounds_sandwich(mesh, beta0, gamma):
    nl = make_nl("saturating", {"beta0": beta0})
    g = make_functional("lp_of_u", gamma=gamma)
    coef = make_coefficient("abs_sin", k_max=2)
    ctx = build_context(mesh, nl, coef, g)
    B = build_bounds_context(mesh, gamma)
    slack = 1e-6
    for s, q in zip(ctx.table.s, ctx.table.q):
        assert q_lower_bound(B, nl, s, g) <= q * (1 + slack)
        assert q <= q_upper_bound(B, nl, s, g) * (1 + slack)
    for i in range(coef.n_windows):
        lower, upper = lambda0_bounds(B, nl, coef, i)
        lam0 = thresholds(i, ctx).lambda0
        assert lower * (1 - slack) <= lam0 <= upper * (1 + slack)


# -- 10 -----------------------------------------------------------------------


FINITE_BETA = [c for c in CATALOGUE if c[0] in ("saturating", "rational", "arctan")]
POSITIVE_THETA = [c for c in CATALOGUE if c[0] in ("sqrt_shift", "rational", "arctan")]


@pytest.mark.criterion(10, "Q vanishes at the low end for finite beta; c > 0 near the theta limit")
@pytest.mark.parametrize("kind,params", FINITE_BETA, ids=[k for k, _ in FINITE_BETA])
def test_low_end_limit(mesh, kind, params):
    coef = make_coefficient("abs_sin", k_max=1)
    ctx = build_context(mesh, make_nl(kind, params), coef, make_functional("lp_of_u", gamma=2))
    assert ctx.table.q[0] < 1e-3 * coef.zeros[1]


@pytest.mark.criterion(10, "Q vanishes at the low end for finite beta; c > 0 near the theta limit")
@pytest.mark.parametrize("kind,params", POSITIVE_THETA, ids=[k for k, _ in POSITIVE_THETA])
def test_high_end_limit(mesh, kind, params):
    nl = make_nl(kind, params)
    coef = make_coefficient("abs_sin", k_max=1)
    ctx = build_context(mesh, nl, coef, make_functional("lp_of_u", gamma=2))
    lam = 0.99 * coef.window_max[0] * ctx.lam1 / nl.theta
    assert c_of_lambda(lam, 0, ctx)[0] > 0


# -- 11 -----------------------------------------------------------------------


@pytest.mark.criterion(11, "interval-type laws and the all-coercive equivalence on 200 random draws")
def test_interval_type_laws():
    rng = np.random.default_rng(7)
    lam1 = math.pi**2
    coefs = [
        make_coefficient("abs_sin", k_max=2),
        make_coefficient("abs_sin", {"scale": 1.7, "omega": 1.3}, k_max=3),
        make_coefficient("user_table", {"alpha": [0, 0.5, 1, 1.5, 2, 2.5, 3], "values": [0, 1, 0.3, 1.4, 0.6, 0.9, 0]}),
        make_coefficient(
            "polynomial_bumps", {"coefficients": [0.0, 4.0, -8.0, 5.0, -1.0], "range": [0.0, 2.0]}
        ),
    ]
    kinds = [c for c in CATALOGUE if c[0] != "power"]
    checked = 0
    for _ in range(200):
        coef = coefs[rng.integers(len(coefs))]
        nl = make_nl(*kinds[rng.integers(len(kinds))])
        i = int(rng.integers(coef.n_windows))
        A = coef.window_max[i]
        top = A * lam1 / nl.theta if nl.theta > 0 else 4 * A * lam1 / nl.beta
        lam = rng.uniform(0.01, 0.999) * top
        D = admissible_set(coef, i, lam, nl, lam1)
        assert not D.empty
        types = [iv.type for iv in D.intervals]
        for k, t in enumerate(types):
            if t == "inf-0":
                assert "0-inf" in types[k + 1:], types
        assert D.all_coercive == (A < lam * nl.beta / lam1), (types, A, lam * nl.beta / lam1)
        checked += 1
    assert checked == 200


# -- 12 -----------------------------------------------------------------------


@pytest.mark.criterion(12, "two verified analyze runs are byte-identical")
def test_determinism(tmp_path):
    cfg = {
        "mesh": {"dim": 1, "extents": 1.0, "n": 1024},
        "nonlinearity": {"kind": "sqrt_shift", "params": {"theta0": 0.5}},
        "coefficient": {"kind": "abs_sin", "k_max": 2},
        "functional": {"kind": "lp_of_u", "gamma": 2},
        "analysis": {"lambda_fractions": [0.5, 1.05], "oscillation": True},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    runs = []
    for k, threads in enumerate(("1", "4")):
        out = tmp_path / f"run{k}"
        assert cli.main(["analyze", "--config", str(path), "--out", str(out), "--verify", "--threads", threads]) == 0
        runs.append(out)
    names = sorted(p.name for p in runs[0].iterdir())
    assert names == sorted(p.name for p in runs[1].iterdir())
    match, mismatch, errors = filecmp.cmpfiles(runs[0], runs[1], names, shallow=False)
    assert not mismatch and not errors
    assert len(match) == len(names) > 10
