"""``nonlocal-atlas`` command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 failed self-check under ``--verify``.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analyzer import (
    admissible_set,
    analyze_window,
    build_context,
    h_eval,
    oscillation_analysis,
    thresholds,
)
from .aux_solver import solve_auxiliary
from .bounds import build_bounds_context, lambda0_bounds, q_lower_bound, q_upper_bound
from .config import POWERLIKE_PRESETS, load_config
from .errors import AtlasError, ConfigError, ConvergenceError, VerificationError
from .io import write_csv, write_field, write_json, write_qtable
from .model import make_coefficient, make_nonlinearity
from .powerlike import (
    build_powerlike,
    cross_validate,
    enumerate_scaled_solutions,
    exactness_tag,
    lambda_of_alpha,
    mu0_limit,
    powerlike_threshold,
    scaled_residual,
)
from .qmap import certify_monotone, tabulate_q

log = logging.getLogger("nonlocal_atlas")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4


def _map(fn, items, threads):
    """Ordered map, optionally on a thread pool."""
    items = list(items)
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _windows(cfg, coef):
    sel = cfg.analysis.get("windows")
    if sel is None:
        return list(range(coef.n_windows))
    sel = [int(i) for i in sel]
    bad = [i for i in sel if not 0 <= i < coef.n_windows]
    if bad:
        raise ConfigError(f"analysis.windows: {bad} outside 0..{coef.n_windows - 1}")
    return sorted(set(sel))


def _lambda_lists(section, path):
    lams = [float(x) for x in section.get("lambdas", [])]
    rng = section.get("lambda_range")
    if rng:
        try:
            lams += list(np.geomspace(float(rng["lo"]), float(rng["hi"]), int(rng.get("n", 8))))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{path}.lambda_range: {exc}") from exc
    fracs = [float(x) for x in section.get("lambda_fractions", [])]
    if any(x <= 0 for x in lams + fracs):
        raise ConfigError(f"{path}: lambda values must be positive")
    return lams, fracs


class _Checks:
    """Collects named pass/fail results for ``--verify``."""

    def __init__(self):
        self.items = []

    def add(self, name, ok, detail=None):
        self.items.append({"check": name, "passed": bool(ok), "detail": detail})

    @property
    def passed(self):
        return all(c["passed"] for c in self.items)

    def finish(self, out):
        write_json(out / "verify.json", {"passed": self.passed, "checks": self.items})
        if not self.passed:
            failed = [c["check"] for c in self.items if not c["passed"]]
            raise VerificationError(f"self-checks failed: {', '.join(failed)}")


def _gnuplot(path, plots):
    lines = ["set datafile separator ','", "set key autotitle columnhead", "set grid"]
    for title, file, using, extra in plots:
        lines += [f"set title '{title}'", f"{extra}plot '{file}' using {using} with lines", "pause -1"]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# qcurve
# ---------------------------------------------------------------------------


def cmd_qcurve(cfg, out, verify=False, threads=1):
    comps = cfg.components(need=("nl", "g"))
    out.mkdir(parents=True, exist_ok=True)
    sampling = cfg.analysis
    table = tabulate_q(
        comps.mesh,
        comps.nl,
        comps.g,
        n=int(sampling.get("samples", 64)),
        q_low=sampling.get("q_low"),
        q_high=sampling.get("q_high"),
        t_span=sampling.get("t_span"),
        threads=threads,
        **cfg.solver_options,
    )
    write_qtable(out, table)
    _gnuplot(out / "q.gp", [("Q(s)", "q.csv", "1:2", "set logscale xy\n")])
    if verify:
        checks = _Checks()
        tol = cfg.solver_options.get("tol_pde", 1e-9)
        worst = max(d["residual"] for d in table.diagnostics)
        checks.add("sample_residuals", all(d["residual"] <= tol * max(1.0, d["Q"]) + 1e-6 for d in table.diagnostics), worst)
        mono = certify_monotone(table)
        expected = comps.g.kind == "lp_of_u" or (comps.g.kind == "lp_of_grad" and comps.g.gamma == 2)
        if expected:
            checks.add("monotone", mono["monotone"], mono["violation"])
        if comps.nl.kind == "power" and comps.g.homogeneity is not None:
            slope = np.polyfit(np.log(table.s), np.log(table.q), 1)[0]
            target = comps.g.homogeneity / (2 - comps.nl.params["p"])
            checks.add("homogeneity_slope", abs(slope - target) <= 1e-3, float(slope))
        checks.finish(out)
    return table


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def cmd_analyze(cfg, out, verify=False, threads=1):
    comps = cfg.components()
    windows = _windows(cfg, comps.coef)
    lams, fracs = _lambda_lists(cfg.analysis, "analysis")
    if not lams and not fracs:
        raise ConfigError("analysis: give lambdas, lambda_range or lambda_fractions")
    out.mkdir(parents=True, exist_ok=True)
    mesh = comps.mesh
    mesh.eigenpair, mesh.torsion  # computed once before any worker starts
    ctx = build_context(
        mesh, comps.nl, comps.coef, comps.g, windows=windows,
        n_samples=int(cfg.analysis.get("samples", 64)), threads=threads, **cfg.solver_options,
    )
    write_qtable(out, ctx.table)
    tol_g = float(cfg.tolerances.get("tol_g", 1e-6))

    def run(i):
        th = thresholds(i, ctx)
        per = list(lams)
        if fracs:
            if th.lambda0 is None:
                raise ConvergenceError(f"window {i}: no threshold found ({th.note}); cannot scale lambda_fractions")
            per += [f * th.lambda0 for f in fracs]
        reports = [analyze_window(lam, i, ctx, with_thresholds=False) for lam in per]
        osc = oscillation_analysis(i, ctx) if cfg.analysis.get("oscillation") and ctx.table.monotone else None
        return i, th, reports, osc

    results = _map(run, windows, threads)

    c_rows, fp_rows, summary = [], [], {"windows": [], "lambdas": {}}
    for i, th, reports, osc in results:
        for lam, c in zip(*th.grid):
            c_rows.append((i, lam, c))
        for k, rep in enumerate(reports):
            d = rep.as_dict()
            d.update(th.as_dict())
            write_json(out / f"window_{i}_lambda_{k}.json", d)
            for fp in d["fixed_points"]:
                fp_rows.append((i, rep.lam, fp["alpha"], fp["tangential"],
                                math.nan if fp["g_residual"] is None else fp["g_residual"],
                                math.nan if fp["pde_residual"] is None else fp["pde_residual"]))
            for j, rec in enumerate(rep.solutions):
                write_field(out / f"solution_w{i}_l{k}_{j}.csv", mesh, rec.u,
                            {"lambda": rep.lam, "alpha": rec.alpha, "s": rec.s})
            key = "%.12e" % rep.lam
            summary["lambdas"][key] = summary["lambdas"].get(key, 0) + rep.count
        summary["windows"].append({"i": i, **th.as_dict()})
        if osc is not None:
            write_json(out / f"oscillation_{i}.json", osc.as_dict())
    write_csv(out / "c_lambda.csv", ["window", "lambda", "c"], c_rows)
    write_csv(out / "fixed_points.csv", ["window", "lambda", "alpha", "tangential", "g_residual", "pde_residual"], fp_rows)
    if ctx.table.monotone:
        h_rows = []
        for i in windows:
            lo, hi = comps.coef.window(i)
            x = np.linspace(lo, hi, 1026)[1:-1]
            h_rows += [(i, a, h) for a, h in zip(x, h_eval(ctx, x))]
        write_csv(out / "h_curve.csv", ["window", "alpha", "H"], h_rows)
    write_json(out / "summary.json", summary)
    _gnuplot(out / "plot.gp", [
        ("c(lambda)", "c_lambda.csv", "2:3", "set logscale x\n"),
        ("H(alpha)", "h_curve.csv", "2:3", "unset logscale\n"),
    ])
    if verify:
        _verify_analyze(ctx, results, tol_g, out)
    return results


def _verify_analyze(ctx, results, tol_g, out):
    checks = _Checks()
    tol_fp = ctx.solver_options.get("tol_fp", 1e-10)
    rng = np.random.default_rng(0)
    for i, th, reports, _ in results:
        for rep in reports:
            for rec in rep.solutions:
                checks.add(f"w{i}:residuals@{rec.alpha:.6g}",
                           rec.relative_pde_residual <= 1e-6 and rec.g_residual <= tol_g * (1 + rec.alpha),
                           {"pde": rec.relative_pde_residual, "g": rec.g_residual})
                a2 = float(ctx.coef(np.array([rec.g_value]))[0])
                again = solve_auxiliary(ctx.mesh, ctx.nl, rep.lam / a2, check_uniqueness=False, **ctx.solver_options)
                gap = float(np.max(np.abs(again.w - rec.u)))
                checks.add(f"w{i}:reentry@{rec.alpha:.6g}", gap <= 10 * tol_fp * max(1.0, float(np.max(rec.u))), gap)
            laws = _interval_laws(ctx, i, rep.lam)
            checks.add(f"w{i}:interval_laws@{rep.lam:.6g}", laws, None)
            if th.lambda0_tilde is not None and rep.lam > th.lambda0_tilde * (1 + 1e-6):
                checks.add(f"w{i}:nonexistence@{rep.lam:.6g}", rep.count == 0, rep.count)
        if ctx.table.monotone and th.lambda0 is not None:
            spread = abs(th.lambda0 - th.lambda0_tilde) / th.lambda0
            agree = abs(th.lambda0 - th.lambda0_monotone) / th.lambda0
            checks.add(f"w{i}:threshold_consistency", spread <= 1e-6 and agree <= 1e-6, {"spread": spread, "monotone": agree})
            lo, hi = ctx.coef.window(i)
            alpha = rng.uniform(lo, hi, 200)
            lam = rng.uniform(0.05, 2.0, 200) * th.lambda0
            bad = 0
            for a, l in zip(alpha, lam):
                D = admissible_set(ctx.coef, i, l, ctx.nl, ctx.lam1)
                if not D.contains(a, closed=False):
                    continue
                h = float(h_eval(ctx, np.array([a]))[0])
                if abs(h - l) <= 1e-9 * l:
                    continue
                if (float(ctx.P(l, np.array([a]))[0]) < a) != (l < h):
                    bad += 1
            checks.add(f"w{i}:sign_dictionary", bad == 0, bad)
    checks.finish(out)


def _interval_laws(ctx, i, lam):
    D = admissible_set(ctx.coef, i, lam, ctx.nl, ctx.lam1)
    types = [iv.type for iv in D.intervals]
    for k, t in enumerate(types):
        if t == "inf-0" and "0-inf" not in types[k + 1:]:
            return False
    A = ctx.coef.window_max[i]
    if not D.empty:
        if D.all_coercive != (A < lam * ctx.nl.beta / ctx.lam1):
            return False
    return True


# ---------------------------------------------------------------------------
# powerlike
# ---------------------------------------------------------------------------


def _powerlike_coefficient(cfg, comps, p, gamma):
    entry = cfg.powerlike
    preset = entry.get("preset")
    if preset is None:
        if comps.coef is None:
            raise ConfigError("powerlike: give a preset or a coefficient section")
        return comps.coef, None
    if preset not in POWERLIKE_PRESETS:
        raise ConfigError(f"powerlike.preset: unknown preset {preset!r}; choose from {POWERLIKE_PRESETS}")
    k_max = int(entry.get("k_max", 3))
    try:
        if preset == "abs-sin":
            return make_coefficient("abs_sin", k_max=k_max), preset
        return make_coefficient("abs_sin_power_weight", {"p": p, "gamma": gamma}, k_max=k_max), preset
    except AtlasError as exc:
        raise ConfigError(f"powerlike.preset: {exc}") from exc


def cmd_powerlike(cfg, out, verify=False, threads=1):
    entry = cfg.powerlike
    if "p" not in entry:
        raise ConfigError("powerlike.p: missing")
    p = float(entry["p"])
    if not (1 < p < 2 or 2 < p <= 6):
        raise ConfigError(f"powerlike.p: must be in (1, 2) or (2, 6], got {p}")
    need = ("g", "coef") if cfg.coefficient and not entry.get("preset") else ("g",)
    comps = cfg.components(need=need)
    if comps.g.homogeneity is None:
        raise ConfigError(f"functional: {comps.g.kind} is not homogeneous")
    coef, preset = _powerlike_coefficient(cfg, comps, p, comps.g.homogeneity)
    lams, fracs = _lambda_lists(entry, "powerlike")
    out.mkdir(parents=True, exist_ok=True)
    model = build_powerlike(comps.mesh, p, comps.g)
    gamma = model.gamma
    windows = list(range(coef.n_windows))
    tops = _map(lambda i: powerlike_threshold(model, coef, i), windows, threads)
    mu0, mu0_tag = mu0_limit(model, coef)
    info = {
        "p": p,
        "gamma": gamma,
        "C_v": model.C_v,
        "scale": model.scale,
        "residual": model.residual,
        "preset": preset,
        "mu0": mu0,
        "mu0_tag": mu0_tag,
        "lambda_at_zero": model.scale * mu0 if mu0_tag != "infinite" else math.inf,
        "windows": [],
    }
    if preset == "abs-sin":
        info["reference_lower"] = (math.pi / (2 * model.C_v)) ** ((2 - p) / gamma)
    for i, (top, arg) in zip(windows, tops):
        info["windows"].append({"i": i, "lambda0": top, "argmax": arg, "exactness": exactness_tag(model, coef, i)})
    if p > 2 and mu0_tag != "zero":
        lam0 = tops[0][0]
        info["first_window_regime"] = "two-then-one" if info["lambda_at_zero"] < lam0 else "one"
    write_json(out / "powerlike.json", info)
    write_csv(out / "thresholds.csv", ["window", "lambda0", "argmax"], [(i, t, a) for i, (t, a) in zip(windows, tops)])
    curve = []
    for i in windows:
        lo, hi = coef.window(i)
        x = np.linspace(lo, hi, 514)[1:-1]
        curve += [(i, a, l) for a, l in zip(x, lambda_of_alpha(model, coef, x))]
    write_csv(out / "lambda_curve.csv", ["window", "alpha", "lambda"], curve)
    write_field(out / "v.csv", comps.mesh, model.v, {"p": p})
    sols = []
    for i, (top, _) in zip(windows, tops):
        for lam in lams + [f * top for f in fracs]:
            roots = enumerate_scaled_solutions(model, coef, lam, i)
            sols.append({"window": i, "lambda": lam, "solutions": [r.as_dict() for r in roots]})
    write_json(out / "solutions.json", sols)
    _gnuplot(out / "plot.gp", [("lambda(alpha)", "lambda_curve.csv", "2:3", "")])
    if verify:
        checks = _Checks()
        for entry in sols:
            for r in entry["solutions"]:
                res = scaled_residual(model, coef, entry["lambda"], r["alpha"])
                checks.add(f"w{entry['window']}:scaled_residual@{r['alpha']:.6g}", res <= 1e-8, res)
        if preset == "abs-sin-power-weight":
            vals = [t for t, _ in tops]
            spread = (max(vals) - min(vals)) / max(vals)
            checks.add("constant_thresholds", spread <= 1e-6, spread)
        if preset == "abs-sin" and p < 2:
            checks.add("reference_lower", all(t >= info["reference_lower"] * (1 - 1e-9) for t, _ in tops), None)
        if p < 2:
            ctx = build_context(comps.mesh, make_nonlinearity("power", p=p), coef, comps.g, threads=threads)
            for i in windows:
                rep = cross_validate(model, coef, ctx, i, lams=[0.5 * tops[i][0]])
                checks.add(f"w{i}:cross_validate", rep["passed"], rep)
        checks.finish(out)
    return info


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


def cmd_bounds(cfg, out, verify=False, threads=1):
    comps = cfg.components()
    if comps.g.kind != "lp_of_u":
        raise ConfigError(f"functional.kind: bounds need lp_of_u, got {comps.g.kind}")
    windows = _windows(cfg, comps.coef)
    if comps.g.gamma < 1:
        raise ConfigError(f"functional.gamma: bounds need gamma >= 1, got {comps.g.gamma}")
    out.mkdir(parents=True, exist_ok=True)
    B = build_bounds_context(comps.mesh, comps.g.gamma)
    ctx = build_context(comps.mesh, comps.nl, comps.coef, comps.g, windows=windows, threads=threads, **cfg.solver_options)
    table = ctx.table
    bounded = comps.nl.sup is not None and math.isfinite(comps.nl.sup)
    slack = 1e-6
    rows, ok_samples = [], True
    for s, q in zip(table.s, table.q):
        lo = q_lower_bound(B, comps.nl, s, comps.g)
        up = q_upper_bound(B, comps.nl, s, comps.g) if bounded else math.inf
        ok_samples &= bool(lo <= q * (1 + slack) and q <= up * (1 + slack))
        rows.append((s, q, lo, up))
    write_csv(out / "bounds_samples.csv", ["s", "Q", "lower", "upper"], rows)
    per = []
    ths = _map(lambda i: thresholds(i, ctx), windows, threads)
    ok_lambda = True
    for i, th in zip(windows, ths):
        lower, upper = lambda0_bounds(B, comps.nl, comps.coef, i)
        lam0 = th.lambda0
        inside = lam0 is not None and lam0 <= upper * (1 + slack) and (lower is None or lam0 >= lower * (1 - slack))
        ok_lambda &= bool(inside)
        per.append({"i": i, "lambda0": lam0, "lower": lower, "upper": upper, "inside": bool(inside),
                    "note": "lower bound needs bounded f" if lower is None else ""})
    report = {
        "context": B.as_dict(),
        "nonlinearity": comps.nl.kind,
        "bounded": bounded,
        "sample_sandwich": ok_samples,
        "windows": per,
        "passed": bool(ok_samples and ok_lambda),
    }
    write_json(out / "bounds.json", report)
    _gnuplot(out / "plot.gp", [("Q and bounds", "bounds_samples.csv", "1:2", "set logscale xy\n")])
    if verify:
        checks = _Checks()
        checks.add("sample_sandwich", ok_samples)
        checks.add("lambda0_sandwich", ok_lambda, per)
        checks.finish(out)
    return report


COMMANDS = {"qcurve": cmd_qcurve, "analyze": cmd_analyze, "powerlike": cmd_powerlike, "bounds": cmd_bounds}


def build_parser():
    parser = argparse.ArgumentParser(prog="nonlocal-atlas", description="Fixed-point analysis of nonlocal elliptic problems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON or TOML run configuration")
    parser.add_argument("--out", help="output directory (default: config 'output' or ./atlas-out)")
    parser.add_argument("--verify", action="store_true", help="run self-checks; exit 4 on failure")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (results are merged in order)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config)
        out = Path(args.out or cfg.output or "atlas-out")
        COMMANDS[args.command](cfg, out, verify=args.verify, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AtlasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{args.command}: wrote {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
