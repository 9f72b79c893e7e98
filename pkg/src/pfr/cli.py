"""Command-line front end.

    pfr run <config> [--check] [--out DIR]
    pfr validate <config>

Exit codes: 0 success, 2 config error, 3 infeasible constraints,
4 failed check (``--check`` only).  ``PFR_THREADS`` overrides the
``run.threads`` key.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig, load_config, signal_to_config
from .cost import cost_outlet, cost_pair, cost_single
from .experiments import (
    QUOTED_COSTS,
    QUOTED_PERCENTAGES,
    amplitude_sweep_pair,
    amplitude_sweep_single,
    case_study_table,
    default_amplitude_grid,
    optimality_trial,
)
from .model import ConcentrationField, ExtinctionError
from .pdecheck import Grid, convergence_order, exact_outlet_error, is_periodic, periodic_residual, simulate
from .strategy import InfeasibleSpecError, check_admissible_pair, check_admissible_single

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_CHECK = 0, 2, 3, 4


def fmt(x) -> str:
    """Locale-independent scientific notation, 12 significant digits."""
    return f"{float(x):.11e}"


def _json_value(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}{_json_str(str(k))}: {_json_value(v, indent, level + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _json_value(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return "null"
        return fmt(obj)
    return _json_str(str(obj))


def _json_str(s: str) -> str:
    import json
    return json.dumps(s)


def dump_json(obj, path: Path) -> Path:
    path.write_text(_json_value(obj, 2, 0) + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def _print_table(header, rows, out=None):
    out = out or sys.stdout
    cells = [[str(h) for h in header]] + [[fmt(x) if isinstance(x, (float, np.floating)) else str(x) for x in r]
                                          for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    for i, r in enumerate(cells):
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip(), file=out)
        if i == 0:
            print("  ".join("-" * w for w in widths), file=out)


# --------------------------------------------------------------------------
# run types; each returns (summary dict, list of check results)


def _run_evaluate(cfg: ScenarioConfig, out: Path):
    p, spec, c, v = cfg.params, cfg.spec, cfg.control, cfg.flow
    rtol = cfg.tolerances["route_rtol"]
    routes = {}
    if v is None:
        res = check_admissible_single(c, spec)
        residuals, admissible = res.as_dict(), res.admissible
        if c.kind != "sinusoid" or p.n == 1:
            routes["analytic"] = cost_single(c, p, route="analytic").J
        routes["reduced_quadrature"] = cost_single(c, p, route="reduced_quadrature").J
    else:
        if not spec.two_input:
            raise InfeasibleSpecError("flow control needs v_mean, v_min, v_max in [constraint]")
        res = check_admissible_pair(c, v, spec, p.L)
        residuals, admissible = res.as_dict(), res.admissible
        if abs(res.residence_residual) <= 1e-12 * p.L:
            if p.n == 1 or (c.kind != "sinusoid" and v.kind != "sinusoid"):
                routes["analytic"] = cost_pair(c, v, p, route="analytic").J
            routes["reduced_quadrature"] = cost_pair(c, v, p, route="reduced_quadrature").J
    routes["outlet_quadrature"] = cost_outlet(c, p, v).J
    ref = routes["outlet_quadrature"]
    spread = max(abs(J - ref) / ref for J in routes.values())
    _print_table(["route", "J"], list(routes.items()))
    print(f"admissible: {admissible}   residuals: " + ", ".join(f"{k}={v_}" for k, v_ in residuals.items()))
    summary = {
        "control": signal_to_config(c),
        "flow": signal_to_config(v) if v is not None else None,
        "J": routes,
        "route_spread_rel": spread,
        "residuals": residuals,
        "admissible": admissible,
    }
    checks = [("route agreement", spread <= rtol, spread), ("admissible", admissible, None)]
    return summary, checks


def _run_case_study(cfg: ScenarioConfig, out: Path):
    t0 = time.perf_counter()
    table = case_study_table(cfg.params, cfg.spec)
    elapsed = time.perf_counter() - t0
    labels = [r.label for r in table.rows]
    rows = []
    for r in table.rows:
        rows.append([r.label, r.J, f"{r.J:.4e}", r.report.route, "yes" if r.report.admissible else "NO"])
    _print_table(["control", "J [mol/(m2 s)]", "J (5 s.f.)", "route", "admissible"], rows)
    print()
    pct_rows = [[f"{a} vs {b}", table.percentages[(a, b)]] for (a, b) in QUOTED_PERCENTAGES if a in labels and b in labels]
    _print_table(["improvement", "percent"], pct_rows)
    print()
    for d in table.deviations:
        print(f"documented deviation [{d['id']}]: {d['description']}: computed {fmt(d['computed'])}"
              + (f", quoted {d['quoted']}" if "quoted" in d else ""))
    summary = {
        "J": {r.label: r.J for r in table.rows},
        "routes": {r.label: r.report.route for r in table.rows},
        "residuals": {r.label: r.report.residuals for r in table.rows},
        "admissible": {r.label: r.report.admissible for r in table.rows},
        "percentages": {f"{a}_vs_{b}": v for (a, b), v in table.percentages.items()},
        "deviations": table.deviations,
        "elapsed_s": elapsed,
    }
    checks = []
    for label, quoted in QUOTED_COSTS.items():
        if label in labels:
            J = table.J(label)
            checks.append((f"J[{label}] rounds to {quoted}", float(f"{J:.4e}") == quoted, J))
    tol = cfg.tolerances["quoted_pct_abs"]
    for (a, b), quoted in QUOTED_PERCENTAGES.items():
        if (a, b) in table.percentages:
            got = table.percentages[(a, b)]
            checks.append((f"{a} vs {b} ~ {quoted}%", abs(got - quoted) <= tol, got))
    return summary, checks


def _alphas(cfg, key, points_key):
    vals = cfg.sweep[key]
    return np.asarray(vals) if vals else default_amplitude_grid(cfg.sweep[points_key])


def _run_sweep_single(cfg: ScenarioConfig, out: Path):
    alphas = _alphas(cfg, "alphas", "alpha_points")
    single = type(cfg.spec)(cfg.spec.tau, cfg.spec.c_mean, cfg.spec.c_min, cfg.spec.c_max)
    pts = amplitude_sweep_single(alphas, cfg.params, single, threads=cfg.threads)
    csv_path = write_csv(out / f"{cfg.prefix}.csv", ["alpha", "J", "P"],
                         [[q.alpha, q.J, q.P] for q in pts])
    dJ = max(abs(q.J - q.J_closed) / abs(q.J_closed) for q in pts)
    dP = max(abs(q.P - q.P_closed) for q in pts)
    _print_table(["alpha", "J", "P [%]"], [[q.alpha, q.J, q.P] for q in pts])
    print(f"closed form: max rel dJ = {fmt(dJ)}, max dP = {fmt(dP)}")
    tol = cfg.tolerances["closed_form_rtol"]
    summary = {"points": len(pts), "csv": csv_path.name, "max_rel_dJ_closed_form": dJ, "max_abs_dP_closed_form": dP}
    return summary, [("J closed form", dJ <= tol, dJ), ("P closed form", dP <= tol, dP)]


def _run_sweep_pair(cfg: ScenarioConfig, out: Path):
    if not cfg.spec.two_input:
        raise InfeasibleSpecError("sweep_pair needs v_mean, v_min, v_max in [constraint]")
    alphas = _alphas(cfg, "alphas", "alpha_points")
    betas = _alphas(cfg, "betas", "beta_points")
    pts = amplitude_sweep_pair(alphas, betas, cfg.params, cfg.spec, threads=cfg.threads)
    csv_path = write_csv(out / f"{cfg.prefix}.csv", ["alpha", "beta", "J", "P"],
                         [[q.alpha, q.beta, q.J, q.P] for q in pts])
    dJ = max(abs(q.J - q.J_closed) / abs(q.J_closed) for q in pts)
    dP = max(abs(q.P - q.P_closed) for q in pts)
    best = min(pts, key=lambda q: q.J)
    print(f"{len(pts)} points written to {csv_path}")
    print(f"best: alpha={best.alpha:.6g} beta={best.beta:.6g} J={fmt(best.J)} P={best.P:.6g}%")
    print(f"closed form: max rel dJ = {fmt(dJ)}, max dP = {fmt(dP)}")
    tol = cfg.tolerances["closed_form_rtol"]
    summary = {"points": len(pts), "csv": csv_path.name, "max_rel_dJ_closed_form": dJ, "max_abs_dP_closed_form": dP}
    return summary, [("J closed form", dJ <= tol, dJ), ("P closed form", dP <= tol, dP)]


def _run_trial(cfg: ScenarioConfig, out: Path):
    tr = cfg.trial
    rep = optimality_trial(cfg.spec, cfg.params, samples=tr["samples"], pieces=tr["pieces"],
                           seed=cfg.seed, two_input=tr["two_input"], threads=cfg.threads)
    csv_path = write_csv(out / f"{cfg.prefix}.csv", ["sample", "J", "gap"],
                         [[i, J, g] for i, (J, g) in enumerate(zip(rep.samples, rep.gaps))])
    print(f"regime: {rep.regime}   reference: {rep.reference}   J_ref = {fmt(rep.J_reference)}")
    print(f"samples: {len(rep.samples)}   min sampled J = {fmt(rep.J_min_sample)}   "
          f"min gap = {fmt(rep.min_gap)}   violations: {rep.violations}")
    summary = {
        "regime": rep.regime,
        "reference": rep.reference,
        "J_reference": rep.J_reference,
        "J_min_sample": rep.J_min_sample,
        "min_gap": rep.min_gap,
        "max_abs_gap": rep.max_spread,
        "gap_quantiles": dict(zip(["0", "0.25", "0.5", "0.75", "1"],
                                  [float(q) for q in np.quantile(rep.gaps, [0, 0.25, 0.5, 0.75, 1])])),
        "violations": rep.violations,
        "samples": len(rep.samples),
        "seed": rep.seed,
        "csv": csv_path.name,
    }
    checks = [("zero violations", rep.violations == 0, rep.violations)]
    if rep.regime == "neutral_n1":
        checks.append(("n=1 costs identical", rep.max_spread <= cfg.tolerances["optimality_slack"], rep.max_spread))
    return summary, checks


def _run_pde_check(cfg: ScenarioConfig, out: Path):
    p, c, v = cfg.params, cfg.control, cfg.flow
    pde = cfg.pde
    t0 = time.perf_counter()
    res = simulate(p, c, v, Grid(pde["nx"], pde["cfl"], max(pde["periods"], 2)))
    J_exact = cost_outlet(c, p, v).J
    rel = abs(res.cost() - J_exact) / J_exact
    per = periodic_residual(res.period_traces[-2], res.period_traces[-1])
    exact = ConcentrationField(p, c, v).outlet(res.times)
    csv_path = write_csv(out / f"{cfg.prefix}_outlet.csv", ["t", "C_sim", "C_exact"],
                         list(zip(res.times, res.outlet, exact)))
    errors = []
    for nx in pde["resolutions"]:
        r = simulate(p, c, v, Grid(nx, pde["cfl"], max(pde["periods"], 2)))
        errors.append(abs(r.cost() - J_exact) / J_exact)
    order = convergence_order(pde["resolutions"], errors) if len(errors) >= 2 else float("nan")
    elapsed = time.perf_counter() - t0
    _print_table(["nx", "rel cost error"], list(zip(pde["resolutions"], errors)))
    print(f"nx={pde['nx']}: J_sim={fmt(res.cost())} J_exact={fmt(J_exact)} rel={fmt(rel)} "
          f"periodic residual={fmt(per)} clamps={res.clamp_events} order={order:.4f}")
    summary = {
        "nx": pde["nx"], "dt": res.dt, "cfl": res.cfl_max, "J_sim": res.cost(), "J_exact": J_exact,
        "rel_error": rel, "periodic_residual": per, "clamp_events": res.clamp_events,
        "resolutions": pde["resolutions"], "cost_errors": errors, "order": order,
        "max_outlet_error": exact_outlet_error(res, p, c, v), "csv": csv_path.name, "elapsed_s": elapsed,
    }
    checks = [
        ("cost match", rel <= cfg.tolerances["pde_cost_rtol"], rel),
        ("periodic", is_periodic(per, c.bounds[1]), per),
        ("no clamps", res.clamp_events == 0, res.clamp_events),
    ]
    return summary, checks


RUNNERS = {
    "evaluate": _run_evaluate,
    "case_study": _run_case_study,
    "sweep_single": _run_sweep_single,
    "sweep_pair": _run_sweep_pair,
    "trial": _run_trial,
    "pde_check": _run_pde_check,
}


def run(config_path, check: bool = False, out_dir: Optional[str] = None) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleSpecError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    env_threads = os.environ.get("PFR_THREADS")
    if env_threads:
        try:
            cfg.threads = max(1, int(env_threads))
        except ValueError:
            print(f"config error: PFR_THREADS={env_threads!r} is not an integer", file=sys.stderr)
            return EXIT_CONFIG
    out = Path(out_dir) if out_dir else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    try:
        summary, checks = RUNNERS[cfg.run_type](cfg, out)
    except InfeasibleSpecError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ExtinctionError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    summary = {"run_type": cfg.run_type, "seed": cfg.seed, **summary,
               "checks": [{"name": n, "passed": bool(ok), "value": v} for n, ok, v in checks]}
    summary.pop("elapsed_s", None)  # keep artifacts byte-identical across runs
    dump_json(summary, out / f"{cfg.prefix}_summary.json")
    if check:
        failed = [n for n, ok, _ in checks if not ok]
        for n, ok, val in checks:
            print(f"[{'PASS' if ok else 'FAIL'}] {n}" + (f" ({val})" if val is not None else ""))
        if failed:
            return EXIT_CHECK
    return EXIT_OK


def validate(config_path) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleSpecError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(f"ok: run.type={cfg.run_type} n={cfg.params.n} tau={cfg.spec.tau} "
          f"two_input={cfg.spec.two_input} control={cfg.control.kind if cfg.control else None}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfr", description="Periodic bang-bang control of a plug-flow reactor")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario")
    p_run.add_argument("config")
    p_run.add_argument("--check", action="store_true", help="exit 4 if any acceptance check fails")
    p_run.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    p_val = sub.add_parser("validate", help="parse and validate a scenario")
    p_val.add_argument("config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run(args.config, check=args.check, out_dir=args.out)
    return validate(args.config)


if __name__ == "__main__":
    sys.exit(main())
