"""Command-line entry point: deterministic CSV/JSON artifacts per subcommand.

Exit codes: 0 success (including survived-the-budget verdicts), 2 config
error, 3 numeric failure. All floats are formatted with 17 significant
digits so identical configs produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .blowup import (CoverageError, FunctionalConfig, SweepFitError,
                     extremal_ode_lifespan, functional_Y, functional_Z,
                     lifespan_sweep)
from .config import ConfigError, RunConfig, config_to_text, parse_config
from .exponents import check_hypotheses, q_exponent
from .quadrature import QuadratureError
from .solver import GridSpec, InitialProfile, SolutionTrace, picard_solve, solve
from .specfun import SpecFunOverflowError, bessel_k, h_eval
from .testfun import (BqCache, TestFunctionParams, b_q_dt, b_q_eval,
                      b_q_pde_residual)

SCHEMA_VERSION = 1


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _json_dump(obj, indent=0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return pad + "{}"
        items = [f'{pad}  "{k}": {_json_dump(v, indent + 1).lstrip()}'
                 for k, v in obj.items()]
        return pad + "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return pad + "[]"
        items = [_json_dump(v, indent + 1) for v in obj]
        return pad + "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return pad + ("true" if obj else "false")
    if isinstance(obj, float):
        if math.isnan(obj):
            return pad + '"nan"'
        if math.isinf(obj):
            return pad + ('"inf"' if obj > 0 else '"-inf"')
        return pad + format(obj, ".17g")
    if isinstance(obj, int):
        return pad + str(obj)
    return pad + '"' + str(obj).replace('"', '\\"') + '"'


def _write_json(path: str, obj: dict) -> None:
    body = dict(obj)
    body = {"schema_version": SCHEMA_VERSION, **body}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_json_dump(body) + "\n")


def _write_csv(path: str, header: list, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _echo_config(config: RunConfig) -> None:
    os.makedirs(config.output_dir, exist_ok=True)
    with open(os.path.join(config.output_dir, "config.resolved"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write(config_to_text(config))


def _parse_float_list(text: str, flag: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{flag}: expected comma-separated numbers, "
                          f"got {text!r}")


def _load_config(args) -> RunConfig:
    text = None
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    overrides = {}
    flag_map = {
        "n": "model.n", "mu": "model.mu", "alpha": "model.alpha",
        "p": "model.p", "eps": "model.epsilon",
        "rmax": "grid.r_max", "dr": "grid.dr", "cfl": "grid.cfl",
        "tbudget": "grid.t_budget", "threshold": "grid.blowup_threshold",
        "out": "output.dir", "snapshots": "output.snapshots",
    }
    for flag, key in flag_map.items():
        val = getattr(args, flag, None)
        if val is not None:
            overrides[key] = str(val)
    return parse_config(text, overrides)


def _testfn_params(config: RunConfig) -> TestFunctionParams:
    return TestFunctionParams(
        n=config.model.n, mu=config.model.mu, alpha=config.model.alpha,
        p=config.model.p, lambda_rel_tol=config.testfn.lambda_rel_tol,
        lambda_nodes=config.testfn.lambda_nodes,
        angle_nodes=config.testfn.angle_nodes,
    )


def _cmd_exponents(args) -> int:
    config = _load_config(args)
    _echo_config(config)
    report = check_hypotheses(config.model)
    obj = {
        "p_S": report.p_S,
        "p_F": report.p_F,
        "mu_star": report.mu_star,
        "q_left": report.q_left,
        "q_right": report.q_right,
        "gamma_at_p": report.gamma_at_p,
        "hypotheses": [
            {"name": c.name, "passed": c.passed, "witness": c.witness}
            for c in report.hypotheses
        ],
    }
    path = os.path.join(config.output_dir, "exponents.json")
    _write_json(path, obj)
    sys.stdout.write(open(path, encoding="utf-8").read())
    return 0


def _cmd_bessel(args) -> int:
    config = _load_config(args)
    _echo_config(config)
    nus = _parse_float_list(args.nu, "--nu")
    zs = np.geomspace(args.z_min, args.z_max, args.z_points)
    rows = [(nu, z, bessel_k(nu, float(z))) for nu in nus for z in zs]
    path = os.path.join(config.output_dir, "bessel.csv")
    _write_csv(path, ["nu", "z", "value"], rows)
    sys.stdout.write(open(path, encoding="utf-8").read())
    return 0


def _cmd_hfun(args) -> int:
    config = _load_config(args)
    _echo_config(config)
    mu = config.model.mu
    ts = np.geomspace(args.t_min, args.t_max, args.t_points)
    rows = []
    for t in ts:
        ev = h_eval(float(t), mu)
        rows.append((mu, t, ev.value, ev.derivative))
    path = os.path.join(config.output_dir, "hfun.csv")
    _write_csv(path, ["mu", "t", "h", "hprime"], rows)
    sys.stdout.write(open(path, encoding="utf-8").read())
    return 0


def _cmd_testfn_verify(args) -> int:
    config = _load_config(args)
    _echo_config(config)
    params = _testfn_params(config)
    q = params.q
    t_grid = _parse_float_list(args.tgrid, "--tgrid")
    r_fracs = _parse_float_list(args.rfrac, "--rfrac")

    rows = []
    worst = 0.0
    for t in t_grid:
        for frac in r_fracs:
            r = frac * (t + 1.0)
            bq = b_q_eval(t, r, params)
            dbq = b_q_dt(t, r, params)
            resid = b_q_pde_residual(t, r, params)
            worst = max(worst, abs(resid))
            rows.append((t, r, bq, dbq, resid, bq * t ** q))
    path = os.path.join(config.output_dir, "testfn.csv")
    _write_csv(path, ["t", "r", "b_q", "db_q_dt", "pde_residual", "ratio_tq"],
               rows)

    slope_ts = np.geomspace(1e2, 1e4, 9)
    vals = np.array([b_q_eval(float(t), 0.0, params) for t in slope_ts])
    slope = float(np.polyfit(np.log(slope_ts), np.log(vals), 1)[0])
    _write_json(os.path.join(config.output_dir, "testfn.json"), {
        "identity_ok": worst <= 1e-6,
        "asymptotic_slope": slope,
        "slope_target": -q,
    })
    sys.stdout.write(open(os.path.join(config.output_dir, "testfn.json"),
                          encoding="utf-8").read())
    return 0


def _grid_json(grid: GridSpec) -> dict:
    return {"r_max": grid.r_max, "dr": grid.dr, "cfl": grid.cfl,
            "t_budget": grid.t_budget,
            "blowup_threshold": grid.blowup_threshold}


def _cmd_solve(args) -> int:
    config = _load_config(args)
    _echo_config(config)
    snapshot_dt = args.snapshot_dt
    record_dt = snapshot_dt
    if record_dt is None and config.emit_snapshots:
        # requested times are matched against a dense snapshot record
        record_dt = max(config.grid.dt, 0.1)
    trace = solve(InitialProfile(amplitude=config.model.epsilon),
                  config.model, config.grid, snapshot_dt=record_dt)
    out = config.output_dir
    _write_csv(os.path.join(out, "trace.csv"),
               ["t", "sup_norm", "energy", "dissipation", "support_radius"],
               zip(trace.times, trace.sup_norm, trace.energy,
                   trace.damping_dissipation, trace.support_radius))
    emitted = set()
    for want in config.emit_snapshots:
        if not trace.snapshot_times:
            break
        k = int(np.argmin(np.abs(np.asarray(trace.snapshot_times) - want)))
        if k in emitted:
            continue
        emitted.add(k)
        name = f"snapshot_t{format(trace.snapshot_times[k], '.17g')}.csv"
        _write_csv(os.path.join(out, name), ["r", "u"],
                   zip(trace.r, trace.snapshots[k]))
    if snapshot_dt is not None:
        for k, ts in enumerate(trace.snapshot_times):
            name = f"snapshot_t{format(ts, '.17g')}.csv"
            _write_csv(os.path.join(out, name), ["r", "u"],
                       zip(trace.r, trace.snapshots[k]))
    _write_json(os.path.join(out, "verdict.json"), {
        "verdict": trace.verdict,
        "T_num": trace.T_num,
        "refine_gap": trace.refine_gap,
        "grid": _grid_json(config.grid),
    })
    sys.stdout.write(f"verdict={trace.verdict} T_num={_fmt(trace.T_num)}\n")
    return 0


def _cmd_picard(args) -> int:
    config = _load_config(args)
    _echo_config(config)
    trace, gaps = picard_solve(InitialProfile(amplitude=config.model.epsilon),
                               config.model, config.grid,
                               t_small=args.tsmall, max_iter=args.maxiter)
    out = config.output_dir
    _write_csv(os.path.join(out, "picard_gaps.csv"), ["iteration", "gap"],
               enumerate(gaps))
    ratios = [gaps[i + 1] / gaps[i] for i in range(len(gaps) - 1) if gaps[i] > 0]
    _write_json(os.path.join(out, "picard.json"), {
        "contracting": bool(ratios) and max(ratios) < 1.0,
        "max_gap_ratio": max(ratios) if ratios else math.nan,
        "iterations": len(gaps),
    })
    sys.stdout.write(open(os.path.join(out, "picard.json"),
                          encoding="utf-8").read())
    return 0


def _read_trace_dir(path: str) -> SolutionTrace:
    names = sorted(f for f in os.listdir(path)
                   if f.startswith("snapshot_t") and f.endswith(".csv"))
    if not names:
        raise CoverageError(f"no snapshot CSVs found in {path}")
    pairs = []
    for name in names:
        ts = float(name[len("snapshot_t"):-len(".csv")])
        data = np.loadtxt(os.path.join(path, name), delimiter=",", skiprows=1)
        pairs.append((ts, data[:, 0], data[:, 1]))
    pairs.sort(key=lambda item: item[0])
    trace = SolutionTrace(r=pairs[0][1])
    for ts, _, u in pairs:
        trace.snapshot_times.append(ts)
        trace.snapshots.append(u)
    return trace


def _cmd_functional(args) -> int:
    config = _load_config(args)
    _echo_config(config)
    trace = _read_trace_dir(args.run)
    ms = _parse_float_list(args.M, "--M")
    params = _testfn_params(config)
    t_hi = max(ms) * 1.01
    t_lo = min(0.45, min(ms) / 2.0)
    r_hi = float(trace.r[-1])
    t_grid, r_grid = BqCache.build_grids(t_lo, t_hi, r_hi)
    cache = BqCache(params, t_grid, r_grid)
    cfg = FunctionalConfig(params=config.model, bq_cache=cache)
    rows = [(m, functional_Y(trace, m, cfg), functional_Z(trace, m, cfg))
            for m in ms]
    path = os.path.join(config.output_dir, "functional.csv")
    _write_csv(path, ["M", "Y", "Z"], rows)
    sys.stdout.write(open(path, encoding="utf-8").read())
    return 0


def _cmd_ode_lifespan(args) -> int:
    config = _load_config(args)
    _echo_config(config)
    res = extremal_ode_lifespan(p=args.p, eps=args.eps, c0=args.c0,
                                c1=args.c1, s_start=args.s_start)
    path = os.path.join(config.output_dir, "ode_lifespan.json")
    _write_json(path, {
        "s_numeric": res.s_numeric,
        "s_closed": res.s_closed,
        "gap": res.rel_gap,
        "blew_up": res.blew_up,
    })
    sys.stdout.write(open(path, encoding="utf-8").read())
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    _echo_config(config)
    eps_list = _parse_float_list(args.eps_list, "--eps-list")
    out = config.output_dir
    try:
        result = lifespan_sweep(config.model, eps_list, config.grid)
    except SweepFitError as exc:
        result = exc.result
        _write_csv(os.path.join(out, "sweep.csv"),
                   ["eps", "x_fit", "T_num", "refine_gap"],
                   [(r.params.epsilon, r.x_fit, r.T_num, r.refine_gap)
                    for r in result.records])
        _write_json(os.path.join(out, "sweep_fit.json"), {
            "error": str(exc),
            "budget_outs": [{"eps": e, "verdict": v}
                            for e, v in result.budget_outs],
        })
        sys.stderr.write(f"error: blowup_lab: {exc}\n")
        return 3
    _write_csv(os.path.join(out, "sweep.csv"),
               ["eps", "x_fit", "T_num", "refine_gap"],
               [(r.params.epsilon, r.x_fit, r.T_num, r.refine_gap)
                for r in result.records])
    _write_json(os.path.join(out, "sweep_fit.json"), {
        "slope": result.fit.slope,
        "intercept": result.fit.intercept,
        "r2": result.fit.r2,
        "monotone": result.monotone,
        "budget_outs": [{"eps": e, "verdict": v}
                        for e, v in result.budget_outs],
    })
    sys.stdout.write(open(os.path.join(out, "sweep_fit.json"),
                          encoding="utf-8").read())
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epdlab",
        description="numerical laboratory for the singular damped wave "
                    "equation u_tt - Lap u + (mu/t) u_t = t^alpha |u|^p",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, grid_flags=False):
        sp.add_argument("--config", default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--n", type=int, default=None)
        sp.add_argument("--mu", type=float, default=None)
        sp.add_argument("--alpha", type=float, default=None)
        sp.add_argument("--p", type=float, default=None)
        sp.add_argument("--eps", type=float, default=None)
        if grid_flags:
            sp.add_argument("--rmax", type=float, default=None)
            sp.add_argument("--dr", type=float, default=None)
            sp.add_argument("--cfl", type=float, default=None)
            sp.add_argument("--tbudget", type=float, default=None)
            sp.add_argument("--threshold", type=float, default=None)
            sp.add_argument("--snapshots", default=None)

    sp = sub.add_parser("exponents", help="critical-exponent report")
    common(sp)
    sp.set_defaults(func=_cmd_exponents)

    sp = sub.add_parser("bessel", help="K_nu table")
    common(sp)
    sp.add_argument("--nu", default="0.5")
    sp.add_argument("--z-min", type=float, default=1e-3)
    sp.add_argument("--z-max", type=float, default=50.0)
    sp.add_argument("--z-points", type=int, default=40)
    sp.set_defaults(func=_cmd_bessel)

    sp = sub.add_parser("hfun", help="h and h' table")
    common(sp)
    sp.add_argument("--t-min", type=float, default=0.01)
    sp.add_argument("--t-max", type=float, default=50.0)
    sp.add_argument("--t-points", type=int, default=40)
    sp.set_defaults(func=_cmd_hfun)

    sp = sub.add_parser("testfn-verify", help="b_q identity and asymptotics")
    common(sp)
    sp.add_argument("--tgrid", default="1,2,5,10,20")
    sp.add_argument("--rfrac", default="0,0.25,0.5,0.75,0.9")
    sp.set_defaults(func=_cmd_testfn_verify)

    sp = sub.add_parser("solve", help="finite-difference run")
    common(sp, grid_flags=True)
    sp.add_argument("--snapshot-dt", type=float, default=None)
    sp.set_defaults(func=_cmd_solve)

    sp = sub.add_parser("picard", help="contraction-map iteration")
    common(sp, grid_flags=True)
    sp.add_argument("--tsmall", type=float, default=0.25)
    sp.add_argument("--maxiter", type=int, default=8)
    sp.set_defaults(func=_cmd_picard)

    sp = sub.add_parser("functional", help="Y and Z along a stored run")
    common(sp)
    sp.add_argument("--run", required=True, help="directory with snapshot CSVs")
    sp.add_argument("--M", default="2,5,10,20,40")
    sp.set_defaults(func=_cmd_functional)

    sp = sub.add_parser("ode-lifespan", help="extremal ODE blow-up point")
    common(sp)
    sp.add_argument("--c0", type=float, default=1.0)
    sp.add_argument("--c1", type=float, default=1.0)
    sp.add_argument("--s-start", type=float, default=2.0)
    sp.set_defaults(func=_cmd_ode_lifespan)

    sp = sub.add_parser("sweep", help="lifespan scaling sweep")
    common(sp, grid_flags=True)
    sp.add_argument("--eps-list", default="1.0,0.8,0.6,0.5")
    sp.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "eps", None) is None and args.command == "ode-lifespan":
        parser.error("ode-lifespan requires --eps")
    if args.command == "ode-lifespan" and getattr(args, "p", None) is None:
        parser.error("ode-lifespan requires --p")
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"error: config: {exc}\n")
        return 2
    except (ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: config: {exc}\n")
        return 2
    except (QuadratureError, SpecFunOverflowError, CoverageError) as exc:
        sys.stderr.write(f"error: numeric: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
