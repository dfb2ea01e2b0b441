"""Command-line front end: ``tripoint <command> --config run.cfg``.

Every command writes one table (CSV or JSON) plus a summary with a
pass/fail entry per check.  The exit status is 0 exactly when all checks
pass, 1 when a check fails, 2 for configuration errors and 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .asymptotics import ORDERS, decay_fit, predict
from .birkhoff import B_term, factorization_deviation, setup as birkhoff_setup, solve_X
from .config import RunConfig, apply_overrides, load_config, parse_config
from .deltamodel import DeltaCharacteristic, delta_flow
from .errors import ConfigError, DegenerateFit, TripointError
from .propagator import NU
from .spectrum import PairCharacteristic, eigenvalue_flow, locate_many, spectrum_range
from .trace import recover_p, recover_q, trace_scan

COMMANDS = ("spectrum", "flow", "trace-check", "asym-check", "birkhoff-verify", "delta-demo", "recover")

# slope limits for the asymptotic orders and the Birkhoff decay checks
ASYM_SLOPE_LIMITS = {"O1": 0.2, "O2": -0.8, "O3": -1.2}
FACTORIZATION_SLOPE = -0.8
X_SLOPE_PER_M = -0.8


# ---------------------------------------------------------------------------
# formatting


def format_number(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


def _plain(v):
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def render_table(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([_plain(r) for r in rows], indent=1) + "\n"
    if not rows:
        return ""
    cols = list(rows[0].keys())
    out = [",".join(cols)]
    for r in rows:
        out.append(",".join(format_number(r[c]) for c in cols))
    return "\n".join(out) + "\n"


def _slope(xs, ys):
    try:
        return decay_fit(list(zip(xs, ys)), min_points=2).slope
    except DegenerateFit:
        return -math.inf


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(cfg: RunConfig, threads: int = 1):
    pair = cfg.pair()
    N = int(cfg.require("N"))
    # a bare pair keeps the asymptotic Newton seeds; a custom tolerance needs the wrapper
    rtol = cfg.tol("char_rtol")
    target = pair if rtol == PairCharacteristic(pair).rtol else PairCharacteristic(pair, rtol)
    recs = spectrum_range(target, N, merge_tol=cfg.tol("merge_tol"))
    rows = [{"n": r.index, "re": r.value.real, "im": r.value.imag,
             "multiplicity": r.multiplicity, "residual": r.residual, "method": r.method} for r in recs]
    checks = {"count_2N": len(recs) == 2 * N}
    extra = {"N": N}
    if pair.is_zero:
        err = max(abs(r.value - np.sign(r.index) * (NU * abs(r.index)) ** 3) / (NU * abs(r.index)) ** 3
                  for r in recs)
        checks["closed_form"] = err <= cfg.tol("closed_form_tol")
        extra["closed_form_max_rel_error"] = err
    return rows, checks, extra


def cmd_flow(cfg: RunConfig, threads: int = 1):
    n = int(cfg.require("n"))
    ts = cfg.t_grid(default_points=41)
    if cfg.has("gamma"):
        target = DeltaCharacteristic(float(cfg.get("gamma")))
    else:
        target = cfg.pair()
    recs = eigenvalue_flow(target, n, ts, merge_tol=cfg.tol("merge_tol"), partner=cfg.get("partner"))
    rows = [{"n": r.index, "t": r.t, "re": r.value.real, "im": r.value.imag,
             "multiplicity": r.multiplicity, "residual": r.residual, "method": r.method} for r in recs]
    checks = {"tracked": len(recs) == len(ts)}
    extra = {}
    if abs(ts[0]) < 1e-14 and abs(ts[-1] - 1.0) < 1e-14:
        drift = abs(recs[-1].value - recs[0].value) / (1.0 + abs(recs[0].value))
        checks["periodic"] = drift <= cfg.tol("merge_tol")
        extra["period_drift"] = drift
    return rows, checks, extra


def cmd_trace(cfg: RunConfig, threads: int = 1):
    pair = cfg.pair()
    N = int(cfg.get("N", 25))
    ts = cfg.t_grid() if (cfg.has("t_grid") or cfg.has("t_points")) else np.round(np.arange(1, 10) / 10, 12)
    floor = float(cfg.get("trace_floor", 0.01))
    res = trace_scan(pair, ts, N, threads=threads, n0=cfg.get("n0"))
    rows = [r.to_row() for r in res]
    checks = {
        "residual_within_tail": all(r.residual <= max(floor, 3.0 * r.tail_estimate) for r in res),
        "lhs_real": all(abs(r.lhs_imag) <= cfg.tol("imag_tol") for r in res),
    }
    extra = {"N": N, "max_residual": max(r.residual for r in res),
             "max_tail_estimate": max(r.tail_estimate for r in res), "n0": res[0].n0 if res else 0}
    return rows, checks, extra


def cmd_asym(cfg: RunConfig, threads: int = 1):
    pair = cfg.pair()
    lo, hi = (int(v) for v in cfg.get("n_range", [8, 40]))
    if lo < 1 or hi <= lo:
        raise ConfigError("field 'n_range' must be [lo, hi] with 1 <= lo < hi")
    ns = [n for k in range(lo, hi + 1) for n in (k, -k)]
    recs = {r.index: r.value for r in locate_many(pair, ns)}
    rows, series = [], {o: {"pos": [], "neg": []} for o in ORDERS}
    for n in sorted(ns):
        mu = recs[n]
        row = {"n": n, "computed": mu.real}
        for o in ORDERS:
            row[f"pred_{o}"] = predict(pair, n, o).value
        for o in ORDERS:
            r = mu.real - row[f"pred_{o}"]
            row[f"res_{o}"] = r
            series[o]["pos" if n > 0 else "neg"].append((abs(n), r))
        rows.append(row)
    slopes, checks = {}, {}
    for o, limit in ASYM_SLOPE_LIMITS.items():
        for side in ("pos", "neg"):
            try:
                s = decay_fit(series[o][side]).slope
            except DegenerateFit:
                s = -math.inf
            slopes[f"{o}_{side}"] = s
            checks[f"{o}_{side}_slope"] = s <= limit
    return rows, checks, {"slopes": slopes, "n_range": [lo, hi]}


def cmd_birkhoff(cfg: RunConfig, threads: int = 1):
    pair = cfg.pair()
    zs = [float(v) for v in cfg.get("z_values", [20.0, 40.0, 80.0])]
    thetas = [float(v) for v in cfg.get("thetas", [0.0, math.pi / 12, math.pi / 6])]
    ms = [int(v) for v in cfg.get("m_values", [1, 2, 3])]
    rows, checks, slopes = [], {}, {}
    for m in ms:
        st = birkhoff_setup(pair, m)
        for th in thetas:
            xdev, fdev, bdiag = [], [], []
            for r in zs:
                z = r * complex(math.cos(th), math.sin(th))
                sol = solve_X(st, z, tol=cfg.tol("picard_tol"), refine_tol=cfg.tol("refine_tol"))
                dev = float(np.max(np.abs(sol.values - np.eye(3))))
                B = B_term(st, z, sol.grid)
                bd = float(np.max(np.abs(np.diagonal(B, axis1=1, axis2=2))))
                lead = factorization_deviation(st, z, leading=True)
                full = factorization_deviation(st, z, tol=cfg.tol("picard_tol"), refine_tol=cfg.tol("refine_tol"))
                xdev.append(dev)
                fdev.append(lead)
                bdiag.append(bd)
                rows.append({"m": m, "theta": th, "abs_z": r, "x_minus_identity": dev, "b_diagonal": bd,
                             "factorization_leading": lead, "factorization_full": full,
                             "iterations": sol.iterations, "nodes": int(sol.grid.size),
                             "contraction_estimate": sol.contraction_estimate,
                             "measured_ratio": sol.measured_ratio})
                checks.setdefault(f"m{m}_contraction", True)
                checks[f"m{m}_contraction"] &= sol.measured_ratio <= max(sol.contraction_estimate, 1e-300)
            key = f"m{m}_theta{th:.4f}"
            slopes[f"{key}_X"] = _slope(zs, xdev)
            checks[f"{key}_X_slope"] = slopes[f"{key}_X"] <= X_SLOPE_PER_M * m
            slopes[f"{key}_factorization"] = _slope(zs, fdev)
            slopes[f"{key}_B_diagonal"] = _slope(zs, bdiag)
            if m == 1:
                checks[f"{key}_factorization_slope"] = slopes[f"{key}_factorization"] <= FACTORIZATION_SLOPE
    return rows, checks, {"slopes": slopes}


def cmd_delta(cfg: RunConfig, threads: int = 1):
    gamma = float(cfg.get("gamma", 40.0))
    ts = cfg.t_grid(default_points=201)
    res = delta_flow(gamma, ts)
    rows = []
    for branch, vals in ((-1, res.mu_minus), (1, res.mu_plus)):
        for t, v in zip(res.t, vals):
            rows.append({"t": float(t), "re": v.real, "im": v.imag, "branch": branch})
    checks = {
        "two_collisions": len(res.collisions) == 2 and 0 < res.collisions[0] < res.collisions[-1] < 1,
        "double_zeros": all(w == 2 for w in res.collision_windings),
        "conjugate_symmetry": res.conjugate_error <= cfg.tol("conj_tol"),
        "endpoints": res.endpoint_error <= cfg.tol("endpoint_tol") * NU ** 3,
    }
    extra = {"gamma": gamma, "collisions": res.collisions,
             "collision_values": [complex(v).real for v in res.collision_values],
             "collision_windings": res.collision_windings, "conjugate_error": res.conjugate_error,
             "endpoint_error": res.endpoint_error}
    return rows, checks, extra


def cmd_recover(cfg: RunConfig, threads: int = 1):
    pair = cfg.pair()
    N = int(cfg.get("N", 10))
    mode = cfg.get("recover", "both")
    if mode not in ("q", "p", "both"):
        raise ConfigError("field 'recover' must be 'q', 'p' or 'both'")
    ts = cfg.t_grid(default_points=64)
    floor = float(cfg.get("trace_floor", 0.01))
    sums = np.array([r.lhs for r in trace_scan(pair, ts, N, threads=threads, n0=cfg.get("n0"))])
    rows = [{"t": float(t)} for t in ts]
    checks, extra = {}, {"N": N}
    if mode in ("q", "both"):
        rq = recover_q(sums, pair.p, float(pair.q(0.0)), ts)
        err = rq.max_error(pair.q)
        for row, v, w in zip(rows, rq.values, pair.q(ts)):
            row["q_recovered"], row["q_true"] = float(v), float(w)
        checks["recover_q"] = err <= 5.0 * floor
        extra["q_max_error"] = err
    if mode in ("p", "both"):
        rp = recover_p(sums, pair.q, float(pair.p(0.0)), float(pair.p.derivative(1)(0.0)), ts)
        err = rp.max_error(pair.p)
        for row, v, w in zip(rows, rp.values, pair.p(ts)):
            row["p_recovered"], row["p_true"] = float(v), float(w)
        checks["recover_p"] = err <= 5.0 * floor
        extra["p_max_error"] = err
    return rows, checks, extra


HANDLERS = {
    "spectrum": cmd_spectrum,
    "flow": cmd_flow,
    "trace-check": cmd_trace,
    "asym-check": cmd_asym,
    "birkhoff-verify": cmd_birkhoff,
    "delta-demo": cmd_delta,
    "recover": cmd_recover,
}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tripoint", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"tripoint {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="flat key = value run configuration")
    ap.add_argument("--out", help="table output path (summary goes to <out>.summary.json)")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--tol-override", action="append", default=[], metavar="NAME=VALUE")
    return ap


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be positive", file=stderr)
        return 2
    try:
        cfg = apply_overrides(load_config(args.config), args.tol_override)
        rows, checks, extra = HANDLERS[args.command](cfg, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        return 2
    except TripointError as exc:
        print(f"{type(exc).__name__}: {exc}", file=stderr)
        return 3
    checks = {k: bool(v) for k, v in checks.items()}
    passed = all(checks.values())
    summary = {"command": args.command, "passed": passed, "checks": checks, **_plain(extra)}
    table = render_table(rows, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table)
        with open(args.out + ".summary.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(summary, fh, indent=1, sort_keys=True)
            fh.write("\n")
    else:
        stdout.write(table)
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}", file=stderr)
    return 0 if passed else 1


def main() -> None:
    sys.exit(run())


__all__ = ["run", "main", "parse_config", "render_table", "format_number", "HANDLERS"]
