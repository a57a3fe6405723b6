"""``kq`` command line: run, sweep, fit, thermal, validate.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from typing import List, Optional

import numpy as np

from . import analysis as an
from .bath import total_rate
from .chain import ChainParams, build_grid, gap_info, spectrum
from .config import FORMAT_VERSION, ConfigError, RunConfig, load_json, merge, parse_config
from .dynamics import IntegrationError, thermal_density
from .numerics import QuadratureError
from .schedules import LINEAR, RAMP_RELAX, SUDDEN
from .simulate import log_times, relaxation_after_ramp, simulate, tau_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

TRACE_HEADER = ["t", "T", "D", "D_th_final", "D_th_inst", "excess"]
SWEEP_HEADER = ["tau", "t_f", "D_final", "D_th_final", "excess"]
DEFAULT_SUDDEN_T_MAX = 1e6


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path: str, header: List[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# argument handling


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def parse_list(text: str) -> List[float]:
    """Comma list; ``a,b,...,z`` extends ``a,b`` geometrically (else arithmetically) up to ``z``."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if "..." not in parts:
        return [float(p) for p in parts]
    i = parts.index("...")
    if i < 2 or i != len(parts) - 2:
        raise ValueError(f"cannot expand {text!r}; use a,b,...,z")
    head = [float(p) for p in parts[:i]]
    last = float(parts[-1])
    a, b = head[-2], head[-1]
    if a > 0 and b > a:
        ratio = b / a
        n = int(round(math.log(last / a) / math.log(ratio)))
        if n >= 1 and math.isclose(a * ratio ** n, last, rel_tol=1e-9):
            return head[:-2] + [float(round(a * ratio ** k, 12)) for k in range(n + 1)]
    step = b - a
    if step != 0:
        n = int(round((last - a) / step))
        if n >= 1 and math.isclose(a + step * n, last, rel_tol=1e-9, abs_tol=1e-12):
            return head[:-2] + [a + step * k for k in range(n + 1)]
    raise ValueError(f"{text!r}: {last} is on neither the geometric nor the arithmetic progression of {a}, {b}")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration (overrides the config file)")
    g.add_argument("--mu", type=float)
    g.add_argument("--chi", type=float)
    g.add_argument("--L", type=int)
    g.add_argument("--bath", choices=["fermionic", "bosonic"])
    g.add_argument("--s", type=float)
    g.add_argument("--gamma0", type=float)
    g.add_argument("--schedule", choices=[SUDDEN, LINEAR, RAMP_RELAX])
    g.add_argument("--Ti", type=str, help="initial temperature; 'inf' for the cap")
    g.add_argument("--Tf", type=float)
    g.add_argument("--tau", type=float)
    g.add_argument("--relax", type=float, help="relaxation time after the ramp")
    g.add_argument("--mu-i", type=float, help="pre-quench mu")
    g.add_argument("--chi-i", type=float, help="pre-quench chi")
    g.add_argument("--taus", type=str, help="comma list, e.g. 128,256,...,16384")
    g.add_argument("--mus", type=str, help="comma list of mu values")
    g.add_argument("--per-decade", type=int)
    g.add_argument("--t-min", type=float)
    g.add_argument("--t-max", type=float)
    g.add_argument("--quad-tol", type=float)
    g.add_argument("--ode-tol", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--delta-mode", choices=["absolute", "relative"])
    g.add_argument("--out", type=str, help="output directory")
    g.add_argument("--prefix", type=str)


BASE_CONFIG = {
    "chain": {"mu": 1.0, "chi": 1.0, "L": 10000},
    "bath": {"statistics": "fermionic", "s": 1.0, "gamma0": 0.01},
    "schedule": {"kind": LINEAR, "T_i": 0.0, "T_f": 5.0, "tau": 1024.0},
}


def _flag_overrides(args) -> dict:
    o: dict = {}

    def put(section, key, value):
        if value is not None:
            o.setdefault(section, {})[key] = value

    put("chain", "mu", args.mu)
    put("chain", "chi", args.chi)
    put("chain", "L", args.L)
    put("bath", "statistics", args.bath)
    put("bath", "s", args.s)
    put("bath", "gamma0", args.gamma0)
    put("schedule", "kind", args.schedule)
    if args.Ti is not None:
        put("schedule", "T_i", "inf" if args.Ti.lower() in ("inf", "infinity") else float(args.Ti))
    put("schedule", "T_f", args.Tf)
    put("schedule", "tau", args.tau)
    put("schedule", "relax_duration", args.relax)
    if args.mu_i is not None or args.chi_i is not None:
        put("schedule", "pre_quench", {"mu": args.mu_i if args.mu_i is not None else args.mu,
                                       "chi": args.chi_i})
    if args.taus is not None:
        put("sweep", "taus", parse_list(args.taus))
    if args.mus is not None:
        put("sweep", "mus", parse_list(args.mus))
    put("sampling", "per_decade", args.per_decade)
    put("sampling", "t_min", args.t_min)
    put("sampling", "t_max", args.t_max)
    put("tolerances", "quad_tol", args.quad_tol)
    put("tolerances", "ode_tol", args.ode_tol)
    put("tolerances", "delta", args.delta)
    put("tolerances", "delta_mode", args.delta_mode)
    put("outputs", "dir", args.out)
    put("outputs", "prefix", args.prefix)
    pre = o.get("schedule", {}).get("pre_quench")
    if pre is not None:
        if pre["chi"] is None:
            del pre["chi"]
        if pre["mu"] is None:
            raise ConfigError("--chi-i needs --mu-i (or --mu)")
    return o


def build_config(args) -> RunConfig:
    path = args.config_file or args.config
    data = dict(BASE_CONFIG)
    if path:
        data = merge(data, load_json(path))
    try:
        overrides = _flag_overrides(args)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    data = merge(data, overrides)
    if data.get("schedule", {}).get("kind") == SUDDEN:
        data["schedule"].pop("tau", None)
    cfg = parse_config(data)
    out_dir = cfg.out_dir
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"outputs.dir: cannot create {out_dir!r} ({exc.strerror})") from None
    if not os.access(out_dir, os.W_OK):
        raise ConfigError(f"outputs.dir: {out_dir!r} is not writable")
    return cfg


# ---------------------------------------------------------------------------
# run pieces


def trace_times(cfg: RunConfig) -> np.ndarray:
    sch, sm = cfg.schedule, cfg.sampling
    if sch.kind == SUDDEN:
        t_max = sm.t_max if sm.t_max is not None else DEFAULT_SUDDEN_T_MAX
    else:
        t_max = sch.duration if sm.t_max is None else min(sm.t_max, sch.duration)
    if not t_max > sm.t_min:
        raise ConfigError(f"sampling: t_max={t_max:g} must exceed t_min={sm.t_min:g}")
    return log_times(sm.t_min, t_max, sm.per_decade)


def _trace_rows(series):
    return zip(series.times, series.T, series.D, np.full(series.times.size, series.D_th_final),
               series.D_th_inst, series.excess)


def _safe(fn, *a, **k):
    try:
        return fn(*a, **k), None
    except (an.FitError, an.NotReachedError) as exc:
        return None, str(exc)


def _relaxation_report(cfg: RunConfig, chain: ChainParams, series, name: str) -> dict:
    """Fit the last clean decade of a constant-temperature relaxation trace."""
    eps = spectrum(chain, build_grid(chain)).eps
    t_limit = an.finite_size_limit(float(np.min(total_rate(cfg.bath, eps, cfg.schedule.T_f))))
    out: dict = {"observable": name}
    window, err = _safe(an.last_decade, series.times, series.excess, chain.L, t_limit)
    theory = an.theory_for(chain, cfg.bath, cfg.schedule)
    if window is not None:
        fit, err = _safe(an.fit_power_law, series.times, np.abs(series.excess), window)
        if fit is not None:
            out.update(an.ScalingReport(name, "t", fit, theory).to_dict())
    if err:
        out["fit_error"] = err
    end, _ = _safe(an.clean_end, series.times, series.excess, chain.L)
    if end is not None:
        res, cerr = _safe(an.classify_decay, series.times, np.abs(series.excess), (series.times[0], end))
        if res is not None:
            out["classification"] = res[0]
        else:
            out["classification_error"] = cerr
    return out


def run_trace(cfg: RunConfig, chain: ChainParams, path: str, report: dict, label: str):
    times = trace_times(cfg)
    tol = cfg.tolerances
    series = simulate(chain, cfg.bath, cfg.schedule, times, quad_tol=tol.quad_tol, ode_tol=tol.ode_tol)
    write_csv(path, TRACE_HEADER, _trace_rows(series))
    entry: dict = {"label": label, "trace_csv": os.path.basename(path), "t_ramp_end": series.t_ramp_end,
                   "D_th_final": series.D_th_final}
    sch = cfg.schedule
    if sch.kind == SUDDEN:
        entry["fits"] = [_relaxation_report(cfg, chain, series, "excess")]
    else:
        during = series.times <= sch.ramp_end
        sub = type(series)(series.times[during], series.T[during], series.D[during], series.D_th_final,
                           series.D_th_inst[during])
        tp, err = _safe(an.peak_time, sub)
        entry["peak_time"] = tp
        if err:
            entry["peak_time_error"] = err
        if sch.kind == RAMP_RELAX and sch.relax_duration > 0:
            entry["fits"] = [_shifted_report(cfg, chain)]
    report["traces"].append(entry)
    return series


def _shifted_report(cfg: RunConfig, chain: ChainParams) -> dict:
    sch, sm, tol = cfg.schedule, cfg.sampling, cfg.tolerances
    if not sch.relax_duration > sm.t_min:
        return {"observable": "relaxation_excess", "fit_error": "relaxation stage shorter than t_min"}
    times = log_times(sm.t_min, sch.relax_duration, sm.per_decade)
    rel = relaxation_after_ramp(chain, cfg.bath, sch, times, tol.quad_tol, tol.ode_tol)
    theory = an.theory_for(chain, cfg.bath, sch, "ramp_relax")
    end, err = _safe(an.clean_end, rel.times, rel.excess, chain.L)
    out: dict = {"observable": "relaxation_excess"}
    if end is not None:
        fit, err = _safe(an.fit_shifted_power_law, rel.times, np.abs(rel.excess),
                         None if theory is None else theory.value, (rel.times[0], end))
        if fit is not None:
            out.update(an.ScalingReport("relaxation_excess", "t", fit, theory).to_dict())
    if err:
        out["fit_error"] = err
    return out


def run_sweep(cfg: RunConfig, chain: ChainParams, path: str, report: dict, label: str) -> None:
    tol = cfg.tolerances
    rows = tau_sweep(chain, cfg.bath, cfg.schedule, cfg.sweep.taus, tol.quad_tol, tol.ode_tol)
    write_csv(path, SWEEP_HEADER, ((r.tau, r.t_f, r.D_final, r.D_th_final, r.excess) for r in rows))
    theory = an.theory_for(chain, cfg.bath, cfg.schedule, "ramp")
    entry: dict = {"label": label, "sweep_csv": os.path.basename(path)}
    fit, err = _safe(an.fit_sweep, [r.tau for r in rows], [r.excess for r in rows])
    if fit is not None:
        entry.update(an.ScalingReport("final_excess", "tau", fit, theory).to_dict())
    else:
        entry["fit_error"] = err
    report["sweeps"].append(entry)


def execute(cfg: RunConfig, with_trace: bool = True) -> dict:
    prefix = os.path.join(cfg.out_dir, cfg.prefix)
    gap = gap_info(cfg.chain)
    report = {
        "format_version": FORMAT_VERSION,
        "config": cfg.raw,
        "gap": {"is_critical": gap.is_critical, "gap_closing_k": gap.gap_closing_k, "z": gap.z},
        "traces": [],
        "sweeps": [],
        "transition_times": [],
        "warnings": [],
    }
    sch = cfg.schedule
    if sch.pre_quench is not None and sch.T_i == 0 and gap_info(sch.pre_quench).is_critical:
        report["warnings"].append("parameter jump out of a zero-temperature critical state; "
                                  "the step response is applied to the T_i = 0 state as is")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        base_series = None
        if with_trace:
            base_series = run_trace(cfg, cfg.chain, prefix + "_trace.csv", report, "base")
        if cfg.sweep.taus:
            run_sweep(cfg, cfg.chain, prefix + "_sweep.csv", report, "base")
        for i, mu in enumerate(cfg.sweep.mus):
            chain = cfg.chain.with_quantum(mu, cfg.chain.chi)
            tag = f"{prefix}_mu{i}"
            series = run_trace(cfg, chain, tag + "_trace.csv", report, f"mu={mu!r}")
            if cfg.sweep.taus:
                run_sweep(cfg, chain, tag + "_sweep.csv", report, f"mu={mu!r}")
            if base_series is not None and gap.is_critical and not gap_info(chain).is_critical:
                t_tr, err = _safe(an.transition_time_offcritical, series, base_series, cfg.tolerances.delta,
                                  cfg.tolerances.delta_mode == "relative")
                report["transition_times"].append({"mu": mu, "t_tr": t_tr, "error": err})
    report["warnings"].extend(sorted({str(w.message) for w in caught}))
    write_json(prefix + "_report.json", report)
    return report


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args, with_trace=True) -> int:
    cfg = build_config(args)
    if not with_trace and not (cfg.sweep.taus or cfg.sweep.mus):
        raise ConfigError("sweep: give --taus or --mus (or a config with sweep entries)")
    report = execute(cfg, with_trace=with_trace)
    for entry in report["sweeps"]:
        fit = entry.get("fit")
        if fit:
            theory = entry.get("theory_exponent")
            extra = "" if theory is None else f" (theory {theory:.6g}: {entry['regime']})"
            print(f"{entry['label']}: final excess ~ tau^{fit['exponent']:.4f}{extra}")
        else:
            print(f"{entry['label']}: sweep fit skipped ({entry['fit_error']})")
    for entry in report["traces"]:
        for fit in entry.get("fits", []):
            if "fit" in fit:
                print(f"{entry['label']}: {fit['observable']} slope {fit['fit']['exponent']:.4f}")
        if entry.get("peak_time") is not None:
            print(f"{entry['label']}: peak time {entry['peak_time']:.6g}")
    for w in report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(f"report: {os.path.join(cfg.out_dir, cfg.prefix)}_report.json")
    return EXIT_OK


def read_csv_columns(path: str) -> dict:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            cols = {h: [] for h in header}
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise ConfigError(f"{path}: line {lineno}: expected {len(header)} fields")
                for h, v in zip(header, row):
                    cols[h].append(float(v))
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    except (StopIteration, ValueError) as exc:
        raise ConfigError(f"{path}: malformed CSV ({exc})") from None
    return {h: np.array(v) for h, v in cols.items()}


def cmd_fit(args) -> int:
    cols = read_csv_columns(args.input)
    x_name = args.x or ("tau" if "tau" in cols else "t")
    if x_name not in cols or args.y not in cols:
        raise ConfigError(f"{args.input}: needs columns {x_name!r} and {args.y!r}")
    xs, ys = cols[x_name], np.abs(cols[args.y])
    window = tuple(parse_list(args.window)) if args.window else None
    if window is not None and len(window) != 2:
        raise ConfigError("--window expects lo,hi")
    try:
        if args.model == "power":
            out = an.fit_power_law(xs, ys, window).to_dict()
        elif args.model == "exponential":
            out = an.fit_exponential(xs, ys, window).to_dict()
        elif args.model == "shifted":
            out = an.fit_shifted_power_law(xs, ys, args.alpha, window).to_dict()
        else:
            label, fit = an.classify_decay(xs, ys, window)
            out = {"classification": label, **fit.to_dict()}
    except an.FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps(_jsonable(out), indent=2))
    return EXIT_OK


def cmd_thermal(args) -> int:
    try:
        chain = ChainParams(args.mu, args.chi, args.L)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not args.T >= 0:
        raise ConfigError("--T must be >= 0")
    print(fmt(thermal_density(chain, args.T)))
    return EXIT_OK


def cmd_validate(args) -> int:
    from .oracle import oracle_triangle

    results = oracle_triangle(args.cases, args.seed, args.L)
    worst = max(r.max_deviation for r in results)
    for i, r in enumerate(results):
        c = r.case
        print(f"case {i:2d}: {c.schedule.kind:10s} zeta={c.bath.zeta:+d} s={c.bath.s:g} "
              f"mu={c.chain.mu:.3f} chi={c.chain.chi:.3f} max dev {r.max_deviation:.3e}")
    print(f"max pairwise deviation: {worst:.3e}")
    return EXIT_OK if worst <= args.threshold else EXIT_NUMERICAL


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kq", description="Open Kitaev chain quench dynamics.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, helptext in (("run", "trace, optional sweeps and fits"), ("sweep", "tau or mu scan only")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config_file", nargs="?", help="JSON run config")
        sp.add_argument("--config", help="JSON run config (same as the positional argument)")
        _add_run_flags(sp)

    sp = sub.add_parser("fit", help="fit a trace or sweep CSV")
    sp.add_argument("--input", required=True)
    sp.add_argument("--model", choices=["power", "shifted", "exponential", "classify"], default="power")
    sp.add_argument("--alpha", type=float, help="fixed exponent for the shifted model")
    sp.add_argument("--x", help="abscissa column (default tau if present, else t)")
    sp.add_argument("--y", default="excess", help="ordinate column; its magnitude is fitted")
    sp.add_argument("--window", help="lo,hi")

    sp = sub.add_parser("thermal", help="thermal excitation density")
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--chi", type=float, required=True)
    sp.add_argument("--L", type=int, required=True)
    sp.add_argument("--T", type=float, required=True)

    sp = sub.add_parser("validate", help="cross-check all solvers on small chains")
    sp.add_argument("--cases", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--L", type=int, default=128)
    sp.add_argument("--threshold", type=float, default=1e-6)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_run(args, with_trace=False)
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "thermal":
            return cmd_thermal(args)
        return cmd_validate(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, QuadratureError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
