"""Command line harness: single runs, parameter sweeps and setup comparisons.

    jamshield optimize <config> --out <dir> [--seed N]
    jamshield sweep <spec> --out <dir> [--parallel]
    jamshield compare-setups <configA> <configB> --out <dir> [--seed N]

Exit codes: 0 success, 1 usage, 2 config/validation, 3 solver failure.
Logging verbosity comes from ``JAMSHIELD_LOG`` (quiet, info, trace).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .ao import PIPELINES, run_pipeline
from .scenario import (ConfigError, Scenario, ValidationError, _read_pairs, _read_text,
                       line_deviation, line_trajectory, load_scenario, load_settings)

__all__ = ["main", "SweepSpec", "load_sweep_spec", "scenario_with_k", "EXIT_OK",
           "EXIT_USAGE", "EXIT_CONFIG", "EXIT_SOLVER"]

log = logging.getLogger("jamshield")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "trace": logging.DEBUG}
SWEEP_PARAMETERS = ("p_m", "k_elements")
SWEEP_KEYS = ("parameter", "values", "scenarios", "pipelines", "seed")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x) -> str:
    """Fixed float formatting so identical runs give identical bytes."""
    x = float(x)
    if not np.isfinite(x):
        return "nan"
    out = f"{x:.10g}"
    return "0" if out == "-0" else out


# ---------------------------------------------------------------- sweep spec

@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    scenarios: tuple  # resolved paths
    pipelines: tuple
    seed: int = 0


def load_sweep_spec(path) -> SweepSpec:
    """Flat ``key = value`` file; scenario paths are relative to the spec file."""
    path = Path(path)
    pairs = _read_pairs(_read_text(path), str(path))
    unknown = set(pairs) - set(SWEEP_KEYS)
    if unknown:
        raise ConfigError(f"unknown sweep keys: {', '.join(sorted(unknown))}")
    for key in ("parameter", "values", "scenarios"):
        if key not in pairs:
            raise ConfigError(f"missing required sweep key {key!r}")
    param = pairs["parameter"]
    if param not in SWEEP_PARAMETERS:
        raise ConfigError(f"parameter must be one of {SWEEP_PARAMETERS}, got {param!r}")
    kind = int if param == "k_elements" else float
    try:
        values = tuple(kind(v) for v in pairs["values"].split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse sweep values {pairs['values']!r}") from exc
    if not values:
        raise ValidationError("sweep value list is empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValidationError("sweep values must be strictly increasing")
    if param == "k_elements" and min(values) < 0:
        raise ValidationError("k_elements values must be nonnegative")
    if param == "p_m" and min(values) < 0:
        raise ValidationError("p_m values must be nonnegative")
    scen = tuple(str((path.parent / p.strip()).resolve())
                 for p in pairs["scenarios"].split(",") if p.strip())
    pipes = tuple(p.strip() for p in pairs.get("pipelines", ",".join(PIPELINES)).split(",")
                  if p.strip())
    bad = [p for p in pipes if p not in PIPELINES]
    if bad:
        raise ConfigError(f"unknown pipelines: {', '.join(bad)}")
    try:
        seed = int(pairs.get("seed", "0"))
    except ValueError as exc:
        raise ConfigError(f"seed must be an integer, got {pairs['seed']!r}") from exc
    return SweepSpec(param, values, scen, pipes, seed)


def scenario_with_k(s: Scenario, k: int) -> Scenario:
    """Same scenario with a K-element IRS laid out as close to square as possible."""
    if k == 0:
        return s.with_irs(None)
    if s.irs is None:
        raise ValidationError("cannot set k_elements on a scenario without an IRS position")
    kz = max(d for d in range(1, int(np.sqrt(k)) + 1) if k % d == 0)
    return s.with_irs(replace(s.irs, kx=k // kz, kz=kz))


def _apply(s: Scenario, param: str, value) -> Scenario:
    if param == "p_m":
        return s.with_jamming(value)
    return scenario_with_k(s, int(value))


def _run_cell(cell):
    """One sweep cell; never raises so a failure only flags its own row."""
    scen_path, label, param, value, pipeline, seed = cell
    t0 = time.perf_counter()
    try:
        s = _apply(load_scenario(scen_path), param, value)
        st = load_settings(scen_path)
        state, report = run_pipeline(pipeline, s, eps2=st.eps2, max_outer=st.max_outer,
                                     eps1=st.eps1, n_samples=st.n_samples, seed=seed)
        row = dict(rate=state.rate, iterations=report.iterations,
                   termination=report.termination, flag="")
    except Exception as exc:  # recorded, sweep continues
        log.warning("cell %s/%s/%s=%s failed: %s", pipeline, label, param, value, exc)
        row = dict(rate=float("nan"), iterations=0, termination="failed",
                   flag=f"{type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " "))
    row.update(pipeline=pipeline, setup=label, value=value,
               wall_time=time.perf_counter() - t0)
    return row


# ---------------------------------------------------------------- output

def _write_lines(path: Path, comments, header, rows) -> None:
    text = "".join(f"# {c}\n" for c in comments)
    text += ",".join(header) + "\n"
    text += "".join(",".join(r) + "\n" for r in rows)
    path.write_text(text)


def _svg_figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "jamshield"
    return plt


def _save_svg(plt, fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_trajectories(s: Scenario, trajs: dict, path: Path, title: str) -> None:
    plt = _svg_figure()
    fig, ax = plt.subplots(figsize=(6, 4))
    line = line_trajectory(s).xy
    ax.plot(line[:, 0], line[:, 1], "k--", lw=1, label="line trajectory")
    for name, xy in trajs.items():
        ax.plot(xy[:, 0], xy[:, 1], ".-", lw=1, label=name)
    ax.plot(s.q_g.x, s.q_g.y, "g^", label="GN")
    ax.plot(s.q_m.x, s.q_m.y, "rx", label="jammer")
    if s.irs is not None:
        ax.plot(s.irs.origin.x, s.irs.origin.y, "bs", label="IRS")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(title)
    ax.legend(fontsize=7)
    _save_svg(plt, fig, path)


def _plot_sweep(rows, param: str, path: Path) -> None:
    plt = _svg_figure()
    fig, ax = plt.subplots(figsize=(6, 4))
    curves = {}
    for r in rows:
        curves.setdefault((r["pipeline"], r["setup"]), []).append((r["value"], r["rate"]))
    for (pipe, setup), pts in curves.items():
        pts = np.array(sorted(pts), dtype=float)
        ax.plot(pts[:, 0], pts[:, 1], "o-", label=f"{pipe} / {setup}")
    ax.set_xlabel("P_M (W)" if param == "p_m" else "K (IRS elements)")
    ax.set_ylabel("average rate (bit/s/Hz)")
    ax.legend(fontsize=7)
    _save_svg(plt, fig, path)


# ---------------------------------------------------------------- commands

def _load(path):
    return load_scenario(path), load_settings(path)


def cmd_optimize(args) -> int:
    s, st = _load(args.config)
    state, report = run_pipeline("proposed", s, eps2=st.eps2, max_outer=st.max_outer,
                                 eps1=st.eps1, n_samples=st.n_samples, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    xy = state.q.xy
    _write_lines(out / "trajectory.csv",
                 ["UAV horizontal position per slot; x, y in metres; altitude h0 = "
                  f"{_fmt(s.h0)} m", "n = 0 is q_start, n = N is q_end"],
                 ["n", "x", "y"],
                 [(str(n), _fmt(x), _fmt(y)) for n, (x, y) in enumerate(xy)])
    theta = np.mod(np.angle(state.v[:, :-1]), 2 * np.pi)
    _write_lines(out / "state.csv",
                 ["per-slot transmit power p in W; IRS phase shifts theta_k in rad [0, 2pi)",
                  "slots n = 1..N"],
                 ["n", "p"] + [f"theta_{k + 1}" for k in range(s.K)],
                 [(str(n + 1), _fmt(state.p[n]), *(_fmt(t) for t in theta[n]))
                  for n in range(s.n_slots)])
    (out / "rate.txt").write_text(
        f"average_rate_bps_per_hz = {_fmt(state.rate)}\n"
        f"outer_iterations = {report.iterations}\n"
        f"termination = {report.termination}\n"
        f"seed = {args.seed}\n")
    _plot_trajectories(s, {"proposed": xy}, out / "trajectory.svg",
                       f"rate {state.rate:.4f} bit/s/Hz")
    print(f"average rate {_fmt(state.rate)} bit/s/Hz after {report.iterations} iterations")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = load_sweep_spec(args.spec)
    for p in spec.scenarios:  # fail fast on unreadable configs
        load_scenario(p)
    labels = [Path(p).stem for p in spec.scenarios]
    cells = [(p, lab, spec.parameter, v, pipe, spec.seed)
             for pipe in spec.pipelines for p, lab in zip(spec.scenarios, labels)
             for v in spec.values]
    if args.parallel:
        with ProcessPoolExecutor() as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(c) for c in cells]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    unit = "W" if spec.parameter == "p_m" else "elements"
    _write_lines(out / "sweep.csv",
                 [f"swept parameter {spec.parameter} ({unit}); rate in bit/s/Hz",
                  f"seed {spec.seed}; flag is empty unless the cell failed"],
                 ["pipeline", "setup", spec.parameter, "rate", "iterations", "termination", "flag"],
                 [(r["pipeline"], r["setup"], _fmt(r["value"]), _fmt(r["rate"]),
                   str(r["iterations"]), r["termination"], r["flag"]) for r in rows])
    _write_lines(out / "timing.csv", ["wall time per cell in seconds (not deterministic)"],
                 ["pipeline", "setup", spec.parameter, "wall_time"],
                 [(r["pipeline"], r["setup"], _fmt(r["value"]), f"{r['wall_time']:.3f}")
                  for r in rows])
    _plot_sweep(rows, spec.parameter, out / "sweep.svg")
    failed = sum(1 for r in rows if r["flag"])
    print(f"{len(rows)} cells written to {out / 'sweep.csv'}" + (f", {failed} failed" if failed else ""))
    return EXIT_OK


def _min_dist(xy, point) -> float:
    return float(np.min(np.hypot(xy[:, 0] - point.x, xy[:, 1] - point.y)))


def cmd_compare(args) -> int:
    loaded = [(Path(c).stem, *_load(c)) for c in (args.config_a, args.config_b)]
    results = []
    for label, s, st in loaded:
        state, report = run_pipeline("proposed", s, eps2=st.eps2, max_outer=st.max_outer,
                                     eps1=st.eps1, n_samples=st.n_samples, seed=args.seed)
        results.append((label, s, state, report))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for label, s, state, report in results:
        dev = float(np.mean(line_deviation(s, state.q.xy)))
        rows.append((label, _fmt(state.rate), str(report.iterations), _fmt(dev),
                     _fmt(_min_dist(state.q.xy, s.q_g)), _fmt(_min_dist(state.q.xy, s.q_m))))
    _write_lines(out / "compare.csv",
                 ["proposed pipeline per setup; rate in bit/s/Hz, distances in metres",
                  "mean_deviation: mean perpendicular distance to the start-end line over n = 0..N"],
                 ["setup", "rate", "iterations", "mean_deviation", "min_dist_gn", "min_dist_jammer"],
                 rows)
    _write_lines(out / "trajectories.csv", ["x, y in metres"], ["setup", "n", "x", "y"],
                 [(label, str(n), _fmt(x), _fmt(y)) for label, _, state, _ in results
                  for n, (x, y) in enumerate(state.q.xy)])
    _plot_trajectories(results[0][1], {label: state.q.xy for label, _, state, _ in results},
                       out / "compare.svg", "proposed trajectories")
    for r in rows:
        print(f"{r[0]}: rate {r[1]} bit/s/Hz, mean deviation {r[3]} m")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jamshield",
                     description="IRS-assisted anti-jamming UAV trajectory, power and phase design")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("optimize", help="run the full alternating optimization on one scenario")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_optimize)
    p = sub.add_parser("sweep", help="sweep P_M or K over scenarios and pipelines")
    p.add_argument("spec")
    p.add_argument("--out", required=True)
    p.add_argument("--parallel", action="store_true", help="run cells in worker processes")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("compare-setups", help="proposed design on two IRS placements")
    p.add_argument("config_a")
    p.add_argument("config_b")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_compare)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("JAMSHIELD_LOG", "quiet").strip().lower() or "quiet"
    if level not in LOG_LEVELS:
        raise UsageError(f"JAMSHIELD_LOG must be one of {', '.join(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        _setup_logging()
        if getattr(args, "seed", 0) < 0:
            raise UsageError("seed must be a nonnegative integer")
        return args.func(args)
    except UsageError as exc:
        print(f"jamshield: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValidationError) as exc:
        print(f"jamshield: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        log.debug("solver failure", exc_info=True)
        print(f"jamshield: solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
