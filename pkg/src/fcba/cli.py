"""Command-line entry point.

Configuration comes from an optional JSON file; command-line flags override it.
Every file written embeds the resolved configuration and the package version.
Output goes to ``--out``, else ``$FCBA_OUTPUT_DIR``, else ``./fcba-out``.

Exit codes: 0 success, 1 usage error, 2 an identity failed, 3 only
inconclusive identities besides passes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, estimators, export, theory
from .engine import run
from .model import (Configuration, InitialConfig, ParameterError, Side, sample_initial_config,
                    spacing_from_spec, validate_params)
from .rng import KeyedStream

OUTPUT_ENV = "FCBA_OUTPUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3

CONFIG_KEYS = {
    "a", "b", "alpha", "beta", "p", "p_grid", "n", "n_schedule", "trials", "seed", "spacing", "side",
    "tol", "K", "central_fraction", "shield_depth", "i_max", "workers", "t_max", "rule", "epsilon",
    "positions", "species",
}

DEFAULTS = {
    "a": 0.0, "b": 0.0, "alpha": 0.0, "beta": 0.0, "seed": 0, "spacing": "exponential", "tol": 1e-12,
    "central_fraction": estimators.DEFAULT_CENTRAL_FRACTION, "epsilon": estimators.EPSILON_SURVIVAL,
    "rule": "scaling", "i_max": 4, "workers": None, "K": None, "shield_depth": None, "t_max": None,
}

COMMAND_DEFAULTS = {
    "pc": {},
    "solve-q": {"p_grid": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]},
    "simulate": {"n": 200, "p": 0.15},
    "estimate-q": {"n": 10_000, "p": 0.3, "trials": 1000},
    "verify": {"n": 10_000, "p": 0.2, "trials": 2000},
    "phase-sweep": {"p_grid": [0.21, 0.23, 0.25, 0.27, 0.29], "n_schedule": [10_000, 20_000, 40_000], "trials": 200},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()] if text.strip() else []


def _ints(text: str) -> list[int]:
    return [int(float(x)) for x in text.split(",") if x.strip()] if text.strip() else []


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with run configuration")
    common.add_argument("--a", type=float)
    common.add_argument("--b", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--p", type=float)
    common.add_argument("--p-grid", type=_floats, dest="p_grid", help="comma-separated densities")
    common.add_argument("--n", type=int, help="particles per window")
    common.add_argument("--n-schedule", type=_ints, dest="n_schedule", help="comma-separated window sizes")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--spacing", help="exponential, exponential:MEAN or uniform:LO,HI")
    common.add_argument("--side", choices=["right", "two-sided"])
    common.add_argument("--tol", type=float)
    common.add_argument("--K", type=int, dest="K", help="truncation index of the beta-weighted sums")
    common.add_argument("--central-fraction", type=float, dest="central_fraction")
    common.add_argument("--shield-depth", type=float, dest="shield_depth")
    common.add_argument("--i-max", type=int, dest="i_max")
    common.add_argument("--workers", type=int, help="worker processes (default: available CPUs)")
    common.add_argument("--t-max", type=float, dest="t_max")
    common.add_argument("--rule", choices=["scaling", "threshold"])
    common.add_argument("--epsilon", type=float)
    common.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./fcba-out)")
    common.add_argument("--json", action="store_true", help="print JSON to stdout")

    ap = _Parser(prog="fcba", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"fcba {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("pc", parents=[common], help="closed-form critical density")
    sub.add_parser("solve-q", parents=[common], help="q(p) over a grid of densities")
    sub.add_parser("simulate", parents=[common], help="one run: event CSV and space-time SVG")
    sub.add_parser("estimate-q", parents=[common], help="Monte Carlo estimate of q(p)")
    sub.add_parser("verify", parents=[common], help="identity suite against the closed forms")
    sub.add_parser("phase-sweep", parents=[common], help="empirical critical-density bracket")
    return ap


def load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return data


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    cfg.update(COMMAND_DEFAULTS[command])
    cfg.update(load_config(args.config))
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    # a single density given on the command line replaces the default grid
    if command in ("solve-q", "phase-sweep") and args.p is not None and args.p_grid is None:
        cfg["p_grid"] = [args.p]
    validate_params(cfg["a"], cfg["b"], cfg["alpha"], cfg["beta"])
    return {k: cfg[k] for k in sorted(cfg)}


def output_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "fcba-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _meta(command: str, cfg: dict) -> dict:
    return {"command": command, "config": cfg, "version": __version__}


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not serializable: {type(o)}")


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _params(cfg):
    return validate_params(cfg["a"], cfg["b"], cfg["alpha"], cfg["beta"])


def _require(cfg: dict, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError(f"missing required setting(s): {', '.join(missing)}")


def cmd_pc(cfg: dict, args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        pc = theory.pc_closed_form(_params(cfg))
    if args.json:
        sys.stdout.write(_dump({**_meta("pc", cfg), "p_c": pc, "warnings": [str(w.message) for w in caught]}))
    else:
        print(f"{pc:.12g}")
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    return EXIT_OK


def cmd_solve_q(cfg: dict, args) -> int:
    grid = cfg.get("p_grid") or []
    if not grid:
        raise UsageError("empty p grid")
    prm = _params(cfg)
    rows = []
    for p in grid:
        sol = theory.solve_q(prm, float(p), cfg["tol"])
        rows.append({"p": sol.p, "q": sol.q, "branch": sol.branch.value, "residual": sol.residual})
    text = export.table_csv(rows, ["p", "q", "branch", "residual"], _meta("solve-q", cfg))
    _write(output_dir(args) / "solve_q.csv", text)
    sys.stdout.write(_dump({**_meta("solve-q", cfg), "rows": rows}) if args.json else text)
    return EXIT_OK


def _explicit_config(cfg: dict) -> Configuration:
    pos, species = cfg["positions"], cfg["species"]
    if len(pos) != len(species):
        raise UsageError("positions and species differ in length")
    return Configuration.from_species(np.asarray(pos, dtype=float), species)


def cmd_simulate(cfg: dict, args) -> int:
    prm = _params(cfg)
    if cfg.get("positions") is not None or cfg.get("species") is not None:
        _require(cfg, "positions", "species")
        conf = _explicit_config(cfg)
        for key in ("n", "p"):
            cfg.pop(key, None)
        side = Side(cfg["side"]) if cfg.get("side") else None
        trace = run(conf, prm, KeyedStream(cfg["seed"]), side=side)
    else:
        _require(cfg, "n", "p")
        cfg["side"] = cfg.get("side") or Side.TWO_SIDED.value
        init = InitialConfig(int(cfg["n"]), float(cfg["p"]), Side(cfg["side"]), spacing_from_spec(cfg["spacing"]),
                             int(cfg["seed"]))
        trace = run(sample_initial_config(init), prm)
    out = output_dir(args)
    meta = _meta("simulate", cfg)
    export.write_events_csv(trace, out / "events.csv", meta)
    export.write_svg(trace, out / "spacetime.svg", cfg.get("t_max"), meta)
    summary = {**meta, "events": len(trace.events), "survivors": int(trace.alive_mask.sum()),
               "end_time": trace.end_time, "files": ["events.csv", "spacetime.svg"]}
    _write(out / "simulate.json", _dump(summary))
    if args.json:
        sys.stdout.write(_dump(summary))
    else:
        print(f"{len(trace.events)} events, {summary['survivors']} survivors -> {out}")
    return EXIT_OK


def cmd_estimate_q(cfg: dict, args) -> int:
    _require(cfg, "n", "p", "trials")
    prm = _params(cfg)
    est = estimators.estimate_q(prm, float(cfg["p"]), int(cfg["n"]), int(cfg["trials"]), int(cfg["seed"]),
                                spacing=spacing_from_spec(cfg["spacing"]), shield_depth=cfg["shield_depth"],
                                workers=cfg["workers"])
    sol = theory.solve_q(prm, float(cfg["p"]))
    record = {**_meta("estimate-q", cfg), "estimate": est.to_dict(), "solver_q": sol.q,
              "solver_branch": sol.branch.value}
    _write(output_dir(args) / "estimate_q.json", _dump(record))
    if args.json:
        sys.stdout.write(_dump(record))
    else:
        print(f"q_hat={est.point:.6f} CI=[{est.ci_low:.6f}, {est.ci_high:.6f}] "
              f"band=[{est.uncertain_low:.6f}, {est.uncertain_high:.6f}] certified={est.certified_fraction:.4f} "
              f"solver={sol.q:.6f}")
        if est.inconclusive:
            print(est.diagnostics, file=sys.stderr)
    return EXIT_OK


def cmd_verify(cfg: dict, args) -> int:
    _require(cfg, "n", "p", "trials")
    prm = _params(cfg)
    reports = estimators.identity_suite(prm, float(cfg["p"]), int(cfg["n"]), int(cfg["trials"]), int(cfg["seed"]),
                                        K=cfg["K"], i_max=int(cfg["i_max"]), workers=cfg["workers"])
    failed = [r.name for r in reports if r.verdict is estimators.Verdict.FAIL]
    inconclusive = [r.name for r in reports if r.verdict is estimators.Verdict.INCONCLUSIVE]
    record = {**_meta("verify", cfg), "reports": [r.to_dict() for r in reports],
              "failed": failed, "inconclusive": inconclusive}
    _write(output_dir(args) / "verify.json", _dump(record))
    if args.json:
        sys.stdout.write(_dump(record))
    else:
        for r in reports:
            print(f"{r.name:20s} {r.verdict.value:12s} mc={r.mc_value.point:.6g} closed={r.closed_value:.6g} "
                  f"z={r.z_score:+.2f}")
        if failed:
            print("failed: " + ", ".join(failed), file=sys.stderr)
        if inconclusive:
            print("inconclusive: " + ", ".join(inconclusive), file=sys.stderr)
    if failed:
        return EXIT_FAIL
    if inconclusive:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_phase_sweep(cfg: dict, args) -> int:
    grid = cfg.get("p_grid") or []
    sched = cfg.get("n_schedule") or []
    if not grid:
        raise UsageError("empty p grid")
    if not sched:
        raise UsageError("empty n schedule")
    _require(cfg, "trials")
    prm = _params(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        br = estimators.empirical_pc(prm, grid, sched, int(cfg["trials"]), int(cfg["seed"]),
                                     central_fraction=cfg["central_fraction"], epsilon=cfg["epsilon"],
                                     rule=cfg["rule"], spacing=spacing_from_spec(cfg["spacing"]),
                                     workers=cfg["workers"])
    meta = _meta("phase-sweep", cfg)
    rows = []
    for p, row in zip(grid, br.points):
        slope = br.slopes.get(p, (math.nan, math.nan))
        for pt in row:
            rows.append({"p": float(p), "n": pt.n, "survival": pt.mean, "ci_low": pt.ci_low, "ci_high": pt.ci_high,
                         "trials": pt.trials, "slope": slope[0], "slope_se": slope[1], "phase": br.classes[p]})
    out = output_dir(args)
    _write(out / "phase_sweep.csv", export.table_csv(
        rows, ["p", "n", "survival", "ci_low", "ci_high", "trials", "slope", "slope_se", "phase"], meta))
    try:
        pc_formula = theory.pc_closed_form(prm)
    except theory.TheoryError:
        pc_formula = None
    record = {**meta, "bracket": br.to_dict(), "pc_formula": pc_formula}
    _write(out / "phase_sweep.json", _dump(record))
    if args.json:
        sys.stdout.write(_dump(record))
    else:
        print(f"p_c in [{br.p_lower}, {br.p_upper}] ({br.rule} rule)")
        for note in br.warnings:
            print(f"warning: {note}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "pc": cmd_pc,
    "solve-q": cmd_solve_q,
    "simulate": cmd_simulate,
    "estimate-q": cmd_estimate_q,
    "verify": cmd_verify,
    "phase-sweep": cmd_phase_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, ParameterError, ValueError) as exc:
        print(f"fcba {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
