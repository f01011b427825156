"""Command-line front end: ``nm-regress {g1,spectrum,witness,sweep,validate}``.

Every subcommand writes CSV files with a header row, ``%.17g`` numbers and
``\\n`` line endings so that repeated runs are byte-identical.  Failures exit
non-zero and print a one-line JSON record on stderr.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 validation-suite failure.
"""
from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .bath import (MissingFrequencyError, QuadratureError, TableAccuracyError,
                   build_tables)
from .config import ConfigError, RunConfig, load_preset, parse_config
from .observables import (GridResolutionError, PlateauError, g1, sideband_asymmetry,
                          sideband_fraction, spectrum)
from .operators import OperatorError
from .propagation import IntegrationError
from .validation import run_suite
from .witness import witness_trace

__all__ = ["main", "build_parser", "compute", "write_result"]

log = logging.getLogger("nm_regress")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 2, 3, 4
NUMERICAL_ERRORS = (IntegrationError, PlateauError, GridResolutionError,
                    QuadratureError, TableAccuracyError, MissingFrequencyError,
                    OperatorError, FloatingPointError, np.linalg.LinAlgError)
TARGETS = ("g1", "spectrum", "witness")
THREADS_ENV = "NM_REGRESS_THREADS"


class ValidationFailure(RuntimeError):
    pass


# ---------------------------------------------------------------- formatting

def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _meta_rows(meta: dict):
    for key in sorted(meta):
        value = meta[key]
        if isinstance(value, complex):
            yield f"{key}_re", value.real
            yield f"{key}_im", value.imag
        else:
            yield key, value


# ---------------------------------------------------------------- computation

def compute(target: str, cfg: RunConfig) -> dict:
    """Run one simulation and return plain arrays ready for writing."""
    model = cfg.model()
    tables = build_tables(cfg.bath_spec(), model.bohr_frequencies,
                          cfg.table_grid())
    sim = cfg.sim_config()
    mode = cfg.mode
    out = {"target": target}
    if target in ("g1", "spectrum"):
        trace = g1(model, tables, mode, sim)
        meta = dict(trace.metadata)
        meta["g1_infinity"] = trace.g1_infinity
        meta["detuning_ps_inv"] = model.params["detuning"]
        out["g1"] = (trace.tau_grid, trace.values)
        out["g1_meta"] = meta
        if target == "spectrum":
            o = cfg.output
            spec = spectrum(trace, o["omega_max_ps_inv"], o["spectrum_points"])
            window = o["sideband_window_ps_inv"]
            total = float(np.trapezoid(spec.values, spec.domega_grid))
            out["spectrum"] = (spec.domega_grid, spec.values)
            out["summary"] = {
                "mode": mode.value,
                "sideband_window_ps_inv": window,
                "sideband_fraction": sideband_fraction(spec, window),
                "sideband_asymmetry": sideband_asymmetry(spec, window),
                "integrated_power": total,
                "sum_rule_target": math.pi * (trace.values[0]
                                              - trace.g1_infinity).real,
                "min_value": spec.metadata["min_value"],
                "max_value": spec.metadata["max_value"],
            }
    elif target == "witness":
        wt = witness_trace(model, tables, mode, cfg.solver["witness_t_end_ps"],
                           sim, cfg.solver["witness_threshold_ps_inv"])
        out["witness"] = (wt.t_grid, wt.distance, wt.derivative)
        out["intervals"] = wt.positive_intervals
    else:
        raise ValueError(f"unknown target {target!r}")
    return out


def _summary_line(result: dict) -> dict:
    """A few scalars per sweep point for the index file."""
    if "summary" in result:
        s = result["summary"]
        return {"sideband_fraction": s["sideband_fraction"],
                "sideband_asymmetry": s["sideband_asymmetry"]}
    if "g1_meta" in result:
        g = result["g1_meta"]["g1_infinity"]
        return {"g1_infinity_re": g.real, "g1_infinity_im": g.imag}
    return {"positive_intervals": len(result["intervals"])}


def write_result(result: dict, cfg: RunConfig, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    target = result["target"]
    with open(out_dir / "config_used.ini", "w", newline="\n") as fh:
        fh.write(cfg.to_text())
    written.append(out_dir / "config_used.ini")
    if target == "g1":
        taus, vals = result["g1"]
        path = out_dir / "g1.csv"
        write_csv(path, ("tau_ps", "re_g1", "im_g1"),
                  zip(taus, vals.real, vals.imag))
        written.append(path)
        path = out_dir / "g1_meta.csv"
        write_csv(path, ("key", "value"), _meta_rows(result["g1_meta"]))
        written.append(path)
    elif target == "spectrum":
        dw, vals = result["spectrum"]
        path = out_dir / "spectrum.csv"
        write_csv(path, ("domega_ps_inv", "s_value"), zip(dw, vals))
        written.append(path)
        path = out_dir / "spectrum_summary.csv"
        write_csv(path, ("key", "value"), _meta_rows(result["summary"]))
        written.append(path)
    else:
        t, d, dd = result["witness"]
        path = out_dir / "witness.csv"
        write_csv(path, ("t_ps", "trace_distance", "derivative_ps_inv"),
                  zip(t, d, dd))
        written.append(path)
        path = out_dir / "witness_intervals.csv"
        write_csv(path, ("t_start_ps", "t_end_ps"), result["intervals"])
        written.append(path)
    return written


# ---------------------------------------------------------------- config

def _parse_assignment(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise ConfigError(f"expected section.key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def load_config(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigError("give either --preset or --config, not both")
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        cfg = parse_config(text)
    elif args.preset:
        cfg = load_preset(args.preset)
    else:
        raise ConfigError("one of --preset or --config is required")
    overrides = dict(_parse_assignment(s) for s in args.set or [])
    if args.mode:
        overrides["solver.mode"] = args.mode
    return cfg.with_overrides(overrides) if overrides else cfg


def sweep_points(specs: list[str]) -> tuple[list[str], list[tuple[str, ...]]]:
    """Cartesian product of ``section.key=v1,v2,...`` lists, in given order."""
    if not specs:
        raise ConfigError("sweep needs at least one --param section.key=v1,v2")
    names, values = [], []
    for spec in specs:
        key, raw = _parse_assignment(spec)
        if key in names:
            raise ConfigError(f"parameter {key} swept twice")
        vals = [v.strip() for v in raw.split(",") if v.strip()]
        if not vals:
            raise ConfigError(f"no values given for {key}")
        names.append(key)
        values.append(vals)
    return names, list(itertools.product(*values))


def worker_count(n_jobs: int, requested: int | None = None) -> int:
    cap = os.environ.get(THREADS_ENV)
    limit = requested or os.cpu_count() or 1
    if cap:
        try:
            limit = min(limit, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, min(limit, n_jobs))


# ---------------------------------------------------------------- subcommands

def _run_single(args) -> int:
    cfg = load_config(args)
    out = Path(args.out or cfg.output["directory"])
    result = compute(args.command, cfg)
    for path in write_result(result, cfg, out):
        log.info("wrote %s", path)
    if args.command == "spectrum":
        s = result["summary"]
        print(f"sideband_fraction={_fmt(s['sideband_fraction'])} "
              f"sideband_asymmetry={_fmt(s['sideband_asymmetry'])}")
    elif args.command == "witness":
        print(f"positive_intervals={len(result['intervals'])}")
    return EXIT_OK


def _run_sweep(args) -> int:
    base = load_config(args)
    names, points = sweep_points(args.param)
    configs = [base.with_overrides(dict(zip(names, p))) for p in points]
    out = Path(args.out or base.output["directory"])
    workers = worker_count(len(configs), args.workers)
    log.info("sweep: %d points on %d workers", len(configs), workers)
    if workers == 1:
        results = [compute(args.target, c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(compute, [args.target] * len(configs),
                                    configs))
    # single collector: all files are written here, in point order
    index_rows, extra = [], None
    for k, (cfg, point, result) in enumerate(zip(configs, points, results)):
        sub = f"point_{k:03d}"
        write_result(result, cfg, out / sub)
        summary = _summary_line(result)
        extra = extra or list(summary)
        index_rows.append([k, sub, *point, *(summary[e] for e in extra)])
    write_csv(out / "sweep_index.csv", ["point", "directory", *names, *extra],
              index_rows)
    print(f"sweep_points={len(configs)}")
    return EXIT_OK


def _run_validate(args) -> int:
    sim = load_config(args).sim_config() if (args.preset or args.config) else None
    checks = run_suite(sim)
    for c in checks:
        print(c.line())
    failed = [c.name for c in checks if not c.passed]
    if failed:
        raise ValidationFailure("failed checks: " + ", ".join(failed))
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def _add_common(p: argparse.ArgumentParser, config_required: bool = True):
    src = p.add_argument_group("configuration")
    src.add_argument("--preset", help="named preset, e.g. paper-fig1")
    src.add_argument("--config", help="path to an INI configuration file")
    src.add_argument("--mode", choices=("markovian", "naive", "full"),
                     help="override solver.mode")
    src.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                     help="override one configuration key (repeatable)")
    p.add_argument("--out", help="output directory (default output.directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nm-regress",
        description="Two-time correlations, emission spectra and backflow "
                    "witness for a phonon-coupled two-level emitter.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [("g1", "steady-state first-order correlation"),
                       ("spectrum", "incoherent emission spectrum and sideband metrics"),
                       ("witness", "trace-distance backflow witness")]:
        _add_common(sub.add_parser(name, help=text))
    sw = sub.add_parser("sweep", help="run a target over a parameter grid")
    _add_common(sw)
    sw.add_argument("--target", choices=TARGETS, default="spectrum")
    sw.add_argument("--param", action="append", metavar="SECTION.KEY=V1,V2,...",
                    help="values to sweep (repeatable; cartesian product)")
    sw.add_argument("--workers", type=int, help=f"worker processes (capped by {THREADS_ENV})")
    val = sub.add_parser("validate", help="run the built-in oracle suite")
    _add_common(val)
    return parser


def _error(kind: str, exc: BaseException, code: int) -> int:
    record = {"error": kind, "type": type(exc).__name__,
              "message": str(exc), "exit_code": code}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "sweep":
            return _run_sweep(args)
        if args.command == "validate":
            return _run_validate(args)
        return _run_single(args)
    except ConfigError as exc:
        return _error("config", exc, EXIT_CONFIG)
    except ValidationFailure as exc:
        return _error("validation", exc, EXIT_VALIDATION)
    except NUMERICAL_ERRORS as exc:
        return _error("numerical", exc, EXIT_NUMERICAL)
    except ValueError as exc:
        # BathSpec and SimConfig reject bad values with plain ValueError
        return _error("config", exc, EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
