"""Command-line entry point.

    mecavity simulate --config run.json --out results/
    mecavity estimate --trace results/demod.csv \
        --calibration results/calibration_before.json results/calibration_after.json
    mecavity plan --medium vacuum --B 15 --E 2e7 --sensitivity 1.9e-21
    mecavity tables --medium N2

Flags override values from --config.  Output goes to --out, else to
$MECAVITY_OUT, else ./mecavity_out.

Exit codes: 0 success, 1 invalid input, 2 I/O failure, 3 calibrations do not
bracket the run.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, effects, estimator, planner
from .config import ConfigError, ExperimentConfig
from .signal import demodulate_run, lockin_demodulate, synthesize_run
from .traceio import TraceFormatError, read_trace_csv, write_trace_csv

OUT_ENV = "MECAVITY_OUT"

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_BRACKET = 0, 1, 2, 3


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "mecavity_out")


def _load_config(path, overrides=None) -> ExperimentConfig:
    doc = {}
    if path is not None:
        text = Path(path).read_text()  # OSError -> exit 2
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("<document>", "top level must be an object")
    for key, value in (overrides or {}).items():
        if value is not None:
            doc[key] = value
    return ExperimentConfig(doc)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --- simulate ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        config = _load_config(args.config, {"seed": args.seed, "medium": args.medium})
    except ConfigError as exc:
        _err(f"invalid config: {exc}")
        return EXIT_INVALID
    except OSError as exc:
        _err(f"cannot read config: {exc}")
        return EXIT_IO

    raw = synthesize_run(config)
    demod = demodulate_run(raw, config)
    demod.meta["settle"] = config.settle
    before, after = estimator.bracketing_calibrations(config)

    out = _out_dir(args)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_trace_csv(raw, out / "raw.csv")
        write_trace_csv(demod, out / "demod.csv")
        _write_json(out / "calibration_before.json", before.to_dict())
        _write_json(out / "calibration_after.json", after.to_dict())
        manifest = {
            "version": __version__,
            "digest": config.digest(),
            "seed": config.seed,
            "config": config.to_dict(),
            "files": ["raw.csv", "demod.csv", "calibration_before.json",
                      "calibration_after.json"],
            "samples": len(raw),
            "rate_hz": config.rate,
            "f_mod_hz": config.f_mod,
            "gate_period_s": config.assembly.gate_period,
            "warnings": config.warnings,
        }
        _write_json(out / "manifest.json", manifest)
    except OSError as exc:
        _err(f"cannot write output: {exc}")
        return EXIT_IO
    print(f"wrote {len(raw)} samples to {out} (digest {config.digest()[:12]}, seed {config.seed})")
    return EXIT_OK


# --- estimate ----------------------------------------------------------------

def _read_calibration(path) -> estimator.CalibrationRun:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or set(doc) != {"dnu_cal", "level", "timestamp"}:
        raise ValueError(f"{path}: calibration needs exactly dnu_cal, level, timestamp")
    return estimator.CalibrationRun(float(doc["dnu_cal"]), float(doc["level"]),
                                    float(doc["timestamp"]))


def _append_ledger(path, trace_path, est: estimator.MeasurementEstimate) -> None:
    path = Path(path)
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(["trace", "value", "sigma", "unit", "n_periods", "factor_before",
                        "factor_after", "factor_interpolated"])
        cal = est.calibration or {}
        w.writerow([str(trace_path), f"{est.value:.9e}", f"{est.sigma:.9e}", est.unit,
                    est.n_periods, f"{cal['before']['factor']:.9e}",
                    f"{cal['after']['factor']:.9e}", f"{cal['interpolated']:.9e}"])


def cmd_estimate(args) -> int:
    try:
        config = _load_config(args.config) if args.config else None
    except ConfigError as exc:
        _err(f"invalid config: {exc}")
        return EXIT_INVALID
    except OSError as exc:
        _err(f"cannot read config: {exc}")
        return EXIT_IO

    try:
        trace = read_trace_csv(args.trace)
        cals = [_read_calibration(p) for p in args.calibration]
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    except (TraceFormatError, ValueError, KeyError) as exc:
        _err(f"schema mismatch: {exc}")
        return EXIT_INVALID
    if len(cals) < 2:
        _err("need calibrations before and after the run")
        return EXIT_BRACKET
    before, after = cals[0], cals[-1]

    meta = trace.meta
    if trace.unit != "volts":
        _err(f"schema mismatch: trace unit {trace.unit}, expected volts")
        return EXIT_INVALID
    try:
        if meta.get("stage") == "raw":
            tau = config.lockin.tau if config else meta.get("tau", 1.0)
            phase = config.lockin.phase if config else 0.0
            trace = lockin_demodulate(trace, meta["f_mod"], tau, phase)
        elif meta.get("stage") != "demod":
            raise ValueError("trace is neither raw nor demodulated")
        settle = config.settle if config else meta.get("settle", 5 * trace.meta["tau"])
        T_AM = config.assembly.gate_period if config else meta["gate_period"]
        pairs = estimator.segment_periods(trace, T_AM, settle)
    except (KeyError, ValueError) as exc:
        _err(f"schema mismatch: {exc}")
        return EXIT_INVALID

    t_start, t_end = trace.t0, trace.t0 + trace.duration
    if not (before.timestamp <= t_start and after.timestamp >= t_end):
        _err(f"calibrations at {before.timestamp} s and {after.timestamp} s do not "
             f"bracket the run [{t_start}, {t_end}] s")
        return EXIT_BRACKET
    try:
        factor = estimator.calibration_factor(before, after, 0.5 * (t_start + t_end))
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INVALID

    volts = estimator.on_off_estimate(pairs)
    volts.meta.update(component="in-phase", phase=trace.meta.get("phase", 0.0))
    cal = {"before": {**before.to_dict(), "factor": before.factor},
           "after": {**after.to_dict(), "factor": after.factor},
           "interpolated": factor}
    est = estimator.to_frequency(volts, factor, cal)

    sig = "n/a" if math.isnan(est.sigma) else f"{est.sigma * 1e3:.3f}"
    print(f"delta_nu = {est.value * 1e3:.3f} +/- {sig} mHz rms (N={est.n_periods})")
    out = Path(args.out) if args.out else None
    try:
        if out is not None:
            out.parent.mkdir(parents=True, exist_ok=True)
            _write_json(out, est.to_dict())
        if args.ledger:
            _append_ledger(args.ledger, args.trace, est)
    except OSError as exc:
        _err(f"cannot write output: {exc}")
        return EXIT_IO
    return EXIT_OK


# --- plan --------------------------------------------------------------------

def _parse_sweep(items):
    """['B=0.5:2:4', 'E=1e5:1e6:3'] -> {'B': array, 'E': array}."""
    out = {}
    for item in items or []:
        key, _, spec = item.partition("=")
        parts = spec.split(":")
        if key not in ("B", "E") or len(parts) != 3:
            raise ValueError(f"bad sweep {item!r}; expected B=start:stop:count or E=...")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ValueError(f"bad sweep count in {item!r}")
        out[key] = np.linspace(lo, hi, n)
    return out


def _human_time(seconds: float) -> str:
    if seconds < 3600:
        return f"{seconds:.3g} s"
    if seconds < 86400 * 3:
        return f"{seconds / 3600:.2g} h"
    return f"{seconds / 86400:.3g} d"


def _build_plan(args) -> planner.ExperimentPlan:
    if args.plan:
        doc = json.loads(Path(args.plan).read_text())
        plan = planner.ExperimentPlan.from_dict(doc)
    else:
        config = _load_config(args.config, {"medium": args.medium})
        plan = planner.ExperimentPlan.from_config(config, sensitivity=1e-16)
    changes = {}
    if args.medium:
        changes["medium"] = args.medium
    for attr, value in (("b_eff", args.B), ("e_rms", args.E), ("laser_frequency", args.nu),
                        ("perimeter", args.perimeter), ("sensitivity", args.sensitivity),
                        ("target_snr", args.snr), ("effect", args.effect)):
        if value is not None:
            changes[attr] = value
    perimeter = changes.get("perimeter", plan.perimeter)
    if args.l_fields is not None:
        changes["l_fields"] = args.l_fields
    if args.fill is not None:
        changes["l_fields"] = args.fill * perimeter
    doc = {**plan.__dict__, **changes}
    return planner.ExperimentPlan(**doc)


def cmd_plan(args) -> int:
    try:
        plan = _build_plan(args)
        effects.lookup_coefficient(plan.medium)
        dn = planner.plan_delta_n(plan)
        dnu = planner.expected_signal(plan)
        sweep = _parse_sweep(args.sweep)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    except (ValueError, TypeError, LookupError) as exc:
        _err(f"invalid plan: {exc}")
        return EXIT_INVALID

    print(f"medium {plan.medium}  B_eff = {plan.b_eff:.4g} T  E = {plan.e_rms:.4g} V/m rms  "
          f"fill = {plan.fill:.3g}  nu = {plan.laser_frequency:.5g} Hz")
    print(f"dn = {dn:.4e}")
    print(f"delta_nu = {_format_freq(dnu)} rms   delta_nu/nu = {dnu / plan.laser_frequency:.4e}")
    if dn != 0:
        print(f"sensitivity {plan.sensitivity:.3g} /sqrt(Hz) = "
              f"{planner.dn_unit_sensitivity(plan):.3g} dn/sqrt(Hz)")
        snrs = sorted({1.0, 3.0, 5.0, plan.target_snr})
        print("SNR    time")
        for snr in snrs:
            t = planner.time_to_snr(planner.ExperimentPlan(**{**plan.__dict__, "target_snr": snr}))
            print(f"{snr:<6g} {t:.4e} s  (~ {_human_time(t)})")
    else:
        print("expected signal is zero: no SNR can be reached")

    if args.csv:
        B_values = sweep.get("B", [plan.b_eff])
        E_values = sweep.get("E", [plan.e_rms])
        rows = planner.sweep(plan, B_values, E_values)
        try:
            planner.write_sweep_csv(rows, args.csv)
        except OSError as exc:
            _err(f"cannot write {args.csv}: {exc}")
            return EXIT_IO
    return EXIT_OK


def _format_freq(hz: float) -> str:
    a = abs(hz)
    if a == 0:
        return "0 Hz"
    if a >= 1:
        return f"{hz:.3g} Hz"
    if a >= 1e-3:
        return f"{hz * 1e3:.3g} mHz"
    if a >= 1e-6:
        return f"{hz * 1e6:.3g} uHz"
    return f"{hz:.3e} Hz"


# --- tables ------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return "-"
    return np.format_float_scientific(v, unique=True, min_digits=1)


def cmd_tables(args) -> int:
    try:
        table = effects.load_table(args.coefficients) if args.coefficients else effects.BUILTIN_TABLE
        records = ([effects.lookup_coefficient(args.medium, table)] if args.medium
                   else list(table.values()))
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    except (LookupError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INVALID
    if args.json:
        print(json.dumps([r.to_dict() for r in records], indent=2))
        return EXIT_OK
    print("# eta normalized to B = 1 T, E = 1 V/m; units T^-1 V^-1 m")
    print(f"{'medium':<8} {'eta_MELB':>10} {'eta_MEDA':>10} {'P_ref [Pa]':>11} "
          f"{'T_ref [K]':>10} {'lambda [m]':>11}")
    for r in records:
        print(f"{r.medium:<8} {_fmt(r.eta_melb):>10} {_fmt(r.eta_meda):>10} "
              f"{_fmt(r.ref_pressure):>11} {_fmt(r.ref_temperature):>10} "
              f"{_fmt(r.ref_wavelength):>11}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mecavity", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="synthesize raw and demodulated traces")
    s.add_argument("--config", help="experiment JSON document")
    s.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./mecavity_out)")
    s.add_argument("--seed", type=int)
    s.add_argument("--medium")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="on/off estimate from a trace and two calibrations")
    e.add_argument("--trace", required=True)
    e.add_argument("--calibration", nargs="+", required=True, metavar="JSON",
                   help="calibration runs before and after the trace")
    e.add_argument("--config")
    e.add_argument("--out", help="estimate JSON path")
    e.add_argument("--ledger", help="CSV results ledger to append to")
    e.set_defaults(func=cmd_estimate)

    pl = sub.add_parser("plan", help="expected signal and time to SNR")
    pl.add_argument("--plan", help="plan JSON document")
    pl.add_argument("--config")
    pl.add_argument("--medium")
    pl.add_argument("--B", type=float, help="effective magnetic field, T")
    pl.add_argument("--E", type=float, help="electric field, V/m rms")
    pl.add_argument("--fill", type=float, help="field-filled fraction of the perimeter")
    pl.add_argument("--l-fields", type=float, dest="l_fields", help="field length, m")
    pl.add_argument("--perimeter", type=float)
    pl.add_argument("--nu", type=float, help="laser frequency, Hz")
    pl.add_argument("--sensitivity", type=float, help="relative, per sqrt(Hz)")
    pl.add_argument("--snr", type=float, help="target SNR")
    pl.add_argument("--effect", choices=("meda", "melb"))
    pl.add_argument("--sweep", nargs="+", metavar="X=start:stop:count")
    pl.add_argument("--csv", help="write the sweep table here")
    pl.set_defaults(func=cmd_plan)

    t = sub.add_parser("tables", help="print the coefficient table")
    t.add_argument("--medium")
    t.add_argument("--json", action="store_true")
    t.add_argument("--coefficients", help="JSON coefficient overrides")
    t.set_defaults(func=cmd_tables)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
