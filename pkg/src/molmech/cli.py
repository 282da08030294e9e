"""Batch command line: spectrum, fluorescence, memory, estimate, sweep.

Every command reads a strict TOML file (`molmech.config`), runs one
measurement campaign and writes CSV tables plus a JSON metadata record into
the output directory.  No plotting: the CSV column contract is the interface
for external plotters.

Output contract
---------------
* CSV: header row, fixed column order, decimal notation with 9 significant
  digits, ``\\n``-terminated lines.  Identical across repeat runs and worker
  counts.
* JSON metadata: resolved gamma-unit parameters, package version, wall time,
  convergence diagnostics.
* Abscissas appear in gamma units next to a laboratory-unit twin column
  (MHz or microseconds) derived from ``[units]``.

Exit codes: 0 success, 1 usage or configuration error, 2 physics or
convergence failure.  Diagnostics go to standard error.

The worker count resolves as ``--workers`` flag, else ``MOLMECH_WORKERS``
environment variable, else 1.
"""

from __future__ import annotations

import argparse
import json
import re
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from decimal import Context
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import AnalyticsError, eta_read, eta_write, meanfield_efficiencies, memory_constant
from .config import (
    ConfigError,
    RunConfig,
    memory_schedule,
    parse_config,
    parse_material,
    resolved_dict,
    sweep_point,
)
from .dynamics import DynamicsError
from .experiments import (
    ExperimentError,
    excitation_sweep,
    fluorescence_spectrum,
    memory_protocol_run,
    write_read_efficiencies,
)
from .model import bose_occupation, decay_from_quality, estimate_g0
from .propagator import PropagatorSettings

__all__ = ["main"]

_CTX9 = Context(prec=9)


class _UsageError(Exception):
    """Command-line misuse; reported on stderr and mapped to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise _UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# deterministic table formatting


def format_number(x) -> str:
    """Decimal notation with 9 significant digits, no exponent."""
    if isinstance(x, str):
        return x
    xf = float(x)
    if math.isnan(xf):
        return "nan"
    if math.isinf(xf):
        return "inf" if xf > 0 else "-inf"
    if xf == 0.0:
        return "0"
    return format(_CTX9.create_decimal(repr(xf)), "f")


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_number(x) for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _metadata(command: str, cfg: RunConfig | None, wall_s: float, extra: dict) -> dict:
    meta = {
        "command": command,
        "version": __version__,
        "wall_time_s": wall_s,
    }
    if cfg is not None:
        meta["resolved"] = resolved_dict(cfg)
    meta.update(extra)
    return meta


# ---------------------------------------------------------------------------
# argument plumbing


def _positive_int(text: str) -> int:
    try:
        val = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if val < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return val


def _positive_float(text: str) -> float:
    try:
        val = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if val <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return val


def _detuning_range(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected lo:hi:n, e.g. -213:213:4097")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad lo:hi:n triple {text!r}") from exc
    if n < 2:
        raise argparse.ArgumentTypeError("need at least 2 grid points")
    if hi <= lo:
        raise argparse.ArgumentTypeError("hi must exceed lo")
    return lo, hi, n


def build_parser() -> _Parser:
    parser = _Parser(prog="molmech", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"molmech {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: _Parser, config_required: bool = True):
        if config_required:
            p.add_argument("--config", required=True, metavar="PATH", help="TOML run file")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides [output])")
        p.add_argument("--workers", type=_positive_int, metavar="N",
                       help="parallel workers (default: MOLMECH_WORKERS or 1)")
        p.add_argument("--cutoff", type=_positive_int, metavar="N",
                       help="phonon cutoff override")
        p.add_argument("--rtol", type=_positive_float, metavar="X",
                       help="relative tolerance override")

    p = sub.add_parser("spectrum", help="steady-state populations vs drive detuning")
    common(p)
    p.add_argument("--detuning-range", type=_detuning_range, metavar="LO:HI:N",
                   help="detuning grid in gamma units (overrides [simulation])")
    p.add_argument("--fail-fast", action="store_true",
                   help="abort on the first non-converged point")
    # let a leading negative bound in LO:HI:N parse as a value, not a flag
    p._negative_number_matcher = re.compile(r"^-\d+(\.\d+)?(:|$)")

    p = sub.add_parser("fluorescence", help="emission spectrum of the driven steady state")
    common(p)

    p = sub.add_parser("memory", help="write/store/read protocol on the phonon mode")
    common(p)
    p.add_argument("--baselines", action="store_true",
                   help="also run the signal-only baseline and write its columns")

    p = sub.add_parser("estimate", help="laboratory-unit estimates from material numbers")
    p.add_argument("--material", required=True, metavar="PATH", help="TOML material file")
    p.add_argument("--out", metavar="DIR", help="output directory (default: out)")

    p = sub.add_parser("sweep", help="parameter sweep from the [sweep] section")
    common(p)
    p.add_argument("--fail-fast", action="store_true",
                   help="abort on the first failed point")

    return parser


def _resolve_workers(args) -> int:
    if getattr(args, "workers", None):
        return args.workers
    env = os.environ.get("MOLMECH_WORKERS", "").strip()
    if env:
        try:
            val = int(env)
        except ValueError as exc:
            raise _UsageError(f"MOLMECH_WORKERS must be an integer, got {env!r}") from exc
        if val < 1:
            raise _UsageError("MOLMECH_WORKERS must be at least 1")
        return val
    return 1


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config)
    if getattr(args, "cutoff", None):
        cfg = replace(
            cfg,
            system=cfg.system.with_cutoff(args.cutoff),
            simulation=replace(cfg.simulation, cutoff=args.cutoff),
        )
    if getattr(args, "rtol", None):
        cfg = replace(cfg, simulation=replace(cfg.simulation, rtol=args.rtol))
    if getattr(args, "out", None):
        cfg = replace(cfg, output=replace(cfg.output, directory=args.out))
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.output.directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _propagator_settings(cfg: RunConfig) -> PropagatorSettings | None:
    sim = cfg.simulation
    kw = {}
    if sim.substeps_per_period is not None:
        kw["substeps_per_period"] = sim.substeps_per_period
    if sim.periods_per_window is not None:
        kw["periods_per_window"] = sim.periods_per_window
    if sim.sample_stride_periods is not None:
        kw["sample_stride_periods"] = sim.sample_stride_periods
    return PropagatorSettings(**kw) if kw else None


# ---------------------------------------------------------------------------
# commands


def _cmd_spectrum(args) -> int:
    cfg = _load_config(args)
    grid = args.detuning_range or cfg.simulation.detuning_grid()
    if grid is None:
        raise _UsageError(
            "no detuning grid: give --detuning-range or [simulation] detuning_min/max/points"
        )
    lo, hi, n = grid
    detunings = np.linspace(lo, hi, n)
    workers = _resolve_workers(args)
    started = time.perf_counter()
    result = excitation_sweep(
        cfg.system,
        detunings,
        workers=workers,
        check_convergence=cfg.simulation.check_convergence,
        require_bracket=False,
        fail_fast=args.fail_fast,
    )
    wall = time.perf_counter() - started

    out = _out_dir(cfg)
    gmhz = cfg.system.gamma_over_2pi_MHz
    if "csv" in cfg.output.formats:
        rows = [
            (d, d * gmhz, pe, pb, st)
            for d, pe, pb, st in zip(result.detunings, result.pop_e, result.pop_b, result.status)
        ]
        write_csv(out / "spectrum.csv",
                  ["detuning_gamma", "detuning_MHz", "pop_e", "pop_b", "status"], rows)
    if "json" in cfg.output.formats:
        _write_json(out / "metadata.json", _metadata("spectrum", cfg, wall, {
            "grid": {"lo": lo, "hi": hi, "points": n},
            "workers": workers,
            "convergence": result.convergence,
            "n_nonconverged": sum(s != "ok" for s in result.status),
        }))
    print(f"spectrum: {n} points -> {out}")
    return 0 if result.all_ok else 2


def _cmd_fluorescence(args) -> int:
    cfg = _load_config(args)
    started = time.perf_counter()
    result = fluorescence_spectrum(cfg.system)
    wall = time.perf_counter() - started

    out = _out_dir(cfg)
    gmhz = cfg.system.gamma_over_2pi_MHz
    if "csv" in cfg.output.formats:
        rows = [(w, w * gmhz, v) for w, v in zip(result.record.omega, result.record.values)]
        write_csv(out / "fluorescence.csv", ["omega_gamma", "omega_MHz", "intensity"], rows)
    if "json" in cfg.output.formats:
        peaks = [
            {"position_gamma": p.position, "height": p.height,
             "fwhm_gamma": p.fwhm, "prominence": p.prominence}
            for p in result.peaks
        ]
        _write_json(out / "metadata.json", _metadata("fluorescence", cfg, wall, {
            "peaks": peaks,
            "convergence": result.convergence,
        }))
    print(f"fluorescence: {result.record.omega.size} frequencies -> {out}")
    return 0


def _cmd_memory(args) -> int:
    cfg = _load_config(args)
    sched = memory_schedule(cfg)
    settings = _propagator_settings(cfg)
    started = time.perf_counter()
    run = memory_protocol_run(
        cfg.system, sched,
        include_signal_only=args.baselines,
        settings=settings,
    )
    report = write_read_efficiencies(
        run.full, run.control_only, run.signal_only, sched, gamma=cfg.system.gamma
    )
    wall = time.perf_counter() - started

    out = _out_dir(cfg)
    gus = 1.0 / (2.0 * math.pi * cfg.system.gamma_over_2pi_MHz)  # microseconds per 1/gamma
    if "csv" in cfg.output.formats:
        header = ["time_gamma", "time_us", "pop_e_full", "pop_b_full",
                  "pop_e_control", "pop_b_control"]
        columns = [
            run.full.times, run.full.times * gus,
            run.full.observables["pop_e"], run.full.observables["pop_b"],
            run.control_only.observables["pop_e"], run.control_only.observables["pop_b"],
        ]
        if run.signal_only is not None:
            header += ["pop_e_signal", "pop_b_signal"]
            columns += [run.signal_only.observables["pop_e"],
                        run.signal_only.observables["pop_b"]]
        write_csv(out / "trajectory.csv", header, zip(*columns))

    m_w = memory_constant(cfg.system.g0, abs(sched.control_write_amp), sched.pulse_width,
                          cfg.system.gamma, cfg.system.omega_b)
    m_r = memory_constant(cfg.system.g0, abs(sched.control_read_amp), sched.pulse_width,
                          cfg.system.gamma, cfg.system.omega_b)
    efficiency = {
        "eta_write": report.eta_write,
        "eta_read": report.eta_read,
        "n_signal_photons": report.n_signal_photons,
        "stored_phonons": report.stored_phonons,
        "stored_phonons_peak": report.stored_phonons_peak,
        "held_phonons": report.held_phonons,
        "retrieved_photons": report.retrieved_photons,
        "control_only_phonons": report.control_only_phonons,
        "signal_only_phonons": report.signal_only_phonons,
        "calibration": {
            "write_constant": m_w,
            "read_constant": m_r,
            "eta_write_formula": float(eta_write(m_w)),
            "eta_read_formula": float(eta_read(m_r)),
            "control_write_amp": abs(sched.control_write_amp),
            "control_read_amp": abs(sched.control_read_amp),
            "signal_amp": abs(sched.signal_amp),
        },
    }
    if "json" in cfg.output.formats:
        _write_json(out / "efficiency.json", efficiency)
        _write_json(out / "metadata.json", _metadata("memory", cfg, wall, {
            "convergence": run.convergence,
            "baselines": bool(args.baselines),
        }))
    print(f"memory: eta_write={report.eta_write:.4f} eta_read={report.eta_read:.4f} -> {out}")
    return 0


def _cmd_estimate(args) -> int:
    mat = parse_material(args.material)
    started = time.perf_counter()
    kappa, lifetime = decay_from_quality(mat.freq_GHz * 1e9, mat.Q)
    n_th = bose_occupation(mat.freq_GHz * 1e9, mat.temperature_K)
    rows = []
    for strain in mat.strain:
        g0_hz = estimate_g0(
            mat.deformation_potential_over_2pi_THz * 1e12,
            strain,
            mat.young_modulus_Pa,
            mat.mode_volume_um3 * 1e-18,
            mat.freq_GHz * 1e9,
        )
        dw = math.exp(-((g0_hz / (mat.freq_GHz * 1e9)) ** 2))
        rows.append((strain, g0_hz / 1e6, dw, kappa, n_th))
    wall = time.perf_counter() - started

    header = ["strain", "g0_MHz", "debye_waller", "kappa", "n_thermal"]
    widths = [12, 12, 14, 14, 12]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(format_number(x).ljust(w) for x, w in zip(row, widths)))

    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "estimate.csv", header, rows)
    _write_json(out / "metadata.json", _metadata("estimate", None, wall, {
        "material": {
            "name": mat.name,
            "deformation_potential_over_2pi_THz": mat.deformation_potential_over_2pi_THz,
            "mode_volume_um3": mat.mode_volume_um3,
            "young_modulus_Pa": mat.young_modulus_Pa,
            "freq_GHz": mat.freq_GHz,
            "Q": mat.Q,
            "temperature_K": mat.temperature_K,
            "strain": list(mat.strain),
        },
        "kappa_per_s": kappa,
        "lifetime_s": lifetime,
    }))
    return 0


def _sweep_task(payload):
    cfg, parameter, value, rtol = payload
    try:
        system, schedule = sweep_point(cfg, parameter, value)
        eff = meanfield_efficiencies(system, schedule, rtol=(rtol or 1e-9))
    except (AnalyticsError, DynamicsError, ExperimentError, ValueError):
        return (value, "nan", "nan", "nan", "nan", "nonconverged")
    return (value, eff.eta_write, eff.eta_read, eff.stored_phonons,
            eff.retrieved_photons, "ok")


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    if cfg.sweep is None:
        raise ConfigError("the sweep command needs a [sweep] section")
    spec = cfg.sweep
    workers = _resolve_workers(args)
    payloads = [(cfg, spec.parameter, v, cfg.simulation.rtol) for v in spec.values]

    started = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_task, payloads))
    else:
        results = []
        for p in payloads:
            row = _sweep_task(p)
            results.append(row)
            if args.fail_fast and row[-1] != "ok":
                break
    wall = time.perf_counter() - started

    failed = [r for r in results if r[-1] != "ok"]
    if failed and args.fail_fast:
        sys.stderr.write(f"sweep: aborted, point value={failed[0][0]} failed\n")
        return 2

    out = _out_dir(cfg)
    if "csv" in cfg.output.formats:
        write_csv(out / "sweep.csv",
                  ["value", "eta_write", "eta_read", "stored_phonons",
                   "retrieved_photons", "status"],
                  results)
    if "json" in cfg.output.formats:
        _write_json(out / "metadata.json", _metadata("sweep", cfg, wall, {
            "parameter": spec.parameter,
            "experiment": spec.experiment,
            "workers": workers,
            "n_points": len(results),
            "n_failed": len(failed),
        }))
    print(f"sweep: {len(results)} points ({len(failed)} failed) -> {out}")
    return 2 if failed else 0


_COMMANDS = {
    "spectrum": _cmd_spectrum,
    "fluorescence": _cmd_fluorescence,
    "memory": _cmd_memory,
    "estimate": _cmd_estimate,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    except (DynamicsError, AnalyticsError, ExperimentError) as exc:
        sys.stderr.write(f"physics error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"io error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
