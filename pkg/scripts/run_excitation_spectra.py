#!/usr/bin/env python3
"""Driven excitation spectra for the two phonon environments.

Maps steady-state emitter and phonon populations against drive detuning for
the substrate-clamped and the phononic-crystal shielded configurations, then
compares the phonon-sideband peaks: position, width, raw height, and
background-subtracted prominence.  Writes one CSV per configuration plus a
comparison summary on stdout.

The dense part of the grid sits on the red sideband (drive one mode quantum
below the electronic line); a coarser strip covers the zero-phonon line for
the background level.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from molmech.cli import format_number, write_csv
from molmech.config import parse_config
from molmech.experiments import excitation_sweep, find_peaks


def run(name: str, config_path: Path, sideband_points: int, zpl_points: int, workers: int):
    cfg = parse_config(config_path)
    system = cfg.system
    wb = system.omega_b
    fine = np.linspace(-wb - 5.0, -wb + 5.0, sideband_points)
    zpl = np.linspace(-3.0, 3.0, zpl_points)
    grid = np.unique(np.concatenate([fine, zpl]))

    started = time.perf_counter()
    result = excitation_sweep(system, grid, workers=workers, require_bracket=False)
    wall = time.perf_counter() - started

    sel = grid <= -wb + 5.0
    peaks = find_peaks(grid[sel], result.pop_e[sel])
    nb_peaks = find_peaks(grid[sel], result.pop_b[sel])
    print(f"{name}: {grid.size} steady states in {wall:.1f} s "
          f"(cutoff {system.cutoff}, kappa_b {system.kappa_b:g})")
    if peaks:
        p = peaks[0]
        print(f"  sideband pop_e   peak at {p.position:+.4f}, height {p.height:.6e}, "
              f"fwhm {p.fwhm:.4f}, prominence {p.prominence:.6e}")
    if nb_peaks:
        q = nb_peaks[0]
        print(f"  sideband pop_b   peak at {q.position:+.4f}, height {q.height:.6e}")

    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    rows = [
        (d, d * system.gamma_over_2pi_MHz, pe, pb, st)
        for d, pe, pb, st in zip(grid, result.pop_e, result.pop_b, result.status)
    ]
    write_csv(out / "spectrum.csv",
              ["detuning_gamma", "detuning_MHz", "pop_e", "pop_b", "status"], rows)
    print(f"  -> {out / 'spectrum.csv'}")
    return peaks, nb_peaks


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sideband-points", type=int, default=81)
    ap.add_argument("--zpl-points", type=int, default=21)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    sub_peaks, sub_nb = run("substrate", REPO / "configs" / "spectrum_substrate.toml",
                            args.sideband_points, args.zpl_points, args.workers)
    pc_peaks, pc_nb = run("phononic crystal", REPO / "configs" / "spectrum_phononic_crystal.toml",
                          args.sideband_points, args.zpl_points, args.workers)

    if sub_peaks and pc_peaks:
        raw = pc_peaks[0].height / sub_peaks[0].height
        prom = pc_peaks[0].prominence / sub_peaks[0].prominence
        print(f"sideband enhancement, emitter population: raw {format_number(raw)}, "
              f"background-subtracted {format_number(prom)}")
    if sub_nb and pc_nb:
        print(f"sideband enhancement, phonon population: "
              f"{format_number(pc_nb[0].height / sub_nb[0].height)}")


if __name__ == "__main__":
    main()
