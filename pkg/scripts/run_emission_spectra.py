#!/usr/bin/env python3
"""Emission spectra of the resonantly driven emitter, both phonon environments.

Computes the incoherent fluorescence spectrum from the two-time dipole
correlation of the driven steady state and inventories the phonon structure:
Stokes lines at negative frequencies (phonon emission), the anti-Stokes line
at +omega_b (phonon absorption, present only when the mode is long-lived and
hot with steady-state phonons), and Stokes overtones at multiples of omega_b.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from molmech.cli import write_csv
from molmech.config import parse_config
from molmech.experiments import fluorescence_spectrum, find_peaks


def nearest_peak(peaks, target, window=2.0):
    found = [p for p in peaks if abs(p.position - target) < window]
    return max(found, key=lambda p: p.height) if found else None


def run(name: str, config_path: Path):
    cfg = parse_config(config_path)
    system = cfg.system
    started = time.perf_counter()
    result = fluorescence_spectrum(system)
    wall = time.perf_counter() - started
    print(f"{name}: {result.record.omega.size} frequencies in {wall:.1f} s")

    peaks = find_peaks(result.record.omega, result.record.values, min_rel_prominence=1e-9)
    wb = system.omega_b
    for label, target in [("Stokes  -w_b", -wb), ("anti-Stokes +w_b", +wb),
                          ("overtone -2w_b", -2 * wb)]:
        p = nearest_peak(peaks, target)
        if p is None:
            print(f"  {label:<18} absent")
        else:
            print(f"  {label:<18} at {p.position:+9.3f}, height {p.height:.4e}, "
                  f"fwhm {p.fwhm:.4f}")

    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    rows = [(w, w * system.gamma_over_2pi_MHz, v)
            for w, v in zip(result.record.omega, result.record.values)]
    write_csv(out / "fluorescence.csv", ["omega_gamma", "omega_MHz", "intensity"], rows)
    print(f"  -> {out / 'fluorescence.csv'}")
    return result


def main():
    argparse.ArgumentParser(description=__doc__.splitlines()[0]).parse_args()
    run("substrate", REPO / "configs" / "fluorescence_substrate.toml")
    run("phononic crystal", REPO / "configs" / "fluorescence_phononic_crystal.toml")


if __name__ == "__main__":
    main()
