#!/usr/bin/env python3
"""Write/store/read phonon memory: mean field, master equation, and theory.

Runs the calibrated pulse protocol three ways and prints the efficiency
comparison table:

* pulse-area formulas eta_write(M_w) and eta_read(M_r),
* the mean-field model (coherent amplitudes, seconds),
* the full master equation with the control-only baseline subtracted
  (minutes; skip with --meanfield-only).

Also reports the storage decay: the retrieved signal falls as
exp(-kappa_b * delay), which at the configured damping is a millisecond-scale
1/e time.

--thermal seeds the phonon bath with the 0.1 K occupation of a 7.02 GHz mode;
the differenced efficiencies are unchanged but the control-only baseline then
shows the thermal background the write pulse partially clears.
"""

import argparse
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from molmech.analytics import (
    eta_read,
    eta_write,
    meanfield_efficiencies,
    memory_constant,
    retrieval_vs_delay,
)
from molmech.cli import write_csv
from molmech.config import memory_schedule, parse_config
from molmech.experiments import memory_protocol_run, write_read_efficiencies
from molmech.model import bose_occupation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--meanfield-only", action="store_true",
                    help="skip the master-equation run")
    ap.add_argument("--thermal", action="store_true",
                    help="use the 0.1 K thermal occupation of a 7.02 GHz mode")
    args = ap.parse_args()

    cfg = parse_config(REPO / "configs" / "memory_protocol.toml")
    system = cfg.system
    if args.thermal:
        system = replace(system, n_thermal=bose_occupation(7.02e9, 0.1))
        print(f"thermal occupation n = {system.n_thermal:.5f}")
    sched = memory_schedule(cfg)

    m_w = memory_constant(system.g0, abs(sched.control_write_amp), sched.pulse_width,
                          system.gamma, system.omega_b)
    m_r = memory_constant(system.g0, abs(sched.control_read_amp), sched.pulse_width,
                          system.gamma, system.omega_b)
    print(f"calibration: M_w = {m_w:.4f}, M_r = {m_r:.4f}, "
          f"signal photons = {sched.n_signal_photons(system.gamma):.4f}")
    print(f"pulse-area formulas:  eta_write = {float(eta_write(m_w)):.4f}, "
          f"eta_read = {float(eta_read(m_r)):.4f}")

    started = time.perf_counter()
    mf = meanfield_efficiencies(system, sched)
    print(f"mean field ({time.perf_counter() - started:.1f} s):      "
          f"eta_write = {mf.eta_write:.4f}, eta_read = {mf.eta_read:.4f}, "
          f"stored peak |beta|^2 = {mf.stored_phonons_peak:.5e}")

    if not args.meanfield_only:
        started = time.perf_counter()
        run = memory_protocol_run(system, sched, include_signal_only=True,
                                  check_convergence=False)
        report = write_read_efficiencies(run.full, run.control_only, run.signal_only,
                                         sched, gamma=system.gamma)
        print(f"master equation ({time.perf_counter() - started:.0f} s): "
              f"eta_write = {report.eta_write:.4f}, eta_read = {report.eta_read:.4f}, "
              f"stored peak = {report.stored_phonons_peak:.5e}")
        print(f"  control-only phonons {report.control_only_phonons:.3e} "
              f"vs full {report.stored_phonons + report.control_only_phonons:.3e}")

        out = Path(cfg.output.directory)
        out.mkdir(parents=True, exist_ok=True)
        gus = 1.0 / (2.0 * math.pi * system.gamma_over_2pi_MHz)
        rows = zip(
            run.full.times, run.full.times * gus,
            run.full.observables["pop_e"], run.full.observables["pop_b"],
            run.control_only.observables["pop_e"], run.control_only.observables["pop_b"],
            run.signal_only.observables["pop_e"], run.signal_only.observables["pop_b"],
        )
        write_csv(out / "trajectory.csv",
                  ["time_gamma", "time_us", "pop_e_full", "pop_b_full",
                   "pop_e_control", "pop_b_control", "pop_e_signal", "pop_b_signal"],
                  rows)
        print(f"  -> {out / 'trajectory.csv'}")

    delays = [sched.storage_delay * k for k in (1.0, 2.0, 4.0)]
    curve = retrieval_vs_delay(system, sched, delays, mode="fast")
    gamma_rad = 2.0 * math.pi * system.gamma_over_2pi_MHz * 1e6
    t_e = 1.0 / (system.kappa_b * gamma_rad)
    print(f"storage decay: 1/e time = {t_e * 1e3:.3f} ms; "
          f"retrieved vs delay {[f'{v:.3e}' for v in curve.values]}")


if __name__ == "__main__":
    main()
