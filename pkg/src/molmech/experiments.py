"""Experiment drivers built on the dynamics engine.

Three measurement campaigns:

* ``excitation_sweep`` maps steady-state emitter and phonon populations
  against the detuning of a single CW tone, the driven excitation spectrum.
* ``fluorescence_spectrum`` computes the emission spectrum of the driven
  steady state from the two-time dipole correlation.
* ``memory_protocol_run`` integrates the pulsed write/store/read sequence and
  ``write_read_efficiencies`` turns its trajectories into memory figures of
  merit, with single-beam baselines subtracted so that only the two-photon
  Raman contribution is counted.

Every driver carries an optional cutoff-doubling check; results hold a small
``convergence`` dict describing it.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.signal

from .dynamics import (
    CutoffConvergenceWarning,
    DynamicsError,
    CorrelationSeries,
    SpectrumRecord,
    default_tau_grid,
    make_generator,
    spectrum_from_correlation,
    steady_state,
    two_time_correlation,
)
from .hilbert import basis_ket, ket_density
from .model import (
    CW,
    DriveTone,
    MemorySchedule,
    SystemConfig,
    excited_projector_full,
    number_full,
)
from .propagator import PeriodizedTrajectory, PropagatorSettings, propagate_periodized

__all__ = [
    "ExperimentError",
    "SweepResult",
    "excitation_sweep",
    "FluorescenceResult",
    "fluorescence_spectrum",
    "PeakInfo",
    "find_peaks",
    "MemoryRun",
    "memory_protocol_run",
    "EfficiencyReport",
    "write_read_efficiencies",
]

CONVERGENCE_THRESHOLD = 1e-3


class ExperimentError(RuntimeError):
    """An experiment driver was misconfigured or produced inconsistent data."""


# ---------------------------------------------------------------------------
# steady-state excitation sweep


def _single_tone(config: SystemConfig) -> DriveTone:
    if len(config.tones) != 1:
        raise ExperimentError(
            f"this experiment drives a single tone, config has {len(config.tones)}"
        )
    tone = config.tones[0]
    if not isinstance(tone.envelope, CW):
        raise ExperimentError("this experiment needs a CW drive tone")
    return tone


def _steady_populations(config: SystemConfig) -> tuple[float, float]:
    gen = make_generator(config)
    rho = steady_state(gen)
    dims = config.dims
    pe = float(np.real(np.trace(excited_projector_full(dims).mat @ rho.mat)))
    nb = float(np.real(np.trace(number_full(dims).mat @ rho.mat)))
    return pe, nb


def _sweep_point(payload: tuple[SystemConfig, float]) -> tuple[float, float, str]:
    config, detuning = payload
    tone = config.tones[0]
    cfg = config.with_tones([replace(tone, detuning=float(detuning), is_reference=True)])
    try:
        pe, nb = _steady_populations(cfg)
        return pe, nb, "ok"
    except DynamicsError:
        return float("nan"), float("nan"), "nonconverged"


@dataclass(frozen=True)
class SweepResult:
    """Excitation-sweep output: populations and per-point solver status."""

    detunings: np.ndarray
    pop_e: np.ndarray
    pop_b: np.ndarray
    status: tuple[str, ...]
    convergence: dict

    @property
    def all_ok(self) -> bool:
        return all(s == "ok" for s in self.status)


def excitation_sweep(
    config: SystemConfig,
    detunings: np.ndarray,
    workers: int | None = None,
    check_convergence: bool = True,
    require_bracket: bool = True,
    fail_fast: bool = False,
) -> SweepResult:
    """Steady-state populations versus drive detuning.

    The drive of ``config`` must be a single CW tone; it is re-pinned to each
    grid detuning in turn.  By default the grid must bracket both the
    zero-phonon line and the phonon sidebands (span at least [-omega_b,
    +omega_b]) so that the sweep cannot silently miss the features it exists
    to resolve.  Failed points are reported in ``status`` rather than raised
    unless ``fail_fast`` is set.
    """
    det = np.asarray(detunings, dtype=float)
    if det.ndim != 1 or det.size < 2:
        raise ValueError("detunings must be a 1-d grid")
    _single_tone(config)
    if require_bracket and (det.min() > -config.omega_b or det.max() < config.omega_b):
        raise ExperimentError(
            "the detuning grid must bracket the zero-phonon line and both "
            f"phonon sidebands: need min <= {-config.omega_b:g} and "
            f"max >= {config.omega_b:g}"
        )

    payloads = [(config, float(d)) for d in det]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, payloads, chunksize=8))
    else:
        rows = [_sweep_point(p) for p in payloads]

    pop_e = np.array([r[0] for r in rows])
    pop_b = np.array([r[1] for r in rows])
    status = tuple(r[2] for r in rows)
    if fail_fast and any(s != "ok" for s in status):
        bad = next(i for i, s in enumerate(status) if s != "ok")
        raise ExperimentError(f"steady state failed at detuning {det[bad]:g}")

    convergence: dict = {"checked": False}
    if check_convergence:
        convergence = _sweep_convergence(config, det, pop_e, status)
    return SweepResult(det, pop_e, pop_b, status, convergence)


def _sweep_convergence(config, det, pop_e, status) -> dict:
    """Re-solve the feature points at doubled cutoff and compare."""
    ok = np.array([s == "ok" for s in status])
    if not ok.any():
        return {"checked": False}
    targets = [0.0, -config.omega_b, config.omega_b]
    idx = {int(np.argmin(np.abs(det - t))) for t in targets}
    finite = np.where(ok, pop_e, -np.inf)
    idx.add(int(np.argmax(finite)))
    idx = sorted(i for i in idx if ok[i])
    doubled = config.with_cutoff(2 * config.cutoff)
    worst = 0.0
    for i in idx:
        pe2, _, st = _sweep_point((doubled, det[i]))
        if st != "ok":
            continue
        denom = max(abs(pop_e[i]), abs(pe2), 1e-300)
        worst = max(worst, abs(pop_e[i] - pe2) / denom)
    report = {
        "checked": True,
        "points": [float(det[i]) for i in idx],
        "cutoff": config.cutoff,
        "doubled": 2 * config.cutoff,
        "max_rel_change": worst,
    }
    if worst > CONVERGENCE_THRESHOLD:
        warnings.warn(
            f"excitation sweep changed by {worst:.2e} when the phonon cutoff "
            f"was doubled from {config.cutoff}",
            CutoffConvergenceWarning,
            stacklevel=3,
        )
    return report


# ---------------------------------------------------------------------------
# fluorescence (emission) spectrum


@dataclass(frozen=True)
class PeakInfo:
    """One spectral peak: refined position, height, full width at half max."""

    position: float
    height: float
    fwhm: float
    prominence: float


def find_peaks(
    omega: np.ndarray,
    values: np.ndarray,
    min_rel_prominence: float = 1e-6,
) -> list[PeakInfo]:
    """Locate peaks and their widths on a (possibly non-uniform) grid.

    Peak positions are refined by a parabola through the three samples around
    each maximum; widths are half-height crossings mapped from fractional
    sample indices back to the abscissa.
    """
    omega = np.asarray(omega, dtype=float)
    vals = np.asarray(values, dtype=float)
    if omega.shape != vals.shape or omega.ndim != 1:
        raise ValueError("omega and values must be matching 1-d arrays")
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    if scale == 0.0:
        return []
    idx, props = scipy.signal.find_peaks(vals, prominence=min_rel_prominence * scale)
    if idx.size == 0:
        return []
    widths, _, lips, rips = scipy.signal.peak_widths(vals, idx, rel_height=0.5)
    grid_idx = np.arange(omega.size, dtype=float)
    out = []
    for k, i in enumerate(idx):
        pos = omega[i]
        height = vals[i]
        if 0 < i < omega.size - 1:
            y0, y1, y2 = vals[i - 1], vals[i], vals[i + 1]
            denom = y0 - 2.0 * y1 + y2
            if denom < 0:
                frac = 0.5 * (y0 - y2) / denom
                if abs(frac) <= 0.5:
                    pos = float(np.interp(i + frac, grid_idx, omega))
                    height = float(y1 - 0.25 * (y0 - y2) * frac)
        left = float(np.interp(lips[k], grid_idx, omega))
        right = float(np.interp(rips[k], grid_idx, omega))
        out.append(
            PeakInfo(
                position=float(pos),
                height=float(height),
                fwhm=right - left,
                prominence=float(props["prominences"][k]),
            )
        )
    out.sort(key=lambda p: p.height, reverse=True)
    return out


def default_emission_grid(config: SystemConfig, half_span_orders: int = 2) -> np.ndarray:
    """Windows of fine resolution around the drive line and its phonon lines.

    Fine windows (step gamma/200, so lines as narrow as the phonon loss rate
    are resolved) of half-width 10 gamma sit at k omega_b for |k| <=
    ``half_span_orders``; a coarse background grid ties them together.  Every
    window is centered exactly on its line so peak heights are sampled at the
    line centers even when a line is narrower than the step.
    """
    wb = config.omega_b
    pieces = [np.arange(-(half_span_orders + 0.4) * wb, (half_span_orders + 0.4) * wb, 0.5)]
    for k in range(-half_span_orders, half_span_orders + 1):
        pieces.append(k * wb + np.arange(-10.0, 10.0, 0.005))
    grid = np.unique(np.concatenate(pieces))
    return grid


@dataclass(frozen=True)
class FluorescenceResult:
    """Emission spectrum of the driven steady state plus its peak inventory."""

    record: SpectrumRecord
    correlation: CorrelationSeries
    peaks: list[PeakInfo]
    convergence: dict


def fluorescence_spectrum(
    config: SystemConfig,
    omega_grid: np.ndarray | None = None,
    check_convergence: bool = True,
    subtract_coherent: bool = True,
) -> FluorescenceResult:
    """Incoherent emission spectrum under CW drive at the zero-phonon line.

    The driver insists on a single resonant CW tone (detuning exactly zero):
    that is the configuration whose sidebands separate cleanly into phonon
    absorption and emission lines.  The two-time dipole correlation is taken
    against the steady state and transformed with the emission-side
    convention, so phonon-emission (Stokes) lines land at negative abscissa
    and phonon-absorption (anti-Stokes) lines at positive abscissa.
    """
    tone = _single_tone(config)
    if tone.detuning != 0.0:
        raise ExperimentError(
            "the fluorescence driver is defined for a zero-detuned CW drive; "
            f"got detuning {tone.detuning:g}"
        )
    if omega_grid is None:
        omega_grid = default_emission_grid(config)

    record, corr = _emission_once(config, omega_grid, subtract_coherent)
    peaks = find_peaks(record.omega, record.values)

    convergence: dict = {"checked": False}
    if check_convergence:
        doubled = config.with_cutoff(2 * config.cutoff)
        record2, _ = _emission_once(doubled, omega_grid, subtract_coherent)
        num = float(np.max(np.abs(record.values - record2.values)))
        den = float(max(np.max(np.abs(record.values)), np.max(np.abs(record2.values)), 1e-300))
        rel = num / den
        convergence = {
            "checked": True,
            "cutoff": config.cutoff,
            "doubled": doubled.cutoff,
            "max_rel_change": rel,
        }
        if rel > CONVERGENCE_THRESHOLD:
            warnings.warn(
                f"emission spectrum changed by {rel:.2e} when the phonon "
                f"cutoff was doubled from {config.cutoff}",
                CutoffConvergenceWarning,
                stacklevel=2,
            )
    return FluorescenceResult(record, corr, peaks, convergence)


def _emission_once(config, omega_grid, subtract_coherent):
    gen = make_generator(config)
    rho = steady_state(gen)
    dims = config.dims
    from .model import sigma_full

    sig = sigma_full(dims)
    taus = default_tau_grid(config.kappa_b)
    corr = two_time_correlation(gen, rho, sig.dag(), sig, taus)
    record = spectrum_from_correlation(corr, omega_grid, subtract_coherent=subtract_coherent)
    return record, corr


# ---------------------------------------------------------------------------
# pulsed memory protocol


@dataclass(frozen=True)
class MemoryRun:
    """Trajectories of one memory protocol execution."""

    full: PeriodizedTrajectory
    control_only: PeriodizedTrajectory
    signal_only: PeriodizedTrajectory | None
    schedule: MemorySchedule
    config: SystemConfig
    convergence: dict


def _memory_variant(
    config: SystemConfig,
    schedule: MemorySchedule,
    which: str,
    settings: PropagatorSettings | None,
) -> PeriodizedTrajectory:
    sched = schedule.variant(which)
    cfg = config.with_tones(sched.tones(config.omega_b))
    gen = make_generator(cfg)
    dims = cfg.dims
    rho0 = ket_density(basis_ket(excited=False, n=0, dims=dims), dims)
    pe = excited_projector_full(dims)
    nb = number_full(dims)
    period = 2.0 * np.pi / (schedule.control_detuning(config.omega_b) - schedule.signal_detuning)
    return propagate_periodized(
        gen,
        rho0,
        schedule.span,
        sample_ops={"pop_e": pe, "pop_b": nb},
        integral_ops={"pop_e": pe},
        settings=settings,
        period=period,
    )


def memory_protocol_run(
    config: SystemConfig,
    schedule: MemorySchedule,
    include_signal_only: bool = False,
    settings: PropagatorSettings | None = None,
    check_convergence: bool = True,
) -> MemoryRun:
    """Integrate the write/store/read protocol and its single-beam baselines.

    Always runs the full sequence and the control-only baseline (the
    efficiency definitions difference against it); the signal-only baseline is
    optional.  The cutoff-doubling check compares stored phonons at the end of
    the write window.
    """
    full = _memory_variant(config, schedule, "full", settings)
    ctrl = _memory_variant(config, schedule, "control_only", settings)
    sig = (
        _memory_variant(config, schedule, "signal_only", settings)
        if include_signal_only
        else None
    )

    convergence: dict = {"checked": False}
    if check_convergence:
        t_w = schedule.write_window[1]
        doubled = config.with_cutoff(2 * config.cutoff)
        full2 = _memory_variant(doubled, schedule, "full", settings)
        a = full.value_at("pop_b", t_w)
        b = full2.value_at("pop_b", t_w)
        rel = abs(a - b) / max(abs(a), abs(b), 1e-300)
        convergence = {
            "checked": True,
            "cutoff": config.cutoff,
            "doubled": doubled.cutoff,
            "max_rel_change": rel,
        }
        if rel > CONVERGENCE_THRESHOLD:
            warnings.warn(
                f"stored phonon number changed by {rel:.2e} when the phonon "
                f"cutoff was doubled from {config.cutoff}",
                CutoffConvergenceWarning,
                stacklevel=2,
            )
    return MemoryRun(full, ctrl, sig, schedule, config, convergence)


@dataclass(frozen=True)
class EfficiencyReport:
    """Memory figures of merit from differenced trajectories.

    stored_phonons is the control-subtracted phonon population at the end of
    the write window; retrieved_photons the control-subtracted photon count
    emitted during the read window; eta_read divides the latter by the
    phonons still held when the read window opens.
    """

    eta_write: float
    eta_read: float
    n_signal_photons: float
    stored_phonons: float
    stored_phonons_peak: float
    held_phonons: float
    retrieved_photons: float
    control_only_phonons: float
    signal_only_phonons: float | None


def write_read_efficiencies(
    full: PeriodizedTrajectory,
    control_only: PeriodizedTrajectory,
    signal_only: PeriodizedTrajectory | None,
    schedule: MemorySchedule,
    gamma: float = 1.0,
) -> EfficiencyReport:
    """Turn protocol trajectories into write/read efficiencies.

    Both efficiencies difference the full run against the control-only
    baseline so that phonons and photons generated by the control pulses
    alone are not credited to the memory.  A differenced quantity below
    -1e-6 means the baselines do not belong to the same protocol and raises.
    """
    t_w = schedule.write_window[1]
    t_r0, t_r1 = schedule.read_window
    n_sig = schedule.n_signal_photons(gamma)
    if n_sig <= 0:
        raise ExperimentError("the schedule carries no signal photons")

    stored = full.value_at("pop_b", t_w) - control_only.value_at("pop_b", t_w)
    retrieved = gamma * (
        full.integral_between("pop_e", t_r0, t_r1)
        - control_only.integral_between("pop_e", t_r0, t_r1)
    )
    for name, value in (("stored phonons", stored), ("retrieved photons", retrieved)):
        if value < -1e-6:
            raise ExperimentError(
                f"differenced {name} is {value:.3g} < 0; full and control-only "
                "runs are inconsistent"
            )

    sel = (full.times >= schedule.write_center) & (full.times <= t_w)
    diff = full.observables["pop_b"][sel] - control_only.observables["pop_b"][sel]
    peak = float(diff.max()) if diff.size else stored

    held = full.value_at("pop_b", t_r0)
    if held <= 0:
        raise ExperimentError("no phonons held at the start of the read window")
    return EfficiencyReport(
        eta_write=stored / n_sig,
        eta_read=retrieved / held,
        n_signal_photons=n_sig,
        stored_phonons=stored,
        stored_phonons_peak=peak,
        held_phonons=held,
        retrieved_photons=retrieved,
        control_only_phonons=control_only.value_at("pop_b", t_w),
        signal_only_phonons=(
            signal_only.value_at("pop_b", t_w) if signal_only is not None else None
        ),
    )
