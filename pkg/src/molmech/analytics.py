"""Closed-form memory theory, mean-field dynamics and weak-drive analytics.

Memory efficiency theory
------------------------
For Gaussian write/read control pulses of amplitude width tau_p the adiabatic
Raman analysis collapses to a single dimensionless pulse-area constant

    M = 2 g0^2 |Omega_c|^2 tau_p / (gamma ((gamma/2)^2 + omega_b^2))

and the efficiencies

    eta_write = sqrt(8/pi) (1/M) [1/2 - exp(-M sqrt(pi/2)) + 1/2 exp(-M sqrt(2 pi))]
    eta_read  = 1 - exp(-M sqrt(pi/2)).

The write bracket is algebraically (1/2)(1 - exp(-m))^2 with m = M sqrt(pi/2),
which is how it is evaluated here (expm1 keeps the small-M limit exact; the
slope at M = 0 is sqrt(pi/2)).  The write efficiency has a single maximum
around M ~ 1 and decays as 1/M beyond it; the read efficiency saturates at 1.

Mean-field model
----------------
``meanfield_memory`` integrates the factorized weak-excitation equations for
the emitter coherence s = <sigma> and phonon amplitude beta = <b> in the frame
of the signal tone,

    ds/dt    = -(i Delta_s + gamma/2) s - i g0 s (beta + conj(beta)) - i f(t)
    dbeta/dt = -(i omega_b + kappa_b/2) beta - i g0 |s|^2

with f(t) the summed complex drive fields, alongside the running integral of
|s|^2 used for photon counting.  Internally beta is co-rotated at omega_b so
that the integrator takes large steps between pulses; the stored trajectory is
in the non-rotated frame.  The linear drive term means the model is only valid
for weak excitation; runs flag |s| > 0.3 and reject |s| > 1.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from numba import njit
from scipy.optimize import minimize_scalar

from .dynamics import SpectrumRecord
from .model import CW, GaussianPulse, MemorySchedule, SystemConfig

__all__ = [
    "AnalyticsError",
    "SaturationWarning",
    "memory_constant",
    "control_amp_for_constant",
    "signal_amp_for_photons",
    "eta_write",
    "eta_read",
    "WriteOptimum",
    "eta_write_max",
    "calibrated_schedule",
    "MeanFieldState",
    "MeanFieldTrajectory",
    "meanfield_memory",
    "MeanFieldEfficiencies",
    "meanfield_efficiencies",
    "weak_drive_spectrum_analytic",
    "retrieval_vs_delay",
]


class AnalyticsError(RuntimeError):
    """An analytic routine failed to converge or was used out of range."""


class SaturationWarning(UserWarning):
    """The mean-field emitter coherence left the weak-excitation regime."""


_SQRT_PI_HALF = math.sqrt(math.pi / 2.0)


# ---------------------------------------------------------------------------
# closed-form efficiency theory


def memory_constant(
    g0: float,
    omega_c_amp: float,
    tau_p: float,
    gamma: float = 1.0,
    omega_b: float = 177.15,
) -> float:
    """Raman pulse-area constant M for a Gaussian control pulse."""
    if tau_p <= 0 or gamma <= 0 or omega_b <= 0:
        raise ValueError("tau_p, gamma and omega_b must be positive")
    denom = gamma * ((gamma / 2.0) ** 2 + omega_b**2)
    return 2.0 * g0**2 * abs(omega_c_amp) ** 2 * tau_p / denom


def control_amp_for_constant(
    M: float,
    g0: float,
    tau_p: float,
    gamma: float = 1.0,
    omega_b: float = 177.15,
) -> float:
    """Control amplitude |Omega_c| that realizes a target pulse-area constant."""
    if M < 0:
        raise ValueError("the pulse-area constant cannot be negative")
    if g0 <= 0 or tau_p <= 0:
        raise ValueError("g0 and tau_p must be positive")
    denom = gamma * ((gamma / 2.0) ** 2 + omega_b**2)
    return math.sqrt(M * denom / (2.0 * g0**2 * tau_p))


def signal_amp_for_photons(n_photons: float, tau_p: float, gamma: float = 1.0) -> float:
    """Signal amplitude whose Gaussian pulse carries ``n_photons`` photons.

    Inverts n = (1/gamma) integral |Omega_s|^2 exp(-2 (t/tau_p)^2) dt
            = |Omega_s|^2 tau_p sqrt(pi/2) / gamma.
    """
    if n_photons < 0 or tau_p <= 0:
        raise ValueError("need n_photons >= 0 and tau_p > 0")
    return math.sqrt(n_photons * gamma / (tau_p * _SQRT_PI_HALF))


def eta_write(M):
    """Write efficiency of the Gaussian-pulse Raman memory versus M."""
    m_arr = np.asarray(M, dtype=float)
    if np.any(m_arr < 0):
        raise ValueError("the pulse-area constant cannot be negative")
    m = m_arr * _SQRT_PI_HALF
    with np.errstate(divide="ignore", invalid="ignore"):
        # sqrt(8/pi) / M * (1/2) expm1(-m)^2  ==  expm1(-m)^2 / m
        vals = np.where(m_arr > 0.0, np.expm1(-m) ** 2 / np.where(m > 0, m, 1.0), 0.0)
    return float(vals) if np.isscalar(M) else vals


def eta_read(M):
    """Read efficiency versus M; approaches 1 for strong pulses."""
    m_arr = np.asarray(M, dtype=float)
    if np.any(m_arr < 0):
        raise ValueError("the pulse-area constant cannot be negative")
    vals = -np.expm1(-m_arr * _SQRT_PI_HALF)
    return float(vals) if np.isscalar(M) else vals


@dataclass(frozen=True)
class WriteOptimum:
    """Location and value of the write-efficiency maximum."""

    M_star: float
    eta_star: float


def eta_write_max() -> WriteOptimum:
    """Maximize eta_write over M (single interior maximum below M = 10)."""
    res = minimize_scalar(
        lambda m: -eta_write(m),
        bounds=(1e-9, 10.0),
        method="bounded",
        options={"xatol": 1e-8},
    )
    if not res.success:
        raise AnalyticsError("write-efficiency maximization did not converge")
    return WriteOptimum(M_star=float(res.x), eta_star=float(-res.fun))


def calibrated_schedule(
    config: SystemConfig,
    pulse_width: float,
    photons_per_pulse: float = 0.04,
    write_constant: float = 1.0,
    read_constant: float = 1.57,
    write_center: float | None = None,
    storage_delay: float | None = None,
    raman_detuning: float = 0.0,
) -> MemorySchedule:
    """Build a schedule whose control amplitudes hit target pulse-area constants.

    Defaults place the write pulse at 4 pulse widths and the read pulse 7
    pulse widths later, the tightest spacing the 3-width windows allow with a
    little slack.
    """
    if write_center is None:
        write_center = 4.0 * pulse_width
    if storage_delay is None:
        storage_delay = 7.0 * pulse_width
    return MemorySchedule(
        pulse_width=pulse_width,
        write_center=write_center,
        storage_delay=storage_delay,
        signal_amp=signal_amp_for_photons(photons_per_pulse, pulse_width, config.gamma),
        control_write_amp=control_amp_for_constant(
            write_constant, config.g0, pulse_width, config.gamma, config.omega_b
        ),
        control_read_amp=control_amp_for_constant(
            read_constant, config.g0, pulse_width, config.gamma, config.omega_b
        ),
        raman_detuning=raman_detuning,
    )


# ---------------------------------------------------------------------------
# mean-field integrator (Dormand-Prince 5(4), compiled)


@njit(cache=True)
def _mf_rhs(t, s, bt, delta_s, gamma, g0, omega_b, kappa_b, amp, car, kind, cen, wid, sat):
    """RHS for (s, beta_tilde, J) with beta_tilde = beta * exp(i omega_b t)."""
    f = 0.0 + 0.0j
    for k in range(amp.shape[0]):
        e = 1.0
        if kind[k] == 1:
            x = (t - cen[k]) / wid[k]
            xx = x * x
            e = math.exp(-xx) if xx < 60.0 else 0.0
        if e != 0.0:
            f += amp[k] * e * cmath.exp(1j * (car[k] * t))
    rot = cmath.exp(-1j * (omega_b * t))
    beta = bt * rot
    x_b = 2.0 * beta.real
    sn = s.real * s.real + s.imag * s.imag
    if sat:
        f = f * (1.0 - 2.0 * sn)
    ds = -(1j * delta_s + 0.5 * gamma) * s - 1j * g0 * s * x_b - 1j * f
    dbt = -0.5 * kappa_b * bt - 1j * g0 * sn / rot
    return ds, dbt, sn


@njit(cache=True)
def _mf_kernel(
    t_samples,
    s0,
    bt0,
    j0,
    delta_s,
    gamma,
    g0,
    omega_b,
    kappa_b,
    amp,
    car,
    kind,
    cen,
    wid,
    rtol,
    atol,
    h_max,
    sat,
):
    n = t_samples.shape[0]
    out_s = np.empty(n, np.complex128)
    out_bt = np.empty(n, np.complex128)
    out_j = np.empty(n, np.float64)

    t = t_samples[0]
    s = s0
    bt = bt0
    jj = j0
    out_s[0] = s
    out_bt[0] = bt
    out_j[0] = jj
    max_s = abs(s)

    k1s, k1b, k1j = _mf_rhs(t, s, bt, delta_s, gamma, g0, omega_b, kappa_b, amp, car, kind, cen, wid, sat)
    h = min(h_max, 1e-3)

    for i in range(1, n):
        t_goal = t_samples[i]
        while t < t_goal:
            trunc = h > t_goal - t
            hs = t_goal - t if trunc else h
            # Dormand-Prince stages
            ys = s + hs * (0.2 * k1s)
            yb = bt + hs * (0.2 * k1b)
            k2s, k2b, k2j = _mf_rhs(t + 0.2 * hs, ys, yb, delta_s, gamma, g0, omega_b, kappa_b, amp, car, kind, cen, wid, sat)
            ys = s + hs * (0.075 * k1s + 0.225 * k2s)
            yb = bt + hs * (0.075 * k1b + 0.225 * k2b)
            k3s, k3b, k3j = _mf_rhs(t + 0.3 * hs, ys, yb, delta_s, gamma, g0, omega_b, kappa_b, amp, car, kind, cen, wid, sat)
            a41 = 44.0 / 45.0
            a42 = -56.0 / 15.0
            a43 = 32.0 / 9.0
            ys = s + hs * (a41 * k1s + a42 * k2s + a43 * k3s)
            yb = bt + hs * (a41 * k1b + a42 * k2b + a43 * k3b)
            k4s, k4b, k4j = _mf_rhs(t + 0.8 * hs, ys, yb, delta_s, gamma, g0, omega_b, kappa_b, amp, car, kind, cen, wid, sat)
            a51 = 19372.0 / 6561.0
            a52 = -25360.0 / 2187.0
            a53 = 64448.0 / 6561.0
            a54 = -212.0 / 729.0
            ys = s + hs * (a51 * k1s + a52 * k2s + a53 * k3s + a54 * k4s)
            yb = bt + hs * (a51 * k1b + a52 * k2b + a53 * k3b + a54 * k4b)
            k5s, k5b, k5j = _mf_rhs(t + (8.0 / 9.0) * hs, ys, yb, delta_s, gamma, g0, omega_b, kappa_b, amp, car, kind, cen, wid, sat)
            a61 = 9017.0 / 3168.0
            a62 = -355.0 / 33.0
            a63 = 46732.0 / 5247.0
            a64 = 49.0 / 176.0
            a65 = -5103.0 / 18656.0
            ys = s + hs * (a61 * k1s + a62 * k2s + a63 * k3s + a64 * k4s + a65 * k5s)
            yb = bt + hs * (a61 * k1b + a62 * k2b + a63 * k3b + a64 * k4b + a65 * k5b)
            k6s, k6b, k6j = _mf_rhs(t + hs, ys, yb, delta_s, gamma, g0, omega_b, kappa_b, amp, car, kind, cen, wid, sat)
            b1 = 35.0 / 384.0
            b3 = 500.0 / 1113.0
            b4 = 125.0 / 192.0
            bw5 = -2187.0 / 6784.0
            b6 = 11.0 / 84.0
            s5 = s + hs * (b1 * k1s + b3 * k3s + b4 * k4s + bw5 * k5s + b6 * k6s)
            bt5 = bt + hs * (b1 * k1b + b3 * k3b + b4 * k4b + bw5 * k5b + b6 * k6b)
            j5 = jj + hs * (b1 * k1j + b3 * k3j + b4 * k4j + bw5 * k5j + b6 * k6j)
            k7s, k7b, k7j = _mf_rhs(t + hs, s5, bt5, delta_s, gamma, g0, omega_b, kappa_b, amp, car, kind, cen, wid, sat)
            # error = 5th-order minus embedded 4th-order solution
            e1 = 71.0 / 57600.0
            e3 = -71.0 / 16695.0
            e4 = 71.0 / 1920.0
            e5 = -17253.0 / 339200.0
            e6 = 22.0 / 525.0
            e7 = -1.0 / 40.0
            err_s = hs * (e1 * k1s + e3 * k3s + e4 * k4s + e5 * k5s + e6 * k6s + e7 * k7s)
            err_b = hs * (e1 * k1b + e3 * k3b + e4 * k4b + e5 * k5b + e6 * k6b + e7 * k7b)
            err_j = hs * (e1 * k1j + e3 * k3j + e4 * k4j + e5 * k5j + e6 * k6j + e7 * k7j)
            sc_s = atol + rtol * max(abs(s), abs(s5))
            sc_b = atol + rtol * max(abs(bt), abs(bt5))
            sc_j = atol + rtol * max(abs(jj), abs(j5))
            en = math.sqrt(
                (
                    (abs(err_s) / sc_s) ** 2
                    + (abs(err_b) / sc_b) ** 2
                    + (abs(err_j) / sc_j) ** 2
                )
                / 3.0
            )
            accepted = en <= 1.0
            if accepted:
                t = t + hs
                s = s5
                bt = bt5
                jj = j5
                k1s, k1b, k1j = k7s, k7b, k7j
                a = abs(s)
                if a > max_s:
                    max_s = a
            fac = 0.9 * en ** (-0.2) if en > 0.0 else 5.0
            if fac > 5.0:
                fac = 5.0
            elif fac < 0.2:
                fac = 0.2
            if accepted and trunc:
                # the boundary, not the error, limited this step: keep the
                # controller's step estimate
                h = max(h, hs * fac)
            else:
                h = hs * fac
            if h > h_max:
                h = h_max
            if h < 1e-12:
                raise ValueError("mean-field step size collapsed")
        out_s[i] = s
        out_bt[i] = bt
        out_j[i] = jj
    return out_s, out_bt, out_j, max_s


@dataclass(frozen=True)
class MeanFieldState:
    """Instantaneous mean-field state (emitter coherence, phonon amplitude)."""

    s: complex
    beta: complex
    time: float


@dataclass(frozen=True)
class MeanFieldTrajectory:
    """Sampled mean-field run.

    ``emitted`` holds the running integral of |s(t)|^2 from t = 0, so that
    gamma times a difference of its values counts photons emitted in a window.
    """

    times: np.ndarray
    s: np.ndarray
    beta: np.ndarray
    emitted: np.ndarray
    max_abs_s: float
    saturated: bool
    schedule: MemorySchedule

    def state_at(self, t: float) -> MeanFieldState:
        return MeanFieldState(
            s=complex(np.interp(t, self.times, self.s.real) + 1j * np.interp(t, self.times, self.s.imag)),
            beta=complex(np.interp(t, self.times, self.beta.real) + 1j * np.interp(t, self.times, self.beta.imag)),
            time=float(t),
        )

    def phonon_population_at(self, t: float) -> float:
        st = self.state_at(t)
        return abs(st.beta) ** 2

    def emitted_between(self, t_a: float, t_b: float, gamma: float = 1.0) -> float:
        """Photons gamma * integral |s|^2 dt over [t_a, t_b]."""
        ja = np.interp(t_a, self.times, self.emitted)
        jb = np.interp(t_b, self.times, self.emitted)
        return gamma * float(jb - ja)


def meanfield_memory(
    config: SystemConfig,
    schedule: MemorySchedule,
    variant: str = "full",
    rtol: float = 1e-9,
    atol: float = 1e-12,
    sample_spacing: float = 2.0,
    t_end: float | None = None,
    saturation: bool = False,
) -> MeanFieldTrajectory:
    """Integrate the mean-field memory equations for one schedule variant.

    The run starts from the vacuum at t = 0 and ends one pulse width past the
    read window (or at ``t_end``).  Samples are spaced by ``sample_spacing``
    with both window edges included exactly.
    """
    sched = schedule.variant(variant)
    end = float(t_end) if t_end is not None else sched.span
    base = np.arange(0.0, end, sample_spacing, dtype=float)
    marks = np.array(
        [*sched.write_window, sched.write_center, *sched.read_window, sched.read_center, end]
    )
    t_samples = np.unique(np.concatenate([base, marks[marks <= end]]))

    amps, cars, kinds, cens, wids = [], [], [], [], []
    for tone in sched.tones(config.omega_b):
        amps.append(complex(tone.amplitude))
        cars.append(tone.detuning - sched.signal_detuning)
        if isinstance(tone.envelope, GaussianPulse):
            kinds.append(1)
            cens.append(tone.envelope.center)
            wids.append(tone.envelope.width)
        elif isinstance(tone.envelope, CW):
            kinds.append(0)
            cens.append(0.0)
            wids.append(1.0)
        else:
            raise TypeError(f"unsupported envelope {type(tone.envelope).__name__}")

    s_arr, bt_arr, j_arr, max_s = _mf_kernel(
        t_samples,
        0.0 + 0.0j,
        0.0 + 0.0j,
        0.0,
        sched.signal_detuning,
        config.gamma,
        config.g0,
        config.omega_b,
        config.kappa_b,
        np.array(amps, dtype=np.complex128),
        np.array(cars, dtype=np.float64),
        np.array(kinds, dtype=np.int64),
        np.array(cens, dtype=np.float64),
        np.array(wids, dtype=np.float64),
        float(rtol),
        float(atol),
        5.0,
        saturation,
    )
    beta = bt_arr * np.exp(-1j * config.omega_b * t_samples)

    if max_s > 1.0 + 1e-6:
        raise AnalyticsError(
            f"mean-field coherence reached |s| = {max_s:.3g} > 1; the linear "
            "weak-excitation model does not apply at this drive strength"
        )
    saturated = max_s > 0.3
    if saturated:
        warnings.warn(
            f"mean-field coherence reached |s| = {max_s:.3g} > 0.3; treat the "
            "run as qualitative",
            SaturationWarning,
            stacklevel=2,
        )
    return MeanFieldTrajectory(
        times=t_samples,
        s=s_arr,
        beta=beta,
        emitted=j_arr,
        max_abs_s=float(max_s),
        saturated=saturated,
        schedule=sched,
    )


@dataclass(frozen=True)
class MeanFieldEfficiencies:
    """Write/read efficiencies extracted from mean-field runs.

    Mirrors the master-equation bookkeeping: stored phonons are the full-run
    minus control-only |beta|^2 at the end of the write window, retrieved
    photons the differenced gamma integral of |s|^2 over the read window.
    """

    eta_write: float
    eta_read: float
    n_signal_photons: float
    stored_phonons: float
    stored_phonons_peak: float
    retrieved_photons: float
    control_only_phonons: float
    full: MeanFieldTrajectory
    control_only: MeanFieldTrajectory


def meanfield_efficiencies(
    config: SystemConfig,
    schedule: MemorySchedule,
    rtol: float = 1e-9,
    atol: float = 1e-12,
) -> MeanFieldEfficiencies:
    full = meanfield_memory(config, schedule, "full", rtol=rtol, atol=atol)
    ctrl = meanfield_memory(config, schedule, "control_only", rtol=rtol, atol=atol)

    t_w = schedule.write_window[1]
    t_r0, t_r1 = schedule.read_window
    n_sig = schedule.n_signal_photons(config.gamma)
    if n_sig <= 0:
        raise ValueError("the schedule carries no signal photons")

    stored = full.phonon_population_at(t_w) - ctrl.phonon_population_at(t_w)
    sel = (full.times >= schedule.write_center) & (full.times <= t_w)
    peak = float(np.max(np.abs(full.beta[sel]) ** 2 - np.abs(ctrl.beta[sel]) ** 2))
    retrieved = full.emitted_between(t_r0, t_r1, config.gamma) - ctrl.emitted_between(
        t_r0, t_r1, config.gamma
    )
    held = full.phonon_population_at(t_r0)
    if held <= 0:
        raise AnalyticsError("no phonons held at the start of the read window")
    return MeanFieldEfficiencies(
        eta_write=stored / n_sig,
        eta_read=retrieved / held,
        n_signal_photons=n_sig,
        stored_phonons=stored,
        stored_phonons_peak=peak,
        retrieved_photons=retrieved,
        control_only_phonons=ctrl.phonon_population_at(t_w),
        full=full,
        control_only=ctrl,
    )


# ---------------------------------------------------------------------------
# weak-drive excitation spectrum (adiabatic channel model)


def weak_drive_spectrum_analytic(
    config: SystemConfig,
    detunings: np.ndarray,
) -> tuple[SpectrumRecord, SpectrumRecord]:
    """Closed-form excitation-sweep curves from a phonon-channel decomposition.

    Model: absorption proceeds through displaced-oscillator channels n with
    Franck-Condon weights w_n = exp(-S) S^n / n!, S = (g0/omega_b)^2.  Channel
    n is a saturable Lorentzian centered at the polaron-shifted detuning
    g0^2/omega_b - n omega_b with width gamma + n kappa_b, evaluated with the
    common self-consistent static displacement of the phonon mode.  The phonon
    curve adds the coherent displacement |beta|^2 to the incoherent occupation
    from absorption into channel n (n phonons per arrival, S more per decay)
    balanced against kappa_b.

    Returns a pair of records (excited population, phonon population) on the
    given detuning grid.  Requires kappa_b > 0 when g0 > 0 since the
    incoherent phonon occupation is otherwise unbounded.
    """
    det = np.asarray(detunings, dtype=float)
    if det.ndim != 1 or det.size == 0:
        raise ValueError("detunings must be a non-empty 1-d array")
    ref = [t for t in config.tones if t.is_reference]
    if not ref or not isinstance(ref[0].envelope, CW):
        raise ValueError("the config needs one CW reference tone for the sweep")
    omega = abs(ref[0].amplitude)
    g0, wb, kb, gam = config.g0, config.omega_b, config.kappa_b, config.gamma
    if g0 > 0 and kb <= 0:
        raise AnalyticsError(
            "phonon occupation is unbounded at kappa_b = 0; give the mode a "
            "nonzero decay rate"
        )

    s_hr = (g0 / wb) ** 2
    n_max = max(4, min(config.cutoff, 12))
    ns = np.arange(n_max + 1)
    weights = np.exp(-s_hr) * s_hr**ns / np.array([math.factorial(int(n)) for n in ns])
    centers = g0**2 / wb - ns * wb
    widths = gam + ns * kb

    n_e = np.zeros_like(det)
    n_b = np.zeros_like(det)
    for i, d in enumerate(det):
        shift = 0.0
        pops = np.zeros(n_max + 1)
        for _ in range(500):
            delta_eff = d - centers + shift
            pops = weights * omega**2 / (
                delta_eff**2 + widths**2 / 4.0 + 2.0 * weights * omega**2
            )
            ne = float(pops.sum())
            if g0 == 0.0:
                new_shift = 0.0
            else:
                beta_dc = -1j * g0 * ne / (1j * wb + kb / 2.0)
                new_shift = g0 * 2.0 * beta_dc.real
            if abs(new_shift - shift) <= 1e-12:
                shift = new_shift
                break
            shift = new_shift
        else:
            raise AnalyticsError(
                f"displacement self-consistency did not settle at detuning {d:g}"
            )
        n_e[i] = pops.sum()
        if g0 > 0.0:
            beta_dc = -1j * g0 * n_e[i] / (1j * wb + kb / 2.0)
            n_b[i] = abs(beta_dc) ** 2 + (gam / kb) * float(((ns + s_hr) * pops).sum())

    meta = {
        "model": "adiabatic phonon channels",
        "omega": float(omega),
        "huang_rhys": float(s_hr),
        "n_channels": int(n_max + 1),
    }
    return (
        SpectrumRecord(omega=det, values=n_e, meta={**meta, "observable": "pop_e"}),
        SpectrumRecord(omega=det, values=n_b, meta={**meta, "observable": "pop_b"}),
    )


# ---------------------------------------------------------------------------
# retrieval versus storage delay


def retrieval_vs_delay(
    config: SystemConfig,
    schedule: MemorySchedule,
    delays: np.ndarray,
    mode: str = "fast",
) -> SpectrumRecord:
    """Retrieved photons as a function of write-to-read delay.

    ``fast`` runs the mean-field model once at the schedule's own delay and
    scales its retrieved photon number by exp(-kappa_b (delay - anchor)),
    which is exact for a memory whose only loss between the pulses is phonon
    decay.  ``full`` re-integrates the mean-field model per delay; each delay
    must then keep the write and read windows separated.
    """
    d_arr = np.asarray(delays, dtype=float)
    if d_arr.ndim != 1 or d_arr.size == 0:
        raise ValueError("delays must be a non-empty 1-d array")
    if np.any(d_arr < 0):
        raise ValueError("delays must be non-negative")

    base = meanfield_efficiencies(config, schedule)
    meta = {
        "mode": mode,
        "anchor_delay": schedule.storage_delay,
        "stored_phonons": base.stored_phonons,
        "eta_read_sim": base.eta_read,
        "kappa_b": config.kappa_b,
    }
    if mode == "fast":
        values = base.retrieved_photons * np.exp(
            -config.kappa_b * (d_arr - schedule.storage_delay)
        )
        return SpectrumRecord(omega=d_arr, values=values, meta=meta)
    if mode == "full":
        values = np.empty_like(d_arr)
        for i, d in enumerate(d_arr):
            sched_d = replace(schedule, storage_delay=float(d))
            values[i] = meanfield_efficiencies(config, sched_d).retrieved_photons
        return SpectrumRecord(omega=d_arr, values=values, meta=meta)
    raise ValueError(f"unknown mode {mode!r}; use 'fast' or 'full'")
