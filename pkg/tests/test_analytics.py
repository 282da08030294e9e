"""Closed-form memory theory and the mean-field companion model."""

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molmech.analytics import (
    AnalyticsError,
    SaturationWarning,
    calibrated_schedule,
    control_amp_for_constant,
    eta_read,
    eta_write,
    eta_write_max,
    meanfield_efficiencies,
    meanfield_memory,
    memory_constant,
    retrieval_vs_delay,
    signal_amp_for_photons,
    weak_drive_spectrum_analytic,
)
from molmech.analytics import _mf_rhs
from molmech.model import CW, DriveTone, MemorySchedule, SystemConfig

SQRT_PI_HALF = math.sqrt(math.pi / 2.0)


def memory_config(**kw):
    base = dict(g0=1.0, omega_b=177.15, kappa_b=1.6e-6, cutoff=4)
    base.update(kw)
    return SystemConfig(**base)


def short_schedule(config, width=200.0):
    return calibrated_schedule(config, pulse_width=width, storage_delay=8.0 * width)


# ---------------------------------------------------------------------------
# closed-form efficiency curves


def test_write_efficiency_reference_values():
    assert eta_write(1.0) == pytest.approx(0.40726343, abs=1e-7)
    assert eta_write(0.0849) == pytest.approx(0.095756, abs=2e-6)
    assert eta_write(0.0) == 0.0


def test_read_efficiency_reference_values():
    assert eta_read(1.566) == pytest.approx(0.859520, abs=1e-6)
    assert eta_read(0.0) == 0.0
    # strong read pulses retrieve everything
    assert eta_read(50.0) == pytest.approx(1.0, abs=1e-12)
    assert eta_read(1e4) == 1.0


def test_read_efficiency_small_pulse_slope():
    # eta_read ~ sqrt(pi/2) M as M -> 0
    m = 1e-6
    assert eta_read(m) / m == pytest.approx(SQRT_PI_HALF, rel=1e-5)


def test_write_optimum():
    opt = eta_write_max()
    assert opt.M_star == pytest.approx(1.002487, abs=1e-4)
    assert opt.eta_star == pytest.approx(0.4072644, abs=1e-6)


def test_efficiencies_vectorize():
    m = np.array([0.0, 1.0, 2.0])
    w = eta_write(m)
    r = eta_read(m)
    assert w.shape == (3,) and r.shape == (3,)
    assert w[0] == 0.0 and r[0] == 0.0
    assert w[1] == pytest.approx(eta_write(1.0))
    assert r[2] == pytest.approx(eta_read(2.0))


def test_efficiencies_reject_negative_constant():
    with pytest.raises(ValueError):
        eta_write(-0.1)
    with pytest.raises(ValueError):
        eta_read(np.array([0.5, -0.5]))


@given(m=st.floats(0.0, 50.0, allow_nan=False))
def test_efficiency_bounds(m):
    opt_plus = 0.4072644 + 1e-7
    assert 0.0 <= eta_write(m) <= opt_plus
    assert 0.0 <= eta_read(m) < 1.0 + 1e-15


# ---------------------------------------------------------------------------
# pulse-area constant and calibrations


def test_memory_constant_reference_value():
    assert memory_constant(1.0, 1.0, 1331.9468) == pytest.approx(0.08488503, rel=1e-6)


@given(
    lam=st.floats(0.1, 5.0, allow_nan=False),
    g0=st.floats(0.05, 3.0, allow_nan=False),
    omega=st.floats(0.05, 4.0, allow_nan=False),
    tau=st.floats(1.0, 5e3, allow_nan=False),
)
def test_memory_constant_quadratic_in_coupling_and_amplitude(lam, g0, omega, tau):
    base = memory_constant(g0, omega, tau)
    assert memory_constant(lam * g0, omega, tau) == pytest.approx(
        lam**2 * base, rel=1e-12
    )
    assert memory_constant(g0, lam * omega, tau) == pytest.approx(
        lam**2 * base, rel=1e-12
    )
    assert memory_constant(g0, omega, lam * tau) == pytest.approx(lam * base, rel=1e-12)


@given(
    m=st.floats(1e-4, 5.0, allow_nan=False),
    g0=st.floats(0.05, 3.0, allow_nan=False),
    tau=st.floats(1.0, 5e3, allow_nan=False),
    wb=st.floats(1.0, 300.0, allow_nan=False),
)
def test_control_amp_inverts_memory_constant(m, g0, tau, wb):
    amp = control_amp_for_constant(m, g0, tau, omega_b=wb)
    assert memory_constant(g0, amp, tau, omega_b=wb) == pytest.approx(m, rel=1e-12)


@given(n=st.floats(1e-6, 2.0, allow_nan=False), tau=st.floats(1.0, 5e3, allow_nan=False))
def test_signal_amp_inverts_photon_count(n, tau):
    amp = signal_amp_for_photons(n, tau)
    assert amp**2 * tau * SQRT_PI_HALF == pytest.approx(n, rel=1e-12)


def test_calibrated_schedule_geometry_and_amplitudes():
    config = memory_config()
    sched = calibrated_schedule(config, pulse_width=100.0)
    assert sched.write_center == 400.0
    assert sched.storage_delay == 700.0
    assert sched.n_signal_photons() == pytest.approx(0.04, rel=1e-12)
    assert memory_constant(
        config.g0, sched.control_write_amp, 100.0, omega_b=config.omega_b
    ) == pytest.approx(1.0, rel=1e-12)
    assert memory_constant(
        config.g0, sched.control_read_amp, 100.0, omega_b=config.omega_b
    ) == pytest.approx(1.57, rel=1e-12)


def test_calibration_input_validation():
    with pytest.raises(ValueError):
        control_amp_for_constant(-1.0, 1.0, 10.0)
    with pytest.raises(ValueError):
        control_amp_for_constant(1.0, 0.0, 10.0)
    with pytest.raises(ValueError):
        signal_amp_for_photons(-0.1, 10.0)
    with pytest.raises(ValueError):
        memory_constant(1.0, 1.0, 0.0)


# ---------------------------------------------------------------------------
# mean-field model


@given(
    g0=st.floats(0.1, 3.0, allow_nan=False),
    wb=st.floats(5.0, 200.0, allow_nan=False),
    kb=st.floats(1e-6, 2.0, allow_nan=False),
    t=st.floats(0.0, 10.0, allow_nan=False),
    s_re=st.floats(-0.7, 0.7, allow_nan=False),
    s_im=st.floats(-0.7, 0.7, allow_nan=False),
)
def test_meanfield_displacement_fixed_point(g0, wb, kb, t, s_re, s_im):
    # with no drive and the coherence held fixed, the phonon amplitude
    # -i g0 |s|^2 / (i omega_b + kappa_b/2) must be stationary
    s = s_re + 1j * s_im
    sn = abs(s) ** 2
    beta_star = -1j * g0 * sn / (1j * wb + kb / 2.0)
    bt = beta_star * cmath.exp(1j * wb * t)
    empty_c = np.zeros(0, dtype=np.complex128)
    empty_f = np.zeros(0, dtype=np.float64)
    empty_i = np.zeros(0, dtype=np.int64)
    _, dbt, _ = _mf_rhs(
        t, s, bt, 0.0, 1.0, g0, wb, kb, empty_c, empty_f, empty_i, empty_f, empty_f, False
    )
    dbeta = (dbt - 1j * wb * bt) * cmath.exp(-1j * wb * t)
    assert abs(dbeta) <= 1e-10 * max(1.0, g0 * sn)


def test_meanfield_smoke_regression():
    config = memory_config()
    sched = short_schedule(config)
    traj = meanfield_memory(config, sched)
    assert traj.max_abs_s == pytest.approx(0.07196083265254635, rel=1e-8)
    assert not traj.saturated


def test_meanfield_saturation_flag_reduces_response():
    config = memory_config()
    sched = short_schedule(config)
    traj = meanfield_memory(config, sched, saturation=True)
    assert traj.max_abs_s == pytest.approx(0.06690919679039531, rel=1e-8)
    assert traj.max_abs_s < 0.07196083265254635


def test_meanfield_rejects_above_unity_coherence():
    config = memory_config()
    sched = MemorySchedule(
        pulse_width=40.0,
        write_center=160.0,
        storage_delay=280.0,
        signal_amp=3.0,
        control_write_amp=0.0,
        control_read_amp=0.0,
    )
    with pytest.raises(AnalyticsError):
        meanfield_memory(config, sched)


def test_meanfield_warns_when_saturated():
    config = memory_config()
    sched = MemorySchedule(
        pulse_width=40.0,
        write_center=160.0,
        storage_delay=280.0,
        signal_amp=0.25,
        control_write_amp=0.0,
        control_read_amp=0.0,
    )
    with pytest.warns(SaturationWarning):
        traj = meanfield_memory(config, sched)
    assert 0.3 < traj.max_abs_s <= 1.0
    assert traj.saturated


def test_meanfield_efficiencies_phase_invariance():
    from dataclasses import replace

    config = memory_config()
    sched = short_schedule(config, width=60.0)
    ref = meanfield_efficiencies(config, sched)
    rot = replace(sched, signal_amp=sched.signal_amp * cmath.exp(0.83j))
    out = meanfield_efficiencies(config, rot)
    assert out.eta_write == pytest.approx(ref.eta_write, rel=1e-9)
    assert out.eta_read == pytest.approx(ref.eta_read, rel=1e-9)


def test_meanfield_efficiencies_grow_with_coupling():
    sched = short_schedule(memory_config(), width=60.0)
    etas = [
        meanfield_efficiencies(memory_config(g0=g), sched).eta_write
        for g in (0.5, 1.0)
    ]
    assert etas[0] < etas[1]


def test_meanfield_efficiencies_reject_zero_signal():
    config = memory_config()
    sched = short_schedule(config)
    from dataclasses import replace

    with pytest.raises(ValueError):
        meanfield_efficiencies(config, replace(sched, signal_amp=0j))


def test_meanfield_trajectory_bookkeeping():
    config = memory_config()
    sched = short_schedule(config, width=60.0)
    traj = meanfield_memory(config, sched)
    # emitted photons accumulate monotonically
    assert np.all(np.diff(traj.emitted) >= -1e-15)
    total = traj.emitted_between(0.0, traj.times[-1])
    assert total >= 0.0
    k = int(np.argmin(np.abs(traj.times - sched.write_center)))
    assert traj.phonon_population_at(sched.write_center) == pytest.approx(
        abs(traj.beta[k]) ** 2
    )
    state = traj.state_at(sched.write_center)
    assert state.time == traj.times[k]


# ---------------------------------------------------------------------------
# analytic excitation spectrum against the exact solver


def test_analytic_spectrum_reduces_to_two_level_at_zero_coupling():
    tone = DriveTone(amplitude=1.0, detuning=0.0, envelope=CW(), is_reference=True)
    config = SystemConfig(g0=0.0, omega_b=177.15, kappa_b=1.6, cutoff=4, tones=(tone,))
    det = np.linspace(-6.0, 6.0, 41)
    pe_rec, pb_rec = weak_drive_spectrum_analytic(config, det)
    expect = 1.0 / (det**2 + 0.25 + 2.0)
    assert np.allclose(pe_rec.values, expect, rtol=1e-12, atol=1e-15)
    assert np.allclose(pb_rec.values, 0.0, atol=1e-15)
    assert pe_rec.values[20] == pytest.approx(4.0 / 9.0, rel=1e-12)


def test_analytic_spectrum_quadratic_in_weak_drive():
    det = np.array([-177.15, -2.0, 0.0, 3.0])
    curves = {}
    for omega in (1e-3, 2e-3):
        tone = DriveTone(amplitude=omega, detuning=0.0, envelope=CW(), is_reference=True)
        config = SystemConfig(
            g0=1.0, omega_b=177.15, kappa_b=1.6e-3, cutoff=6, tones=(tone,)
        )
        pe, _ = weak_drive_spectrum_analytic(config, det)
        curves[omega] = pe.values
    assert np.allclose(curves[2e-3] / curves[1e-3], 4.0, rtol=1e-4)


def test_analytic_spectrum_validation():
    tone = DriveTone(amplitude=1.0, detuning=0.0, envelope=CW(), is_reference=True)
    config = SystemConfig(g0=1.0, omega_b=177.15, kappa_b=0.0, cutoff=4, tones=(tone,))
    with pytest.raises(AnalyticsError):
        weak_drive_spectrum_analytic(config, np.linspace(-1, 1, 5))
    no_tone = SystemConfig(g0=1.0, omega_b=177.15, kappa_b=1.6e-3, cutoff=4)
    with pytest.raises(ValueError):
        weak_drive_spectrum_analytic(no_tone, np.linspace(-1, 1, 5))
    with pytest.raises(ValueError):
        weak_drive_spectrum_analytic(config, np.zeros((2, 2)))


def test_analytic_spectrum_sideband_agrees_with_exact_solver():
    """Peak position to gamma/2, width to 50%, height to a factor of 2."""
    from molmech.dynamics import make_generator, steady_state
    from molmech.experiments import find_peaks
    from molmech.hilbert import expectation
    from molmech.model import excited_projector_full

    wb = 177.15
    tone = DriveTone(amplitude=1.0, detuning=0.0, envelope=CW(), is_reference=True)

    def exact_pe(delta):
        cfg = SystemConfig(
            g0=1.0,
            omega_b=wb,
            kappa_b=1e-3,
            cutoff=12,
            tones=(DriveTone(amplitude=1.0, detuning=delta, envelope=CW(), is_reference=True),),
        )
        rho = steady_state(make_generator(cfg))
        return expectation(rho, excited_projector_full(cfg.dims))

    config = SystemConfig(g0=1.0, omega_b=wb, kappa_b=1e-3, cutoff=12, tones=(tone,))
    fine = np.linspace(-wb - 2.5, -wb + 2.5, 301)
    pe_an, _ = weak_drive_spectrum_analytic(config, fine)
    peaks_an = find_peaks(fine, pe_an.values)
    assert peaks_an, "analytic sideband peak not found"
    pk_an = max(peaks_an, key=lambda p: p.height)

    coarse = np.linspace(-wb - 2.0, -wb + 2.0, 13)
    pe_num = np.array([exact_pe(d) for d in coarse])
    peaks_num = find_peaks(coarse, pe_num)
    assert peaks_num, "numeric sideband peak not found"
    pk_num = max(peaks_num, key=lambda p: p.height)

    assert abs(pk_an.position - pk_num.position) <= 0.5
    assert 0.5 <= pk_an.fwhm / pk_num.fwhm <= 1.5
    assert 0.5 <= pk_an.height / pk_num.height <= 2.0


# ---------------------------------------------------------------------------
# retrieval versus delay


def test_retrieval_vs_delay_fast_mode_scaling():
    config = memory_config(kappa_b=1e-3)
    sched = short_schedule(config, width=60.0)
    delays = np.array([sched.storage_delay, sched.storage_delay + 400.0, 2000.0])
    rec = retrieval_vs_delay(config, sched, delays, mode="fast")
    assert rec.meta["mode"] == "fast"
    assert rec.meta["anchor_delay"] == sched.storage_delay
    assert rec.meta["kappa_b"] == 1e-3
    # exact exponential by construction
    expect_ratio = math.exp(-1e-3 * 400.0)
    assert rec.values[1] / rec.values[0] == pytest.approx(expect_ratio, rel=1e-12)
    assert np.all(rec.values > 0.0)
    assert rec.values[0] > rec.values[2]  # longer storage loses more


def test_retrieval_vs_delay_full_mode_matches_fast_at_anchor():
    config = memory_config(kappa_b=1e-3)
    sched = short_schedule(config, width=60.0)
    delays = np.array([sched.storage_delay])
    fast = retrieval_vs_delay(config, sched, delays, mode="fast")
    full = retrieval_vs_delay(config, sched, delays, mode="full")
    assert full.values[0] == pytest.approx(fast.values[0], rel=1e-9)


def test_retrieval_vs_delay_validation():
    config = memory_config()
    sched = short_schedule(config, width=60.0)
    with pytest.raises(ValueError):
        retrieval_vs_delay(config, sched, np.array([-1.0]))
    with pytest.raises(ValueError):
        retrieval_vs_delay(config, sched, np.array([500.0]), mode="bogus")
