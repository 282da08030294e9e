"""Evolution layer, checked against independently assembled superoperators.

The hand-rolled Liouvillian below is built directly from the Lindblad form
with row-major vectorisation, sharing no code with the package's sparse
assembly, so agreement is a genuine cross-check rather than a tautology.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from molmech.dynamics import (
    CorrelationSeries,
    DynamicsError,
    MultiplicityError,
    ResolutionWarning,
    cutoff_convergence,
    default_tau_grid,
    evolve,
    liouvillian_matrix,
    make_generator,
    observable_row,
    spectrum_from_correlation,
    steady_state,
    two_time_correlation,
)
from molmech.hilbert import (
    DensityMatrix,
    basis_ket,
    displacement_operator,
    embed_pair,
    fock_ket,
    identity,
    ket_density,
    number_operator,
)
from molmech.model import (
    CW,
    DriveTone,
    GaussianPulse,
    SystemConfig,
    build_collapse_ops,
    build_hamiltonian,
    excited_projector_full,
    number_full,
    sigma_full,
)


def hand_rolled_liouvillian(h: np.ndarray, c_ops: list[np.ndarray]) -> np.ndarray:
    """Dense Lindblad superoperator for row-major vec(rho)."""
    d = h.shape[0]
    eye = np.eye(d)
    lio = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in c_ops:
        cd_c = c.conj().T @ c
        lio += (
            np.kron(c, c.conj())
            - 0.5 * np.kron(cd_c, eye)
            - 0.5 * np.kron(eye, cd_c.T)
        )
    return lio


def driven_config(**kw):
    tones = kw.pop("tones", None)
    base = dict(g0=0.4, omega_b=6.0, kappa_b=0.3, cutoff=3)
    base.update(kw)
    c = SystemConfig(**base)
    if tones is None:
        tones = (DriveTone(amplitude=0.8, detuning=0.0, is_reference=True),)
    return c.with_tones(tones)


# ---------------------------------------------------------------------------
# superoperator assembly


def test_liouvillian_matches_hand_rolled():
    c = driven_config()
    h = build_hamiltonian(c).mat
    c_ops = [op.mat for op in build_collapse_ops(c)]
    ours = liouvillian_matrix(h, c_ops).toarray()
    theirs = hand_rolled_liouvillian(h, c_ops)
    assert np.max(np.abs(ours - theirs)) < 1e-13


def test_observable_row_computes_trace():
    rng = np.random.default_rng(7)
    d = 6
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho_raw = m @ m.conj().T
    rho_raw = rho_raw / np.trace(rho_raw).real
    rho = DensityMatrix(rho_raw)
    a = rng.normal(size=(d, d))
    op = embed_pair(identity(2), number_operator(3)) + 0.0 * identity(d)
    # generic operator too
    from molmech.hilbert import QOperator

    gen_op = QOperator(a + 1j * rng.normal(size=(d, d)))
    for o in (op, gen_op):
        row = observable_row(o)
        assert row @ rho.mat.reshape(-1) == pytest.approx(
            complex(np.trace(o.mat @ rho.mat)), abs=1e-12
        )


def test_generator_hamiltonian_matches_builder():
    pulse = GaussianPulse(center=4.0, width=1.5)
    tones = (
        DriveTone(amplitude=0.6, detuning=0.0, envelope=pulse, is_reference=True),
        DriveTone(amplitude=0.9, detuning=6.0),
    )
    c = driven_config(tones=tones)
    gen = make_generator(c)
    assert not gen.is_time_independent
    for t in (0.0, 1.7, 4.0):
        assert np.allclose(
            gen.hamiltonian(t).mat, build_hamiltonian(c, t).mat, atol=1e-14
        )


# ---------------------------------------------------------------------------
# closed-form decay checks


def test_excited_state_decay_is_exponential():
    c = SystemConfig(g0=0.0, omega_b=5.0, kappa_b=0.0, cutoff=2)
    gen = make_generator(c)
    rho0 = ket_density(basis_ket(True, 0, c.dims), dims=c.dims)
    ts = np.linspace(0.0, 6.0, 25)
    traj = evolve(rho0, gen, ts, e_ops={"pop_e": excited_projector_full(c.dims)})
    assert np.allclose(traj.observables["pop_e"], np.exp(-ts), rtol=0, atol=1e-9)


def test_coherent_state_phonon_decay():
    alpha = 1.0
    kappa = 0.25
    n = 14
    c = SystemConfig(g0=0.0, omega_b=5.0, kappa_b=kappa, cutoff=n)
    gen = make_generator(c)
    psi = np.kron(np.array([1.0, 0.0]), displacement_operator(alpha, n).mat @ fock_ket(0, n))
    rho0 = ket_density(psi, dims=c.dims)
    ts = np.linspace(0.0, 8.0, 17)
    traj = evolve(rho0, gen, ts, e_ops={"pop_b": number_full(c.dims)})
    expect = abs(alpha) ** 2 * np.exp(-kappa * ts)
    assert np.allclose(traj.observables["pop_b"], expect, rtol=1e-7, atol=1e-10)


def test_thermalisation_approaches_bath_occupation():
    nth = 0.5
    kappa = 0.4
    c = SystemConfig(g0=0.0, omega_b=5.0, kappa_b=kappa, n_thermal=nth, cutoff=16)
    gen = make_generator(c)
    rho0 = ket_density(basis_ket(False, 0, c.dims), dims=c.dims)
    ts = np.linspace(0.0, 12.0, 13)
    traj = evolve(rho0, gen, ts, e_ops={"pop_b": number_full(c.dims)})
    expect = nth * (1.0 - np.exp(-kappa * ts))
    assert np.allclose(traj.observables["pop_b"], expect, rtol=1e-5, atol=1e-8)


# ---------------------------------------------------------------------------
# regression against dense matrix exponentials (small spaces)


@pytest.mark.parametrize("cutoff", [2, 3, 4])
def test_evolve_matches_dense_exponential(cutoff):
    c = driven_config(cutoff=cutoff)
    gen = make_generator(c)
    h = build_hamiltonian(c).mat
    lio = hand_rolled_liouvillian(h, [op.mat for op in build_collapse_ops(c)])
    rho0 = ket_density(basis_ket(True, 0, c.dims), dims=c.dims)
    ts = np.linspace(0.0, 4.0, 9)
    traj = evolve(rho0, gen, ts, rtol=1e-10, atol=1e-12, keep_states=True)
    for k, t in enumerate(ts):
        ref = (expm(lio * t) @ rho0.mat.reshape(-1)).reshape(rho0.mat.shape)
        assert np.max(np.abs(traj.states[k].mat - ref)) < 1e-9


def test_evolve_nonuniform_grid_matches_dense_exponential():
    # a non-uniform grid bypasses the exponential-stepping fast path, so this
    # exercises the adaptive integrator against the same dense reference
    c = driven_config(cutoff=3)
    gen = make_generator(c)
    h = build_hamiltonian(c).mat
    lio = hand_rolled_liouvillian(h, [op.mat for op in build_collapse_ops(c)])
    rho0 = ket_density(basis_ket(True, 1, c.dims), dims=c.dims)
    ts = np.array([0.0, 0.3, 1.0, 1.3, 2.9, 4.0])
    traj = evolve(rho0, gen, ts, rtol=1e-11, atol=1e-13, keep_states=True)
    for k, t in enumerate(ts):
        ref = (expm(lio * t) @ rho0.mat.reshape(-1)).reshape(rho0.mat.shape)
        assert np.max(np.abs(traj.states[k].mat - ref)) < 1e-9


def test_evolve_time_dependent_matches_stepped_exponential():
    # Gaussian-pulsed drive, checked against fine piecewise-constant stepping
    pulse = GaussianPulse(center=2.0, width=0.8)
    tones = (DriveTone(amplitude=0.7, detuning=0.0, envelope=pulse, is_reference=True),)
    c = driven_config(cutoff=3, tones=tones)
    gen = make_generator(c)
    c_mats = [op.mat for op in build_collapse_ops(c)]
    rho0 = ket_density(basis_ket(False, 0, c.dims), dims=c.dims)
    ts = np.linspace(0.0, 4.0, 5)
    traj = evolve(rho0, gen, ts, rtol=1e-11, atol=1e-13, keep_states=True)
    n_sub = 4000
    y = rho0.mat.reshape(-1).astype(complex)
    for k in range(1, len(ts)):
        grid = np.linspace(ts[k - 1], ts[k], n_sub + 1)
        dt = grid[1] - grid[0]
        for j in range(n_sub):
            tm = 0.5 * (grid[j] + grid[j + 1])
            lio = hand_rolled_liouvillian(build_hamiltonian(c, tm).mat, c_mats)
            y = expm(lio * dt) @ y
        diff = np.max(np.abs(traj.states[k].mat.reshape(-1) - y))
        assert diff < 1e-6  # midpoint stepping itself is O(dt^2) accurate


def test_correlation_matches_dense_exponential():
    c = driven_config(cutoff=2)
    gen = make_generator(c)
    rho_ss = steady_state(gen)
    sm = sigma_full(c.dims)
    taus = np.linspace(0.0, 6.0, 31)
    corr = two_time_correlation(gen, rho_ss, sm.dag(), sm, taus)
    h = build_hamiltonian(c).mat
    lio = hand_rolled_liouvillian(h, [op.mat for op in build_collapse_ops(c)])
    for k, tau in enumerate(taus):
        y = (expm(lio * tau) @ (sm.mat @ rho_ss.mat).reshape(-1)).reshape(h.shape)
        ref = complex(np.trace(sm.dag().mat @ y))
        assert abs(corr.values[k] - ref) < 1e-10


# ---------------------------------------------------------------------------
# steady states


def test_steady_state_two_level_resonance():
    c = SystemConfig(
        g0=0.0,
        omega_b=5.0,
        kappa_b=0.5,
        cutoff=2,
        tones=(DriveTone(amplitude=1.0, detuning=0.0, is_reference=True),),
    )
    rho = steady_state(make_generator(c))
    pe = float(np.real(np.trace(excited_projector_full(c.dims).mat @ rho.mat)))
    # saturation value Omega^2 / (Delta^2 + gamma^2/4 + 2 Omega^2) = 4/9
    assert pe == pytest.approx(4.0 / 9.0, abs=1e-10)


def test_steady_state_annihilated_by_hand_rolled_liouvillian():
    c = driven_config(cutoff=4, kappa_b=0.8)
    gen = make_generator(c)
    rho = steady_state(gen)
    h = build_hamiltonian(c).mat
    lio = hand_rolled_liouvillian(h, [op.mat for op in build_collapse_ops(c)])
    resid = np.linalg.norm(lio @ rho.mat.reshape(-1))
    assert resid < 1e-9 * np.linalg.norm(lio)
    assert np.trace(rho.mat).real == pytest.approx(1.0, abs=1e-12)


def test_steady_state_detects_degenerate_nullspace():
    # no phonon damping, no coupling, no drive: every phonon level is stable
    c = SystemConfig(g0=0.0, omega_b=5.0, kappa_b=0.0, cutoff=3)
    with pytest.raises(MultiplicityError):
        steady_state(make_generator(c))


def test_steady_state_rejects_time_dependent_generator():
    pulse = GaussianPulse(center=2.0, width=0.5)
    c = driven_config(
        tones=(DriveTone(amplitude=0.5, detuning=0.0, envelope=pulse, is_reference=True),)
    )
    with pytest.raises(ValueError):
        steady_state(make_generator(c))


# ---------------------------------------------------------------------------
# invariants under evolution (property-based)


@st.composite
def small_systems(draw):
    g0 = draw(st.floats(0.0, 2.0))
    omega_b = draw(st.floats(1.0, 10.0))
    kappa_b = draw(st.floats(0.0, 2.0))
    nth = draw(st.sampled_from([0.0, 0.0, 0.3]))
    amp = draw(st.floats(0.0, 1.5))
    det = draw(st.floats(-12.0, 12.0))
    pulsed = draw(st.booleans())
    env = GaussianPulse(center=1.5, width=0.7) if pulsed else CW()
    tone = DriveTone(amplitude=amp, detuning=det, envelope=env, is_reference=True)
    return SystemConfig(
        g0=g0, omega_b=omega_b, kappa_b=kappa_b, n_thermal=nth, cutoff=3, tones=(tone,)
    )


@settings(max_examples=20)
@given(config=small_systems(), excited=st.booleans())
def test_evolution_preserves_state_invariants(config, excited):
    gen = make_generator(config)
    rho0 = ket_density(basis_ket(excited, 0, config.dims), dims=config.dims)
    ts = np.linspace(0.0, 3.0, 7)
    traj = evolve(rho0, gen, ts, keep_states=True)
    # keep_states revalidates every sample through the DensityMatrix
    # constructor (trace, Hermiticity, positivity); the summaries must agree
    assert traj.trace_drift <= 1e-8
    assert traj.min_eigenvalue >= -1e-8
    for state in traj.states:
        assert abs(np.trace(state.mat) - 1.0) < 1e-8


# ---------------------------------------------------------------------------
# evolve input validation


def test_evolve_rejects_bad_grid():
    c = driven_config()
    gen = make_generator(c)
    rho0 = ket_density(basis_ket(False, 0, c.dims), dims=c.dims)
    with pytest.raises(ValueError):
        evolve(rho0, gen, [0.0])
    with pytest.raises(ValueError):
        evolve(rho0, gen, [0.0, 2.0, 1.0])


def test_evolve_rejects_dimension_mismatch():
    c = driven_config(cutoff=3)
    gen = make_generator(c)
    wrong = DensityMatrix(np.diag([1.0, 0.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        evolve(wrong, gen, np.linspace(0, 1, 3))


# ---------------------------------------------------------------------------
# correlation grids and spectra


def test_correlation_grid_validation():
    c = driven_config(cutoff=2)
    gen = make_generator(c)
    rho = steady_state(gen)
    sm = sigma_full(c.dims)
    with pytest.raises(ValueError):
        two_time_correlation(gen, rho, sm.dag(), sm, np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        two_time_correlation(gen, rho, sm.dag(), sm, np.array([0.0, 0.2, 0.1]))
    with pytest.raises(ValueError):
        two_time_correlation(gen, rho, sm.dag(), sm, np.array([0.0]))


def test_default_tau_grid_spans():
    g = default_tau_grid(1.6)
    assert g[0] == 0.0 and len(g) == 2**15
    assert g[-1] == pytest.approx(40.0)  # floor engages for fast phonon decay
    assert default_tau_grid(1e-3)[-1] == pytest.approx(1e4)
    assert default_tau_grid(1.6e-6)[-1] == pytest.approx(2e4)  # cap
    assert default_tau_grid(0.0)[-1] == pytest.approx(2e4)


def test_spectrum_single_mode_closed_form():
    gamma = 1.0
    omega0 = 3.0
    rate = -gamma / 2.0 + 1j * omega0
    taus = np.linspace(0.0, 40.0, 2048)
    corr = CorrelationSeries(
        taus=taus,
        values=np.exp(rate * taus),
        mode_coeffs=np.array([1.0 + 0j]),
        mode_rates=np.array([rate]),
    )
    omega = np.linspace(-20.0, 26.0, 4001)
    rec = spectrum_from_correlation(corr, omega, subtract_coherent=False)
    expect = gamma / ((gamma / 2.0) ** 2 + (omega - omega0) ** 2)
    assert rec.meta["route"] == "modes"
    assert np.allclose(rec.values, expect, rtol=1e-10, atol=1e-12)
    k = int(np.argmax(rec.values))
    assert omega[k] == pytest.approx(omega0, abs=omega[1] - omega[0])
    assert rec.values[k] == pytest.approx(4.0 / gamma, rel=1e-4)


def test_spectrum_sampled_route_agrees_with_modes():
    gamma = 1.0
    omega0 = 3.0
    rate = -gamma / 2.0 + 1j * omega0
    taus = np.linspace(0.0, 60.0, 2**14)
    vals = np.exp(rate * taus)
    with_modes = CorrelationSeries(
        taus=taus, values=vals, mode_coeffs=np.array([1.0 + 0j]), mode_rates=np.array([rate])
    )
    sampled = CorrelationSeries(taus=taus, values=vals)
    omega = np.linspace(-5.0, 11.0, 801)
    ra = spectrum_from_correlation(with_modes, omega, subtract_coherent=False)
    rb = spectrum_from_correlation(sampled, omega, subtract_coherent=False)
    assert rb.meta["route"] != "modes"
    # sampled route interpolates C(tau) linearly: O(h^2) error, ~3e-4 here
    assert np.allclose(ra.values, rb.values, rtol=1e-3, atol=1e-4)


def test_spectrum_parseval_normalisation():
    gamma = 1.0
    rate = -gamma / 2.0 + 1j * 3.0
    taus = np.linspace(0.0, 50.0, 1024)
    corr = CorrelationSeries(
        taus=taus,
        values=np.exp(rate * taus),
        mode_coeffs=np.array([1.0 + 0j]),
        mode_rates=np.array([rate]),
    )
    omega = np.linspace(-400.0, 406.0, 2**17)
    rec = spectrum_from_correlation(corr, omega, subtract_coherent=False)
    integral = np.trapezoid(rec.values, omega) / (2.0 * math.pi)
    assert integral == pytest.approx(1.0, rel=2e-3)  # C(0) = 1


def test_spectrum_coherent_subtraction():
    gamma = 1.0
    rate = -gamma / 2.0 + 1j * 3.0
    taus = np.linspace(0.0, 60.0, 2**13)
    plateau = 0.3
    vals = np.exp(rate * taus) + plateau
    with_modes = CorrelationSeries(
        taus=taus,
        values=vals,
        mode_coeffs=np.array([1.0 + 0j, plateau]),
        mode_rates=np.array([rate, 0.0 + 0j]),
    )
    sampled = CorrelationSeries(taus=taus, values=vals)
    omega = np.linspace(-5.0, 11.0, 401)
    expect = gamma / ((gamma / 2.0) ** 2 + (omega - 3.0) ** 2)
    ra = spectrum_from_correlation(with_modes, omega, subtract_coherent=True)
    rb = spectrum_from_correlation(sampled, omega, subtract_coherent=True)
    assert np.allclose(ra.values, expect, rtol=1e-9, atol=1e-11)
    assert np.allclose(rb.values, expect, rtol=4e-3, atol=1e-3)


def test_spectrum_rejects_growing_modes():
    taus = np.linspace(0.0, 10.0, 64)
    corr = CorrelationSeries(
        taus=taus,
        values=np.exp(0.1 * taus).astype(complex),
        mode_coeffs=np.array([1.0 + 0j]),
        mode_rates=np.array([0.1 + 0j]),
    )
    with pytest.raises(DynamicsError):
        spectrum_from_correlation(corr, np.linspace(-1, 1, 11))


def test_spectrum_warns_on_undecayed_series():
    taus = np.linspace(0.0, 5.0, 256)
    corr = CorrelationSeries(taus=taus, values=np.exp((-0.01 + 1j) * taus))
    with pytest.warns(ResolutionWarning):
        spectrum_from_correlation(corr, np.linspace(-2, 2, 11), subtract_coherent=False)


# ---------------------------------------------------------------------------
# cutoff convergence harness


def test_cutoff_convergence_report():
    def run(n):
        return {"a": 1.0 + (0.1 if n == 2 else 0.0), "b": 2.0}

    with pytest.warns(Warning):
        rep = cutoff_convergence(run, 2, threshold=1e-3)
    assert not rep.converged
    assert rep.cutoff_doubled == 4
    assert rep.per_observable["a"] == pytest.approx(0.1 / 1.1)
    assert rep.per_observable["b"] == 0.0

    rep2 = cutoff_convergence(lambda n: {"a": 5.0}, 2, threshold=1e-3)
    assert rep2.converged and rep2.max_rel_change == 0.0
