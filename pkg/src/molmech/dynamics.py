"""Lindblad dynamics engine: Liouvillians, steady states, trajectories,
two-time correlations and emission spectra.

The master equation is

    drho/dt = -i[H(t), rho] + sum_k ( C_k rho C_k+ - 1/2 {C_k+ C_k, rho} )

with H(t) from :mod:`molmech.model`.  Density matrices are vectorised
row-major (C order): vec(rho)[i*d + j] = rho[i, j], so vec(A rho B) =
(A kron B^T) vec(rho).  Superoperators are assembled sparse and densified
only where an algorithm needs it (matrix exponentials, eigendecompositions).

Steady states come from a direct sparse solve of L x = 0 with one row of L
replaced by the trace constraint.  Two-time correlations use the quantum
regression theorem, C(tau) = Tr[A e^{L tau}(B rho_ss)], evaluated through an
eigendecomposition of L; the correlation series carries its exponential-mode
data so the spectrum transform can be done in closed form instead of by
quadrature (a sampled series is transformed with an oscillation-exact
piecewise-linear rule instead).

The emission spectrum convention is the emission-side Wiener-Khinchin
transform

    S(omega) = 2 Re Integral_0^inf C(tau) exp(-i (omega - omega_ref) tau) dtau,

which for a freely decaying dipole detuned by Delta from the frame reference
puts the line at omega - omega_ref = Delta; red-shifted (phonon Stokes)
emission therefore appears at negative abscissa.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .hilbert import DensityMatrix, QOperator, SpaceDims
from .model import (
    CW,
    DriveFieldTerm,
    SystemConfig,
    build_collapse_ops,
    drive_field_terms,
    sigma_full,
    static_hamiltonian,
)

__all__ = [
    "Generator",
    "Trajectory",
    "CorrelationSeries",
    "SpectrumRecord",
    "ConvergenceReport",
    "DynamicsError",
    "StiffnessError",
    "PositivityError",
    "TraceDriftError",
    "MultiplicityError",
    "CutoffConvergenceWarning",
    "ResolutionWarning",
    "make_generator",
    "liouvillian_matrix",
    "observable_row",
    "steady_state",
    "evolve",
    "two_time_correlation",
    "spectrum_from_correlation",
    "default_tau_grid",
    "cutoff_convergence",
]

TRACE_DRIFT_TOL = 1e-8
POSITIVITY_ABORT = -1e-6
STEADY_RESIDUAL_RTOL = 1e-10
EIG_PATH_MAX_DIM = 2600  # largest d^2 for which dense eigendecomposition is used


class DynamicsError(RuntimeError):
    """Base class for integration/solver failures."""


class StiffnessError(DynamicsError):
    """Adaptive integrator step-size collapse."""


class PositivityError(DynamicsError):
    """State spectrum dipped below the monitored floor."""


class TraceDriftError(DynamicsError):
    """Trace left the 1e-8 band during integration."""


class MultiplicityError(DynamicsError):
    """The Liouvillian null space is degenerate (no unique steady state)."""


class CutoffConvergenceWarning(UserWarning):
    """Doubling the Fock cutoff moved a reported observable by more than the
    threshold; results may sit in a non-convergent (e.g. self-oscillating)
    regime."""


class ResolutionWarning(UserWarning):
    """A sampled correlation was not decayed at the end of its tau span."""


# ---------------------------------------------------------------------------
# generator


@dataclass
class Generator:
    """Master-equation generator: static Hamiltonian, drive terms, collapses.

    Drive terms stored here are the genuinely time-dependent ones; static CW
    contributions are folded into ``h_static`` by :func:`make_generator`.
    """

    h_static: QOperator
    drives: tuple[DriveFieldTerm, ...]
    collapse_ops: tuple[QOperator, ...]
    dims: SpaceDims
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def is_time_independent(self) -> bool:
        return len(self.drives) == 0

    def drive_field(self, t):
        """Total complex drive field f(t) multiplying sigma+ in H."""
        if not self.drives:
            return np.zeros_like(np.asarray(t, dtype=float), dtype=complex)
        return sum(term.field(t) for term in self.drives)

    def hamiltonian(self, t: float = 0.0) -> QOperator:
        h = self.h_static.mat.copy()
        if self.drives:
            f = complex(self.drive_field(t))
            spm = sigma_full(self.dims).mat
            h += f * spm.conj().T + np.conj(f) * spm
        return QOperator(h, dims=self.dims, herm=True)

    def liouvillian_static(self) -> sp.csr_matrix:
        """Superoperator of the drive-free part (cached)."""
        if "L0" not in self._cache:
            self._cache["L0"] = liouvillian_matrix(
                self.h_static.mat, [c.mat for c in self.collapse_ops]
            )
        return self._cache["L0"]

    def drive_superops(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """(K+, K-) with dL(t) = f(t) K+ + conj(f(t)) K-.

        K+ is the commutator superoperator of sigma+ and K- of sigma, so a
        drive f(t) sigma+ + h.c. enters the master equation as stated.
        """
        if "Kpm" not in self._cache:
            d = self.dims.total
            eye = sp.identity(d, format="csr", dtype=complex)
            spm = sp.csr_matrix(sigma_full(self.dims).mat)
            spp = sp.csr_matrix(sigma_full(self.dims).mat.conj().T)
            kp = -1j * (sp.kron(spp, eye, format="csr") - sp.kron(eye, spp.T, format="csr"))
            km = -1j * (sp.kron(spm, eye, format="csr") - sp.kron(eye, spm.T, format="csr"))
            self._cache["Kpm"] = (kp.tocsr(), km.tocsr())
        return self._cache["Kpm"]


def make_generator(config: SystemConfig) -> Generator:
    """Build the generator for a config, folding static tones into H."""
    h = static_hamiltonian(config).mat.copy()
    spm = sigma_full(config.dims).mat
    dynamic: list[DriveFieldTerm] = []
    for term in drive_field_terms(config):
        if term.is_static:
            h += term.amplitude * spm.conj().T + np.conj(term.amplitude) * spm
        else:
            dynamic.append(term)
    return Generator(
        h_static=QOperator(h, dims=config.dims, herm=True),
        drives=tuple(dynamic),
        collapse_ops=tuple(build_collapse_ops(config)),
        dims=config.dims,
    )


def liouvillian_matrix(h: np.ndarray, c_ops: list[np.ndarray]) -> sp.csr_matrix:
    """Sparse Lindblad superoperator for Hamiltonian h and collapse list."""
    d = h.shape[0]
    eye = sp.identity(d, format="csr", dtype=complex)
    hs = sp.csr_matrix(h)
    lio = -1j * (sp.kron(hs, eye, format="csr") - sp.kron(eye, hs.T, format="csr"))
    for c in c_ops:
        cs = sp.csr_matrix(c)
        cdc = (cs.conj().T @ cs).tocsr()
        lio = lio + (
            sp.kron(cs, cs.conj(), format="csr")
            - 0.5 * sp.kron(cdc, eye, format="csr")
            - 0.5 * sp.kron(eye, cdc.T, format="csr")
        )
    return lio.tocsr()


def observable_row(op: QOperator) -> np.ndarray:
    """Row vector w with Tr(O rho) = w . vec(rho) (row-major vec)."""
    return np.ascontiguousarray(op.mat.T).reshape(-1)


def _liouvillian_norm(lio: sp.spmatrix) -> float:
    """Max-row-sum norm, the scale used in residual acceptance tests."""
    return float(np.max(np.abs(lio).sum(axis=1)))


# ---------------------------------------------------------------------------
# steady state


def steady_state(gen: Generator) -> DensityMatrix:
    """Unique steady state of a time-independent generator.

    Solves L x = 0 with the first row of L replaced by the trace constraint
    (direct sparse factorisation), verifies the residual against
    ||L rho|| <= 1e-10 ||L||, and falls back to a dense nullspace computation
    if the direct solve is unsatisfactory.  A degenerate nullspace raises
    :class:`MultiplicityError`.
    """
    if not gen.is_time_independent:
        raise ValueError(
            "steady_state requires a time-independent generator; "
            "fold CW tones into the frame or use evolve() for pulsed dynamics"
        )
    lio = gen.liouvillian_static()
    d = gen.dims.total
    d2 = d * d
    trace_row = sp.csr_matrix(
        (np.ones(d), (np.zeros(d, dtype=int), np.arange(d) * (d + 1))), shape=(1, d2)
    )
    a = sp.vstack([trace_row, lio[1:]], format="csc")
    b = np.zeros(d2, dtype=complex)
    b[0] = 1.0
    lnorm = _liouvillian_norm(lio)
    x = None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", sp.linalg.MatrixRankWarning)
            x = sp.linalg.spsolve(a, b)
    except (sp.linalg.MatrixRankWarning, RuntimeError):
        x = None
    if x is not None and not np.all(np.isfinite(x)):
        x = None
    if x is not None:
        resid = float(np.linalg.norm(lio @ x))
        if resid > STEADY_RESIDUAL_RTOL * max(lnorm, 1.0):
            x = None
    if x is None:
        x = _steady_state_nullspace(lio, d)
    rho = x.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return DensityMatrix(rho, dims=gen.dims)


def _steady_state_nullspace(lio: sp.csr_matrix, d: int) -> np.ndarray:
    """Dense SVD nullspace: detects degeneracy, returns trace-normalised x."""
    d2 = d * d
    if d2 > 4096:
        raise DynamicsError(
            f"direct solve failed and dense fallback is too large (dim {d2})"
        )
    dense = lio.toarray()
    _, svals, vh = np.linalg.svd(dense)
    tol = max(svals[0], 1.0) * 1e-12
    null_count = int(np.sum(svals < tol))
    if null_count == 0:
        raise DynamicsError(
            f"no numerical nullspace found (smallest singular value {svals[-1]:.3e})"
        )
    if null_count > 1:
        raise MultiplicityError(
            f"steady state not unique: nullspace dimension {null_count}"
        )
    x = vh[-1].conj()
    tr = x.reshape(d, d).trace()
    if abs(tr) < 1e-12:
        raise DynamicsError("nullspace vector is traceless; cannot normalise")
    return x / tr


# ---------------------------------------------------------------------------
# time evolution


@dataclass
class Trajectory:
    """Sampled master-equation trajectory.

    ``observables`` maps names to real arrays on ``times``; ``trace_drift``
    and ``min_eigenvalue`` summarise the monitored (not enforced) invariants.
    """

    times: np.ndarray
    observables: dict[str, np.ndarray]
    trace_drift: float
    min_eigenvalue: float
    states: list[DensityMatrix] | None = None


def _is_projector_like(op: QOperator) -> bool:
    if not op.herm:
        return False
    m = op.mat
    return float(np.max(np.abs(m @ m - m))) < 1e-10


def _check_samples(
    times: np.ndarray,
    mats: list[np.ndarray],
    e_ops: dict[str, QOperator],
) -> tuple[dict[str, np.ndarray], float, float]:
    nt = len(times)
    obs = {name: np.empty(nt) for name in e_ops}
    rows = {name: observable_row(op) for name, op in e_ops.items()}
    proj = {name: _is_projector_like(op) for name, op in e_ops.items()}
    drift = 0.0
    lowest = np.inf
    for k, m in enumerate(mats):
        tr = m.trace()
        drift = max(drift, abs(tr - 1.0))
        lo = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
        if lo < POSITIVITY_ABORT:
            raise PositivityError(
                f"state eigenvalue {lo:.3e} below {POSITIVITY_ABORT} at t = {times[k]:.6g}"
            )
        lowest = min(lowest, lo)
        v = m.reshape(-1)
        for name in e_ops:
            z = complex(rows[name] @ v)
            if e_ops[name].herm and abs(z.imag) > 1e-7 * max(1.0, abs(z)):
                raise DynamicsError(
                    f"Hermitian observable '{name}' returned imaginary part {z.imag:.3e}"
                )
            obs[name][k] = z.real
            if proj[name] and not (-1e-8 <= z.real <= 1.0 + 1e-8):
                raise DynamicsError(
                    f"population observable '{name}' = {z.real!r} outside [0, 1] "
                    f"band at t = {times[k]:.6g}; integration inaccurate"
                )
    if drift > TRACE_DRIFT_TOL:
        raise TraceDriftError(f"trace drifted by {drift:.3e} (tolerance {TRACE_DRIFT_TOL})")
    return obs, drift, (0.0 if lowest is np.inf else float(lowest))


def evolve(
    rho0: DensityMatrix,
    gen: Generator,
    t_grid,
    e_ops: dict[str, QOperator] | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    keep_states: bool = False,
) -> Trajectory:
    """Integrate the master equation on a sample grid.

    Uses an adaptive explicit Runge-Kutta pair (DOP853) on the vectorised
    equation; a time-independent generator on a uniform grid takes a
    matrix-exponential stepping fast path instead.  The phonon carrier is kept
    explicit (no rotating frame on b), so step sizes resolve ~1/omega_b.

    Raises
    ------
    StiffnessError
        If the integrator's step control collapses.
    TraceDriftError, PositivityError, DynamicsError
        If the monitored invariants fail on the samples.
    """
    e_ops = dict(e_ops or {})
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be an increasing 1-d array of at least 2 times")
    d = gen.dims.total
    if rho0.dim != d:
        raise ValueError("initial state dimension does not match generator")
    lio = gen.liouvillian_static()
    y0 = rho0.mat.reshape(-1).astype(complex)

    steps = np.diff(t_grid)
    uniform = np.allclose(steps, steps[0], rtol=1e-12, atol=0.0)
    if gen.is_time_independent and uniform and d * d <= 4096:
        prop = expm(lio.toarray() * steps[0])
        mats = [rho0.mat.copy()]
        y = y0.copy()
        for _ in range(len(t_grid) - 1):
            y = prop @ y
            mats.append(y.reshape(d, d).copy())
    else:
        kp, km = gen.drive_superops()
        drives = gen.drives

        def rhs(t, y):
            dy = lio @ y
            if drives:
                f = complex(sum(term.field(t) for term in drives))
                if f != 0.0:
                    dy = dy + f * (kp @ y) + np.conj(f) * (km @ y)
            return dy

        sol = solve_ivp(
            rhs,
            (t_grid[0], t_grid[-1]),
            y0,
            method="DOP853",
            t_eval=t_grid,
            rtol=rtol,
            atol=atol,
        )
        if not sol.success:
            raise StiffnessError(
                f"integrator failed near t = {sol.t[-1] if len(sol.t) else t_grid[0]:.6g}: "
                f"{sol.message}"
            )
        mats = [sol.y[:, k].reshape(d, d) for k in range(sol.y.shape[1])]

    obs, drift, lowest = _check_samples(t_grid, mats, e_ops)
    states = None
    if keep_states:
        states = [
            DensityMatrix(0.5 * (m + m.conj().T) / np.trace(m).real, dims=gen.dims)
            for m in mats
        ]
    return Trajectory(
        times=t_grid,
        observables=obs,
        trace_drift=drift,
        min_eigenvalue=lowest,
        states=states,
    )


# ---------------------------------------------------------------------------
# two-time correlations (quantum regression)


@dataclass
class CorrelationSeries:
    """C(tau) on a tau grid, with optional exponential-mode representation.

    When produced by the eigendecomposition route, ``mode_coeffs`` and
    ``mode_rates`` satisfy C(tau) = sum_k coeff_k exp(rate_k tau) exactly
    (within the decomposition's accuracy), which the spectrum transform uses
    in closed form.
    """

    taus: np.ndarray
    values: np.ndarray
    mode_coeffs: np.ndarray | None = None
    mode_rates: np.ndarray | None = None

    @property
    def has_modes(self) -> bool:
        return self.mode_coeffs is not None and self.mode_rates is not None


def two_time_correlation(
    gen: Generator,
    rho_ss: DensityMatrix,
    a_op: QOperator,
    b_op: QOperator,
    taus,
) -> CorrelationSeries:
    """C(tau) = Tr[A e^{L tau}(B rho_ss)] for a time-independent generator.

    The deformed state B rho_ss is expanded in the Liouvillian eigenbasis, so
    the series can be evaluated on any tau grid and carries its mode data.
    If the eigenbasis is ill-conditioned (or the space too large), falls back
    to matrix-exponential stepping on a uniform grid.

    C(0) is set to Tr[A B rho_ss] exactly.  When A is the adjoint of B the
    zero-lag value must be real within 1e-9 (it is |B|^2-like) and is checked.
    """
    if not gen.is_time_independent:
        raise ValueError("two_time_correlation requires a time-independent generator")
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or len(taus) < 2:
        raise ValueError("tau grid must be a 1-d array with at least two points")
    if taus[0] != 0.0:
        raise ValueError("tau grid must start at exactly 0")
    if np.any(np.diff(taus) <= 0):
        raise ValueError("tau grid must be strictly increasing")

    d = gen.dims.total
    x0 = (b_op.mat @ rho_ss.mat).reshape(-1)
    wrow = observable_row(a_op)
    c0_exact = complex(np.trace(a_op.mat @ b_op.mat @ rho_ss.mat))

    lio = gen.liouvillian_static()
    coeffs = rates = None
    if d * d <= EIG_PATH_MAX_DIM:
        dense = lio.toarray()
        lam, vmat = np.linalg.eig(dense)
        # accept the eigenbasis only if it actually reproduces L
        recon_err = np.linalg.norm(vmat @ (lam[:, None] * np.linalg.inv(vmat)) - dense)
        if recon_err <= 1e-8 * max(np.linalg.norm(dense), 1.0):
            amp = np.linalg.solve(vmat, x0)
            coeffs = (wrow @ vmat) * amp
            rates = lam

    if coeffs is not None:
        # prune modes that cannot contribute at any tau
        keep = np.abs(coeffs) > 1e-18 * max(np.sum(np.abs(coeffs)), 1.0)
        coeffs, rates = coeffs[keep], rates[keep]
        values = np.empty(len(taus), dtype=complex)
        chunk = max(1, int(2e6) // max(len(coeffs), 1))
        for i in range(0, len(taus), chunk):
            tt = taus[i : i + chunk]
            values[i : i + chunk] = np.exp(np.multiply.outer(tt, rates)) @ coeffs
    else:
        steps = np.diff(taus)
        if not np.allclose(steps, steps[0], rtol=1e-12, atol=0.0):
            raise DynamicsError(
                "eigendecomposition unavailable and tau grid is non-uniform; "
                "use a uniform grid for the stepping fallback"
            )
        prop = expm(lio.toarray() * steps[0]) if d * d <= 4096 else None
        values = np.empty(len(taus), dtype=complex)
        y = x0.copy()
        values[0] = wrow @ y
        if prop is not None:
            for k in range(1, len(taus)):
                y = prop @ y
                values[k] = wrow @ y
        else:
            from scipy.sparse.linalg import expm_multiply

            series = expm_multiply(
                lio * steps[0], x0.reshape(-1, 1), start=0, stop=len(taus) - 1,
                num=len(taus), endpoint=True,
            )
            values = np.array([wrow @ series[k].ravel() for k in range(len(taus))])

    values[0] = c0_exact
    if np.max(np.abs(a_op.mat - b_op.mat.conj().T)) < 1e-12:
        if abs(c0_exact.imag) > 1e-9 * max(1.0, abs(c0_exact)):
            raise DynamicsError(
                f"C(0) should be real for A = B-dagger, got imaginary part {c0_exact.imag:.3e}"
            )
    return CorrelationSeries(
        taus=taus, values=values, mode_coeffs=coeffs, mode_rates=rates
    )


def default_tau_grid(kappa_b: float, n_points: int = 2**15) -> np.ndarray:
    """Default correlation span: min(max(10/kappa_b, 40), 2e4) in 1/gamma.

    The lower clamp keeps the span at least ~20 electronic coherence times
    even for heavily damped phonons; the upper cap bounds the cost for very
    long-lived modes.
    """
    if kappa_b <= 0:
        tau_max = 2e4
    else:
        tau_max = min(max(10.0 / kappa_b, 40.0), 2e4)
    return np.linspace(0.0, tau_max, n_points)


# ---------------------------------------------------------------------------
# spectrum


@dataclass
class SpectrumRecord:
    """Spectrum on an emission-frequency axis omega - omega_ref (gamma units)."""

    omega: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)


def _phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z with a stable small-|z| series."""
    out = np.empty_like(z, dtype=complex)
    small = np.abs(z) < 1e-4
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 + zs**2 / 6.0 + zs**3 / 24.0
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb
    return out


def _phi2(z: np.ndarray) -> np.ndarray:
    """(e^z - 1 - z)/z^2 with a stable small-|z| series."""
    out = np.empty_like(z, dtype=complex)
    small = np.abs(z) < 1e-4
    zs = z[small]
    out[small] = 0.5 + zs / 6.0 + zs**2 / 24.0 + zs**3 / 120.0
    zb = z[~small]
    out[~small] = (np.expm1(zb) - zb) / zb**2
    return out


def spectrum_from_correlation(
    corr: CorrelationSeries,
    omega_grid,
    subtract_coherent: bool = True,
) -> SpectrumRecord:
    """One-sided transform S = 2 Re Int_0^inf C(tau) e^{-i omega tau} dtau.

    ``omega_grid`` is the emission-frequency axis relative to the frame
    reference.  With mode data present the transform is closed-form,
    S = 2 Re sum_k coeff_k / (i omega - rate_k); ``subtract_coherent`` then
    drops the non-decaying modes (the coherent-scattering delta line).  For a
    plain sampled series the long-time plateau is subtracted instead and the
    integral is taken with an oscillation-exact piecewise-linear rule, warning
    if the series has not decayed by the end of the span.
    """
    omega = np.asarray(omega_grid, dtype=float)
    if corr.has_modes:
        rates = corr.mode_rates
        coeffs = corr.mode_coeffs
        scale = max(1.0, float(np.max(np.abs(rates.imag), initial=0.0)))
        grow = rates.real > 1e-9 * scale
        if np.any(grow):
            raise DynamicsError(
                f"correlation contains {int(np.sum(grow))} growing mode(s); "
                "generator is not relaxing"
            )
        if subtract_coherent:
            keep = rates.real < -max(1e-13, 1e-12 * scale)
            rates, coeffs = rates[keep], coeffs[keep]
        vals = np.empty(len(omega))
        chunk = max(1, int(4e6) // max(len(rates), 1))
        for i in range(0, len(omega), chunk):
            th = omega[i : i + chunk]
            denom = 1j * th[:, None] - rates[None, :]
            vals[i : i + chunk] = 2.0 * np.real((1.0 / denom) @ coeffs)
        return SpectrumRecord(
            omega=omega, values=vals, meta={"route": "modes", "n_modes": len(rates)}
        )

    taus = corr.taus
    cvals = corr.values.astype(complex).copy()
    cmax = float(np.max(np.abs(cvals)))
    ntail = max(8, len(taus) // 50)
    plateau = complex(np.mean(cvals[-ntail:]))
    if subtract_coherent:
        cvals = cvals - plateau
    tail = float(np.max(np.abs(cvals[-ntail:])))
    if tail > 1e-3 * max(cmax, 1e-300):
        warnings.warn(
            f"correlation has not decayed at tau_max = {taus[-1]:.3g} "
            f"(tail/max = {tail / cmax:.2e}); suggest a span of at least {5 * taus[-1]:.3g}",
            ResolutionWarning,
            stacklevel=2,
        )
    h = np.diff(taus)
    vals = np.empty(len(omega))
    chunk = max(1, int(4e6) // max(len(h), 1))
    for i in range(0, len(omega), chunk):
        th = omega[i : i + chunk]
        z = -1j * np.multiply.outer(th, h)  # (n_omega, n_int)
        p1 = _phi1(z)
        p2 = _phi2(z)
        phase = np.exp(-1j * np.multiply.outer(th, taus[:-1]))
        seg = h[None, :] * phase * (cvals[:-1][None, :] * p1 + np.diff(cvals)[None, :] * p2)
        vals[i : i + chunk] = 2.0 * np.real(np.sum(seg, axis=1))
    return SpectrumRecord(
        omega=omega,
        values=vals,
        meta={"route": "sampled", "plateau": plateau, "subtracted": subtract_coherent},
    )


# ---------------------------------------------------------------------------
# cutoff convergence


@dataclass
class ConvergenceReport:
    """Relative change of key observables under cutoff doubling."""

    cutoff: int
    cutoff_doubled: int
    per_observable: dict[str, float]
    max_rel_change: float
    converged: bool
    threshold: float


def cutoff_convergence(
    run: Callable[[int], dict[str, float]],
    cutoff: int,
    threshold: float = 1e-3,
    warn_context: str = "",
) -> ConvergenceReport:
    """Run a scalar-observable computation at N and 2N and compare.

    ``run`` maps a Fock cutoff to named scalars.  Relative changes use the
    larger magnitude as denominator; pairs both below 1e-14 count as zero
    change.  Exceeding ``threshold`` issues :class:`CutoffConvergenceWarning`
    (results may be in a non-convergent regime) but does not raise.
    """
    base = run(cutoff)
    doubled = run(2 * cutoff)
    per: dict[str, float] = {}
    for key, v1 in base.items():
        v2 = doubled[key]
        big = max(abs(v1), abs(v2))
        per[key] = 0.0 if big < 1e-14 else abs(v1 - v2) / big
    worst = max(per.values(), default=0.0)
    ok = worst <= threshold
    if not ok:
        worst_key = max(per, key=per.get)
        warnings.warn(
            f"cutoff doubling {cutoff} -> {2 * cutoff} moved '{worst_key}' by "
            f"{per[worst_key]:.2e} (> {threshold:.1e}){f' in {warn_context}' if warn_context else ''}",
            CutoffConvergenceWarning,
            stacklevel=2,
        )
    return ConvergenceReport(
        cutoff=cutoff,
        cutoff_doubled=2 * cutoff,
        per_observable=per,
        max_rel_change=worst,
        converged=ok,
        threshold=threshold,
    )
