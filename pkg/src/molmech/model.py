"""Physical model: parameters, Hamiltonian and collapse-operator builders.

The system is a two-level molecular emitter whose excited state displaces one
damped harmonic phonon mode of its host:

    H(t) = Delta_ref s+s  +  omega_b b+b  +  g0 s+s (b + b+)
           + sum_k [ Omega_k(t) exp(i (Delta_k - Delta_ref) t) s+  + h.c. ]

written in the frame rotating at the reference drive tone.  All rates and
frequencies are in units of the emitter's full spontaneous-emission width
gamma (so gamma == 1 internally), with hbar = 1.  Detunings follow
Delta = omega_0 - omega_laser: a tone red of the zero-phonon line has
Delta > 0, and the phonon-sideband absorption via the one-phonon excited
state sits at Delta = -omega_b.

The drive convention pins the Rabi amplitude: a resonant CW tone of
amplitude Omega contributes exactly Omega (s+ + s) to H, which makes the
bare two-level steady state Omega^2 / (Delta^2 + gamma^2/4 + 2 Omega^2).

Dissipation (Lindblad collapse operators, fullwidth rates):

    sqrt(gamma) s,   sqrt(kappa_b (n_th + 1)) b,   sqrt(kappa_b n_th) b+.

This module also carries the order-of-magnitude estimators that connect the
gamma-unit model to lab numbers (coupling from deformation-potential strain,
mechanical lifetime from a quality factor, thermal occupation).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import hbar as HBAR
from scipy.constants import k as KBOLTZ

from .hilbert import (
    QOperator,
    SpaceDims,
    annihilator,
    embed_pair,
    emitter_lowering,
    emitter_projector_excited,
    identity,
    number_operator,
)

__all__ = [
    "CW",
    "GaussianPulse",
    "DriveTone",
    "SystemConfig",
    "MemorySchedule",
    "WeakSignalWarning",
    "DriveFieldTerm",
    "sigma_full",
    "annihilator_full",
    "number_full",
    "excited_projector_full",
    "static_hamiltonian",
    "drive_field_terms",
    "build_hamiltonian",
    "build_collapse_ops",
    "estimate_g0",
    "debye_waller",
    "decay_from_quality",
    "bose_occupation",
    "gamma_rad_per_s",
]


# ---------------------------------------------------------------------------
# drive envelopes


@dataclass(frozen=True)
class CW:
    """Always-on envelope (value 1 at all times)."""

    def value(self, t):
        return np.ones_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class GaussianPulse:
    """Gaussian envelope exp(-(t - center)^2 / width^2).

    ``width`` is the 1/e half-width of the *amplitude* envelope (the pulse
    energy integral is width * sqrt(pi/2) * peak^2).
    """

    center: float
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("pulse width must be positive")

    def value(self, t):
        x = (np.asarray(t, dtype=float) - self.center) / self.width
        return np.exp(-(x**2))


@dataclass(frozen=True)
class DriveTone:
    """One laser tone.

    Parameters
    ----------
    amplitude : complex
        Peak Rabi amplitude Omega in gamma units.
    detuning : float
        Delta = omega_0 - omega_tone in gamma units.
    envelope : CW | GaussianPulse
    role : str
        Free-form label ("probe", "signal", "control_write", ...); used by the
        experiment drivers to find their tones.
    is_reference : bool
        Marks the tone whose frame the Hamiltonian is written in.  Exactly one
        tone of a config must carry this flag.
    """

    amplitude: complex
    detuning: float
    envelope: CW | GaussianPulse = field(default_factory=CW)
    role: str = "probe"
    is_reference: bool = False


@dataclass(frozen=True)
class SystemConfig:
    """Resolved model parameters, all in gamma units.

    ``gamma`` is retained as an explicit field for readability but is fixed at
    1.0; ``gamma_over_2pi_MHz`` anchors conversions back to laboratory units.
    """

    g0: float
    omega_b: float
    kappa_b: float
    tones: tuple[DriveTone, ...] = ()
    n_thermal: float = 0.0
    cutoff: int = 10
    gamma: float = 1.0
    gamma_over_2pi_MHz: float = 40.0

    def __post_init__(self):
        if self.gamma != 1.0:
            raise ValueError("internal unit system fixes gamma = 1")
        if self.omega_b <= 0 or self.kappa_b < 0 or self.n_thermal < 0:
            raise ValueError("phonon parameters out of range")
        if self.cutoff < 2:
            raise ValueError("cutoff must be >= 2")
        if self.tones:
            nref = sum(1 for t in self.tones if t.is_reference)
            if nref != 1:
                raise ValueError(
                    f"exactly one tone must be the frame reference, found {nref}"
                )

    @property
    def dims(self) -> SpaceDims:
        return SpaceDims(phonon_cutoff=self.cutoff)

    @property
    def reference_detuning(self) -> float:
        if not self.tones:
            return 0.0
        return next(t.detuning for t in self.tones if t.is_reference)

    def with_cutoff(self, cutoff: int) -> "SystemConfig":
        return replace(self, cutoff=cutoff)

    def with_tones(self, tones) -> "SystemConfig":
        return replace(self, tones=tuple(tones))


class WeakSignalWarning(UserWarning):
    """The memory signal pulse is not small compared to the control pulses."""


@dataclass(frozen=True)
class MemorySchedule:
    """Write/read pulse schedule for the stimulated-Raman phonon memory.

    Three Gaussian tones share one pulse width: a weak signal pulse near the
    zero-phonon line centered in the write window, a strong write control tone
    red-detuned from the signal by one phonon quantum (plus an optional
    two-photon offset ``raman_detuning``), and a read control tone with the
    same detuning centered ``storage_delay`` later.  Times are in 1/gamma,
    amplitudes in gamma.

    The write window is ``write_center +- margin * pulse_width`` and the read
    window ``read_center +- margin * pulse_width``; the two windows must not
    overlap.  Efficiency bookkeeping reads populations at the window edges, so
    ``margin`` doubles as the point where a pulse is considered over.
    """

    pulse_width: float
    write_center: float
    storage_delay: float
    signal_amp: complex
    control_write_amp: complex
    control_read_amp: complex
    signal_detuning: float = 0.0
    raman_detuning: float = 0.0
    margin: float = 3.0

    def __post_init__(self):
        if self.pulse_width <= 0:
            raise ValueError("pulse width must be positive")
        if self.margin < 1.0:
            raise ValueError("window margin must be at least one pulse width")
        if self.write_center < self.margin * self.pulse_width:
            raise ValueError("write window starts before t = 0")
        if self.storage_delay < 2.0 * self.margin * self.pulse_width:
            raise ValueError(
                "write and read windows overlap: storage_delay "
                f"{self.storage_delay:g} < {2.0 * self.margin * self.pulse_width:g}"
            )
        strongest = max(abs(self.control_write_amp), abs(self.control_read_amp))
        if strongest > 0 and abs(self.signal_amp) > 0.1 * strongest:
            warnings.warn(
                "signal amplitude exceeds 10% of the control amplitude; the "
                "memory analysis assumes a perturbative signal",
                WeakSignalWarning,
                stacklevel=2,
            )

    @property
    def read_center(self) -> float:
        return self.write_center + self.storage_delay

    @property
    def write_window(self) -> tuple[float, float]:
        m = self.margin * self.pulse_width
        return (self.write_center - m, self.write_center + m)

    @property
    def read_window(self) -> tuple[float, float]:
        m = self.margin * self.pulse_width
        return (self.read_center - m, self.read_center + m)

    @property
    def span(self) -> float:
        """Suggested end time: one extra pulse width past the read window."""
        return self.read_window[1] + self.pulse_width

    def control_detuning(self, omega_b: float) -> float:
        """Detuning of both control tones (two-photon resonance at offset 0)."""
        return self.signal_detuning + omega_b + self.raman_detuning

    def n_signal_photons(self, gamma: float = 1.0) -> float:
        """Signal pulse energy (1/gamma) integral |Omega_s(t)|^2 dt in photons."""
        return abs(self.signal_amp) ** 2 * self.pulse_width * math.sqrt(math.pi / 2.0) / gamma

    def tones(self, omega_b: float) -> tuple[DriveTone, ...]:
        """The three drive tones; the signal tone carries the reference frame.

        Zero-amplitude tones are kept so that baseline variants (signal or
        control switched off) run in the identical rotating frame.
        """
        d_c = self.control_detuning(omega_b)
        return (
            DriveTone(
                amplitude=complex(self.signal_amp),
                detuning=self.signal_detuning,
                envelope=GaussianPulse(self.write_center, self.pulse_width),
                role="signal",
                is_reference=True,
            ),
            DriveTone(
                amplitude=complex(self.control_write_amp),
                detuning=d_c,
                envelope=GaussianPulse(self.write_center, self.pulse_width),
                role="control_write",
            ),
            DriveTone(
                amplitude=complex(self.control_read_amp),
                detuning=d_c,
                envelope=GaussianPulse(self.read_center, self.pulse_width),
                role="control_read",
            ),
        )

    def variant(self, which: str) -> "MemorySchedule":
        """Baseline copies: "full", "control_only" or "signal_only"."""
        if which == "full":
            return self
        if which == "control_only":
            return replace(self, signal_amp=0j)
        if which == "signal_only":
            return replace(self, control_write_amp=0j, control_read_amp=0j)
        raise ValueError(f"unknown schedule variant {which!r}")


# ---------------------------------------------------------------------------
# composite-space operators


def sigma_full(dims: SpaceDims) -> QOperator:
    """Emitter lowering operator on the composite space."""
    return embed_pair(emitter_lowering(), identity(dims.phonon_cutoff))


def annihilator_full(dims: SpaceDims) -> QOperator:
    """Phonon lowering operator on the composite space."""
    return embed_pair(identity(2), annihilator(dims.phonon_cutoff))


def number_full(dims: SpaceDims) -> QOperator:
    """b+b on the composite space."""
    return embed_pair(identity(2), number_operator(dims.phonon_cutoff))


def excited_projector_full(dims: SpaceDims) -> QOperator:
    """s+s on the composite space."""
    return embed_pair(emitter_projector_excited(), identity(dims.phonon_cutoff))


@dataclass(frozen=True)
class DriveFieldTerm:
    """One drive contribution f_k(t) s+ + h.c. with f_k = amp * env(t) * e^{i carrier t}."""

    amplitude: complex
    carrier: float
    envelope: CW | GaussianPulse

    def field(self, t):
        """Complex drive field f_k(t) (scalar or array in t)."""
        phase = np.exp(1j * self.carrier * np.asarray(t, dtype=float))
        return self.amplitude * self.envelope.value(t) * phase

    @property
    def is_static(self) -> bool:
        return self.carrier == 0.0 and isinstance(self.envelope, CW)


def static_hamiltonian(config: SystemConfig) -> QOperator:
    """Drive-free part: Delta_ref s+s + omega_b b+b + g0 s+s (b + b+)."""
    dims = config.dims
    n = dims.phonon_cutoff
    b = annihilator(n)
    x = b + b.dag()
    pe = emitter_projector_excited()
    h = (
        config.reference_detuning * embed_pair(pe, identity(n))
        + config.omega_b * embed_pair(identity(2), number_operator(n))
        + config.g0 * embed_pair(pe, x)
    )
    return QOperator(h.mat, dims=dims, herm=True)


def drive_field_terms(config: SystemConfig) -> list[DriveFieldTerm]:
    """Per-tone drive descriptors in the reference-tone frame.

    The carrier of tone k is Delta_k - Delta_ref; the reference tone itself has
    carrier zero.
    """
    dref = config.reference_detuning
    return [
        DriveFieldTerm(
            amplitude=complex(t.amplitude),
            carrier=t.detuning - dref,
            envelope=t.envelope,
        )
        for t in config.tones
    ]


def build_hamiltonian(config: SystemConfig, t: float = 0.0) -> QOperator:
    """Full H(t) at one instant, in the reference-tone rotating frame."""
    dims = config.dims
    h = static_hamiltonian(config).mat.copy()
    sp = sigma_full(dims).dag().mat
    for term in drive_field_terms(config):
        f = complex(term.field(t))
        h += f * sp + np.conj(f) * sp.conj().T
    return QOperator(h, dims=dims, herm=True)


def build_collapse_ops(config: SystemConfig) -> list[QOperator]:
    """Lindblad collapse operators with fullwidth-rate prefactors.

    Returns [sqrt(gamma) s, sqrt(kappa_b (n_th+1)) b] and, only when the
    thermal occupation is nonzero, sqrt(kappa_b n_th) b+.  Operators with an
    exactly zero prefactor are dropped.
    """
    dims = config.dims
    ops: list[QOperator] = []
    if config.gamma > 0:
        ops.append(math.sqrt(config.gamma) * sigma_full(dims))
    if config.kappa_b > 0:
        b = embed_pair(identity(2), annihilator(dims.phonon_cutoff))
        ops.append(math.sqrt(config.kappa_b * (config.n_thermal + 1.0)) * b)
        if config.n_thermal > 0:
            ops.append(math.sqrt(config.kappa_b * config.n_thermal) * b.dag())
    return ops


# ---------------------------------------------------------------------------
# lab-unit estimators


def gamma_rad_per_s(gamma_over_2pi_MHz: float) -> float:
    """gamma in rad/s from its quoted gamma/2pi value in MHz."""
    return 2.0 * math.pi * gamma_over_2pi_MHz * 1e6


def estimate_g0(
    deformation_potential_over_2pi_hbar_Hz: float,
    strain: float,
    youngs_modulus_Pa: float,
    mode_volume_m3: float,
    phonon_freq_Hz: float,
) -> float:
    """Single-phonon coupling g0/2pi in Hz from deformation-potential strain.

    g0 = D s sqrt(omega_b / (2 hbar E V)) with the deformation potential D
    quoted, as is conventional, through D / (2 pi hbar) in Hz.  The strain
    ``s`` is the dimensionless zero-point strain fraction concentrated at the
    emitter.

    Returns
    -------
    float
        g0 / 2pi in Hz.
    """
    if min(strain, youngs_modulus_Pa, mode_volume_m3, phonon_freq_Hz) <= 0:
        raise ValueError("all estimator inputs must be positive")
    d_joule = 2.0 * math.pi * HBAR * deformation_potential_over_2pi_hbar_Hz
    omega_b = 2.0 * math.pi * phonon_freq_Hz
    g0_rad = d_joule * strain * math.sqrt(omega_b / (2.0 * HBAR * youngs_modulus_Pa * mode_volume_m3))
    return g0_rad / (2.0 * math.pi)


def debye_waller(g0: float, omega_b: float) -> float:
    """Zero-phonon-line weight exp(-g0^2/omega_b^2) (any consistent units)."""
    if omega_b <= 0:
        raise ValueError("omega_b must be positive")
    return math.exp(-((g0 / omega_b) ** 2))


def decay_from_quality(freq_Hz: float, quality: float) -> tuple[float, float]:
    """(kappa in rad/s, amplitude lifetime 1/kappa in s) for a mode of given Q."""
    if freq_Hz <= 0 or quality <= 0:
        raise ValueError("frequency and quality factor must be positive")
    kappa = 2.0 * math.pi * freq_Hz / quality
    return kappa, 1.0 / kappa


def bose_occupation(freq_Hz: float, temperature_K: float) -> float:
    """Thermal occupation 1/(exp(hbar omega / kB T) - 1); zero at T = 0."""
    if freq_Hz <= 0:
        raise ValueError("frequency must be positive")
    if temperature_K < 0:
        raise ValueError("temperature must be non-negative")
    if temperature_K == 0.0:
        return 0.0
    x = 2.0 * math.pi * HBAR * freq_Hz / (KBOLTZ * temperature_K)
    return 1.0 / math.expm1(x)
