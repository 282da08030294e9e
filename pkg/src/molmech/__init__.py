"""molmech: a single organic molecule coupled to one long-lived phonon mode.

Simulator for the cavity-free optomechanics of a two-level emitter whose
electronic transition shifts with the displacement of its host nanocrystal's
breathing mode.  The package covers driven excitation spectra (phonon-sideband
absorption), emission spectra with Stokes and anti-Stokes structure, and a
stimulated-Raman write/store/read phonon memory with its analytic pulse-area
efficiency theory.

Layers, bottom up: `hilbert` (operators on the emitter x phonon space),
`model` (resolved parameters, drive tones, memory schedules, lab-unit
estimators), `dynamics` (Lindblad engine: steady states, time evolution,
two-time correlations, spectra), `propagator` (periodized integrator for the
carrier-modulated memory pulses), `experiments` (measurement campaigns),
`analytics` (closed-form memory theory and the mean-field model), `config`
(strict TOML run files), `cli` (batch commands).
"""

from .analytics import (
    calibrated_schedule,
    eta_read,
    eta_write,
    eta_write_max,
    meanfield_efficiencies,
    meanfield_memory,
    memory_constant,
    retrieval_vs_delay,
    weak_drive_spectrum_analytic,
)
from .config import parse_config, parse_material
from .dynamics import evolve, steady_state
from .experiments import (
    excitation_sweep,
    find_peaks,
    fluorescence_spectrum,
    memory_protocol_run,
    write_read_efficiencies,
)
from .model import (
    CW,
    DriveTone,
    GaussianPulse,
    MemorySchedule,
    SystemConfig,
    bose_occupation,
    debye_waller,
    decay_from_quality,
    estimate_g0,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "CW",
    "DriveTone",
    "GaussianPulse",
    "MemorySchedule",
    "SystemConfig",
    "bose_occupation",
    "debye_waller",
    "decay_from_quality",
    "estimate_g0",
    "steady_state",
    "evolve",
    "excitation_sweep",
    "find_peaks",
    "fluorescence_spectrum",
    "memory_protocol_run",
    "write_read_efficiencies",
    "calibrated_schedule",
    "memory_constant",
    "eta_write",
    "eta_read",
    "eta_write_max",
    "meanfield_memory",
    "meanfield_efficiencies",
    "retrieval_vs_delay",
    "weak_drive_spectrum_analytic",
    "parse_config",
    "parse_material",
]
