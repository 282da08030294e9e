"""Strict TOML run configuration.

A run file is sectioned key-value text resolved into gamma-unit model objects.
The schema is strict on purpose: a misspelled physics key silently falling back
to a default is the main way a reproduction goes wrong, so unknown keys are
fatal and every quantity that can be stated in two unit systems admits exactly
one of the two spellings.

Sections
--------
``[units]``
    ``gamma_over_2pi_MHz`` (default 40.0), the laboratory anchor used to
    convert every ``*_us``, ``*_MHz`` and ``freq_GHz`` key into gamma units.
``[molecule]``
    optional ``name`` label, echoed into metadata.
``[phonon]``
    mode frequency as ``omega_b_in_gamma`` or ``freq_GHz`` (one of the two,
    never both); damping as ``kappa_b_in_gamma`` or ``Q`` (quality factor,
    requires ``freq_GHz``); occupation as ``n_thermal`` or ``temperature_K``
    (requires ``freq_GHz``), default 0.
``[coupling]``
    ``g0_in_gamma``.
``[[tones]]``
    one table per laser tone: ``role`` (signal | control | probe),
    ``amplitude`` (peak Rabi, gamma units), ``detuning`` or ``detuning_MHz``,
    ``envelope`` ("cw" | "gaussian"), for gaussian a ``center``/``width`` pair
    in inverse-gamma units or ``center_us``/``width_us``, and an optional
    ``reference`` flag.  Exactly one tone must be the frame reference: the
    single tone of a one-tone file is implicitly the reference, multi-tone
    files must mark one.
``[simulation]``
    ``cutoff``, ``rtol``, ``atol``, a detuning grid
    (``detuning_min``/``detuning_max``/``detuning_points``), and optional
    periodized-propagator knobs ``substeps_per_period``,
    ``periods_per_window``, ``sample_stride_periods``.
``[memory]``
    pulse schedule: ``pulse_width`` or ``pulse_width_us``; signal strength as
    ``photons_per_pulse`` or a direct ``signal_amp``; control strengths as
    pulse-area constants ``write_constant``/``read_constant`` or direct
    ``control_write_amp``/``control_read_amp``; optional ``write_center``,
    ``storage_delay`` (either unit spelling), ``raman_detuning``, ``margin``.
    A file with a ``[memory]`` section must not also declare ``[[tones]]``:
    the schedule generates its own three tones.
``[output]``
    ``directory`` (default "out") and ``formats`` (default ["csv", "json"]).
``[sweep]``
    ``parameter`` (dotted path from the whitelist below), ``values`` (list),
    ``experiment`` ("memory").

Material files for the estimator command use a single ``[material]`` section,
see `parse_material`.

`resolved_toml` re-serializes a parsed file into canonical resolved form
(gamma units, direct amplitudes); parsing that text again yields identical
resolved parameters, which is the round-trip contract the test suite pins.
"""

from __future__ import annotations

import math

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from dataclasses import dataclass, replace

from .analytics import control_amp_for_constant, signal_amp_for_photons
from .model import CW, DriveTone, GaussianPulse, MemorySchedule, SystemConfig

__all__ = [
    "ConfigError",
    "SimulationSpec",
    "OutputSpec",
    "SweepSpec",
    "MemorySpec",
    "MaterialSpec",
    "RunConfig",
    "parse_config",
    "parse_config_text",
    "parse_material",
    "resolved_dict",
    "resolved_toml",
    "memory_schedule",
    "sweep_point",
]

TONE_ROLES = ("signal", "control", "probe")

SWEEP_PARAMETERS = (
    "coupling.g0_in_gamma",
    "phonon.omega_b_in_gamma",
    "phonon.kappa_b_in_gamma",
    "phonon.n_thermal",
    "memory.pulse_width",
    "memory.storage_delay",
    "memory.raman_detuning",
    "memory.photons_per_pulse",
    "memory.write_constant",
    "memory.read_constant",
)


class ConfigError(ValueError):
    """Raised for schema violations, unit conflicts and unresolvable values."""


# ---------------------------------------------------------------------------
# resolved specification objects


@dataclass(frozen=True)
class SimulationSpec:
    """Numerical knobs; ``None`` means use the library default."""

    cutoff: int = 10
    check_convergence: bool = True
    rtol: float | None = None
    atol: float | None = None
    detuning_min: float | None = None
    detuning_max: float | None = None
    detuning_points: int | None = None
    substeps_per_period: int | None = None
    periods_per_window: int | None = None
    sample_stride_periods: int | None = None

    def detuning_grid(self) -> tuple[float, float, int] | None:
        if self.detuning_points is None:
            return None
        if self.detuning_min is None or self.detuning_max is None:
            raise ConfigError(
                "simulation.detuning_points requires detuning_min and detuning_max"
            )
        return (self.detuning_min, self.detuning_max, self.detuning_points)


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]
    experiment: str = "memory"


@dataclass(frozen=True)
class MemorySpec:
    """Memory schedule inputs after unit resolution, before calibration.

    Exactly one of each (photons_per_pulse | signal_amp), (write_constant |
    control_write_amp), (read_constant | control_read_amp) is non-None.
    """

    pulse_width: float
    photons_per_pulse: float | None = 0.04
    signal_amp: float | None = None
    write_constant: float | None = 1.0
    control_write_amp: float | None = None
    read_constant: float | None = 1.57
    control_read_amp: float | None = None
    write_center: float | None = None
    storage_delay: float | None = None
    raman_detuning: float = 0.0
    margin: float = 3.0


@dataclass(frozen=True)
class MaterialSpec:
    """Host-material numbers feeding the laboratory-unit estimators."""

    deformation_potential_over_2pi_THz: float
    mode_volume_um3: float
    young_modulus_Pa: float
    freq_GHz: float
    Q: float
    temperature_K: float
    strain: tuple[float, ...]
    name: str | None = None


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs, fully resolved to gamma units."""

    system: SystemConfig
    simulation: SimulationSpec = SimulationSpec()
    output: OutputSpec = OutputSpec()
    memory: MemorySpec | None = None
    sweep: SweepSpec | None = None
    molecule_name: str | None = None


# ---------------------------------------------------------------------------
# schema walking helpers


def _type_name(v) -> str:
    return type(v).__name__


def _want_number(section: str, key: str, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {_type_name(v)}")
    return float(v)


def _want_int(section: str, key: str, v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{section}.{key} must be an integer, got {_type_name(v)}")
    return v


def _want_str(section: str, key: str, v) -> str:
    if not isinstance(v, str):
        raise ConfigError(f"{section}.{key} must be a string, got {_type_name(v)}")
    return v


def _want_bool(section: str, key: str, v) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"{section}.{key} must be a boolean, got {_type_name(v)}")
    return v


def _reject_unknown(section: str, table: dict, allowed: set[str]) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {section}.{key}")


def _exclusive(section: str, table: dict, *keys: str, required: bool = True):
    """Return (key, value) for the single present key of ``keys``."""
    present = [k for k in keys if k in table]
    if len(present) > 1:
        raise ConfigError(
            f"unit conflict in [{section}]: give only one of {', '.join(present)}"
        )
    if not present:
        if required:
            raise ConfigError(
                f"[{section}] needs one of {', '.join(keys)}"
            )
        return None, None
    k = present[0]
    return k, table[k]


# ---------------------------------------------------------------------------
# section parsers


def _parse_units(table: dict) -> float:
    _reject_unknown("units", table, {"gamma_over_2pi_MHz"})
    gamma_mhz = _want_number("units", "gamma_over_2pi_MHz", table.get("gamma_over_2pi_MHz", 40.0))
    if gamma_mhz <= 0:
        raise ConfigError("units.gamma_over_2pi_MHz must be positive")
    return gamma_mhz


def _time_to_gamma(us: float, gamma_mhz: float) -> float:
    """Inverse-gamma units for a lab time in microseconds."""
    return us * 2.0 * math.pi * gamma_mhz


def _freq_ghz_to_gamma(ghz: float, gamma_mhz: float) -> float:
    """Gamma units for a mode frequency quoted in GHz (ratio of frequencies)."""
    return ghz * 1e3 / gamma_mhz


def _parse_phonon(table: dict, gamma_mhz: float) -> tuple[float, float, float, dict]:
    allowed = {"omega_b_in_gamma", "freq_GHz", "kappa_b_in_gamma", "Q", "n_thermal", "temperature_K"}
    _reject_unknown("phonon", table, allowed)
    echo: dict = {}

    key, raw = _exclusive("phonon", table, "omega_b_in_gamma", "freq_GHz")
    if key == "omega_b_in_gamma":
        omega_b = _want_number("phonon", key, raw)
    else:
        ghz = _want_number("phonon", key, raw)
        omega_b = _freq_ghz_to_gamma(ghz, gamma_mhz)
        echo["freq_GHz"] = ghz
    if omega_b <= 0:
        raise ConfigError("phonon frequency must be positive")

    key, raw = _exclusive("phonon", table, "kappa_b_in_gamma", "Q")
    if key == "kappa_b_in_gamma":
        kappa_b = _want_number("phonon", key, raw)
    else:
        q = _want_number("phonon", key, raw)
        if "freq_GHz" not in echo:
            raise ConfigError("phonon.Q needs phonon.freq_GHz to fix the decay rate")
        if q <= 0:
            raise ConfigError("phonon.Q must be positive")
        kappa_b = _freq_ghz_to_gamma(echo["freq_GHz"], gamma_mhz) / q
        echo["Q"] = q
    if kappa_b < 0:
        raise ConfigError("phonon damping must be non-negative")

    key, raw = _exclusive("phonon", table, "n_thermal", "temperature_K", required=False)
    if key is None:
        n_thermal = 0.0
    elif key == "n_thermal":
        n_thermal = _want_number("phonon", key, raw)
        if n_thermal < 0:
            raise ConfigError("phonon.n_thermal must be non-negative")
    else:
        temp = _want_number("phonon", key, raw)
        if "freq_GHz" not in echo:
            raise ConfigError("phonon.temperature_K needs phonon.freq_GHz")
        if temp < 0:
            raise ConfigError("phonon.temperature_K must be non-negative")
        if temp == 0.0:
            n_thermal = 0.0
        else:
            from .model import bose_occupation

            n_thermal = bose_occupation(echo["freq_GHz"] * 1e9, temp)
        echo["temperature_K"] = temp
    return omega_b, kappa_b, n_thermal, echo


def _parse_coupling(table: dict) -> float:
    _reject_unknown("coupling", table, {"g0_in_gamma"})
    if "g0_in_gamma" not in table:
        raise ConfigError("[coupling] needs g0_in_gamma")
    g0 = _want_number("coupling", "g0_in_gamma", table["g0_in_gamma"])
    if g0 < 0:
        raise ConfigError("coupling.g0_in_gamma must be non-negative")
    return g0


def _parse_tone(index: int, table: dict, gamma_mhz: float) -> tuple[DriveTone, bool | None]:
    section = f"tones[{index}]"
    allowed = {
        "role", "amplitude", "detuning", "detuning_MHz", "envelope",
        "center", "width", "center_us", "width_us", "reference",
    }
    _reject_unknown(section, table, allowed)

    if "role" not in table:
        raise ConfigError(f"{section} needs a role ({' | '.join(TONE_ROLES)})")
    role = _want_str(section, "role", table["role"])
    if role not in TONE_ROLES:
        raise ConfigError(f"{section}.role must be one of {', '.join(TONE_ROLES)}, got {role!r}")

    if "amplitude" not in table:
        raise ConfigError(f"{section} needs an amplitude")
    amplitude = _want_number(section, "amplitude", table["amplitude"])

    key, raw = _exclusive(section, table, "detuning", "detuning_MHz", required=False)
    if key is None:
        detuning = 0.0
    elif key == "detuning":
        detuning = _want_number(section, key, raw)
    else:
        detuning = _want_number(section, key, raw) / gamma_mhz

    env_name = _want_str(section, "envelope", table.get("envelope", "cw"))
    if env_name == "cw":
        for k in ("center", "width", "center_us", "width_us"):
            if k in table:
                raise ConfigError(f"{section}.{k} only applies to gaussian envelopes")
        envelope = CW()
    elif env_name == "gaussian":
        ck, craw = _exclusive(section, table, "center", "center_us")
        wk, wraw = _exclusive(section, table, "width", "width_us")
        center = _want_number(section, ck, craw)
        width = _want_number(section, wk, wraw)
        if ck == "center_us":
            center = _time_to_gamma(center, gamma_mhz)
        if wk == "width_us":
            width = _time_to_gamma(width, gamma_mhz)
        if width <= 0:
            raise ConfigError(f"{section}.width must be positive")
        envelope = GaussianPulse(center=center, width=width)
    else:
        raise ConfigError(f"{section}.envelope must be 'cw' or 'gaussian', got {env_name!r}")

    explicit_ref = _want_bool(section, "reference", table["reference"]) if "reference" in table else None
    tone = DriveTone(
        amplitude=complex(amplitude),
        detuning=detuning,
        envelope=envelope,
        role=role,
        is_reference=False,
    )
    return tone, explicit_ref


def _parse_tones(entries, gamma_mhz: float) -> tuple[DriveTone, ...]:
    if not isinstance(entries, list) or not all(isinstance(e, dict) for e in entries):
        raise ConfigError("tones must be given as [[tones]] tables")
    parsed = [_parse_tone(i, e, gamma_mhz) for i, e in enumerate(entries)]
    flags = [ref for _, ref in parsed]
    marked = [i for i, ref in enumerate(flags) if ref is True]
    if len(parsed) == 1 and not marked:
        if flags[0] is False:
            raise ConfigError("exactly one reference tone required; the only tone opted out")
        marked = [0]
    if len(marked) != 1:
        raise ConfigError(
            f"exactly one reference tone required, found {len(marked)} marked among {len(parsed)}"
        )
    out = []
    for i, (tone, _) in enumerate(parsed):
        out.append(replace(tone, is_reference=(i == marked[0])))
    return tuple(out)


def _parse_simulation(table: dict) -> SimulationSpec:
    allowed = {
        "cutoff", "check_convergence", "rtol", "atol",
        "detuning_min", "detuning_max", "detuning_points",
        "substeps_per_period", "periods_per_window", "sample_stride_periods",
    }
    _reject_unknown("simulation", table, allowed)
    kw: dict = {}
    if "cutoff" in table:
        cutoff = _want_int("simulation", "cutoff", table["cutoff"])
        if cutoff < 2:
            raise ConfigError("simulation.cutoff must be at least 2")
        kw["cutoff"] = cutoff
    if "check_convergence" in table:
        kw["check_convergence"] = _want_bool(
            "simulation", "check_convergence", table["check_convergence"]
        )
    for key in ("rtol", "atol", "detuning_min", "detuning_max"):
        if key in table:
            kw[key] = _want_number("simulation", key, table[key])
    for key in ("detuning_points", "substeps_per_period", "periods_per_window", "sample_stride_periods"):
        if key in table:
            val = _want_int("simulation", key, table[key])
            if val < 1:
                raise ConfigError(f"simulation.{key} must be positive")
            kw[key] = val
    for key in ("rtol", "atol"):
        if key in kw and kw[key] <= 0:
            raise ConfigError(f"simulation.{key} must be positive")
    spec = SimulationSpec(**kw)
    spec.detuning_grid()
    return spec


def _parse_memory(table: dict, gamma_mhz: float) -> MemorySpec:
    allowed = {
        "pulse_width", "pulse_width_us",
        "photons_per_pulse", "signal_amp",
        "write_constant", "control_write_amp",
        "read_constant", "control_read_amp",
        "write_center", "write_center_us",
        "storage_delay", "storage_delay_us",
        "raman_detuning", "margin",
    }
    _reject_unknown("memory", table, allowed)

    key, raw = _exclusive("memory", table, "pulse_width", "pulse_width_us")
    pulse_width = _want_number("memory", key, raw)
    if key == "pulse_width_us":
        pulse_width = _time_to_gamma(pulse_width, gamma_mhz)
    if pulse_width <= 0:
        raise ConfigError("memory pulse width must be positive")

    def optional_time(name: str) -> float | None:
        k, r = _exclusive("memory", table, name, f"{name}_us", required=False)
        if k is None:
            return None
        val = _want_number("memory", k, r)
        return _time_to_gamma(val, gamma_mhz) if k.endswith("_us") else val

    def strength(cal_key: str, direct_key: str, default: float) -> tuple[float | None, float | None]:
        k, r = _exclusive("memory", table, cal_key, direct_key, required=False)
        if k is None:
            return default, None
        val = _want_number("memory", k, r)
        if val < 0:
            raise ConfigError(f"memory.{k} must be non-negative")
        return (val, None) if k == cal_key else (None, val)

    photons, signal_amp = strength("photons_per_pulse", "signal_amp", 0.04)
    write_c, write_amp = strength("write_constant", "control_write_amp", 1.0)
    read_c, read_amp = strength("read_constant", "control_read_amp", 1.57)

    raman = _want_number("memory", "raman_detuning", table.get("raman_detuning", 0.0))
    margin = _want_number("memory", "margin", table.get("margin", 3.0))
    return MemorySpec(
        pulse_width=pulse_width,
        photons_per_pulse=photons,
        signal_amp=signal_amp,
        write_constant=write_c,
        control_write_amp=write_amp,
        read_constant=read_c,
        control_read_amp=read_amp,
        write_center=optional_time("write_center"),
        storage_delay=optional_time("storage_delay"),
        raman_detuning=raman,
        margin=margin,
    )


def _parse_output(table: dict) -> OutputSpec:
    _reject_unknown("output", table, {"directory", "formats"})
    directory = _want_str("output", "directory", table.get("directory", "out"))
    formats = table.get("formats", ["csv", "json"])
    if not isinstance(formats, list) or not all(isinstance(f, str) for f in formats):
        raise ConfigError("output.formats must be a list of strings")
    for f in formats:
        if f not in ("csv", "json"):
            raise ConfigError(f"output.formats entries must be 'csv' or 'json', got {f!r}")
    return OutputSpec(directory=directory, formats=tuple(formats))


def _parse_sweep(table: dict) -> SweepSpec:
    _reject_unknown("sweep", table, {"parameter", "values", "experiment"})
    if "parameter" not in table or "values" not in table:
        raise ConfigError("[sweep] needs parameter and values")
    parameter = _want_str("sweep", "parameter", table["parameter"])
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(
            f"sweep.parameter {parameter!r} not supported; choose from {', '.join(SWEEP_PARAMETERS)}"
        )
    raw_values = table["values"]
    if not isinstance(raw_values, list) or not raw_values:
        raise ConfigError("sweep.values must be a non-empty list of numbers")
    values = tuple(_want_number("sweep", "values", v) for v in raw_values)
    experiment = _want_str("sweep", "experiment", table.get("experiment", "memory"))
    if experiment != "memory":
        raise ConfigError(f"sweep.experiment must be 'memory', got {experiment!r}")
    return SweepSpec(parameter=parameter, values=values, experiment=experiment)


# ---------------------------------------------------------------------------
# top level


def parse_config_text(text: str, origin: str = "<string>") -> RunConfig:
    """Parse TOML text into a `RunConfig`; see the module docstring for the schema."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{origin}: {exc}") from exc

    _reject_unknown(
        "top level", data,
        {"units", "molecule", "phonon", "coupling", "tones", "simulation", "memory", "output", "sweep"},
    )
    for name in ("phonon", "coupling"):
        if name not in data:
            raise ConfigError(f"missing required section [{name}]")

    gamma_mhz = _parse_units(_table("units", data.get("units", {})))
    molecule_name = None
    if "molecule" in data:
        mol = _table("molecule", data["molecule"])
        _reject_unknown("molecule", mol, {"name"})
        if "name" in mol:
            molecule_name = _want_str("molecule", "name", mol["name"])

    omega_b, kappa_b, n_thermal, _ = _parse_phonon(_table("phonon", data["phonon"]), gamma_mhz)
    g0 = _parse_coupling(_table("coupling", data["coupling"]))

    memory = None
    if "memory" in data:
        if "tones" in data:
            raise ConfigError(
                "a [memory] run generates its own tones; remove the [[tones]] tables"
            )
        memory = _parse_memory(_table("memory", data["memory"]), gamma_mhz)

    tones: tuple[DriveTone, ...] = ()
    if "tones" in data:
        tones = _parse_tones(data["tones"], gamma_mhz)

    simulation = _parse_simulation(_table("simulation", data.get("simulation", {})))
    output = _parse_output(_table("output", data.get("output", {})))
    sweep = _parse_sweep(_table("sweep", data["sweep"])) if "sweep" in data else None
    if sweep is not None and sweep.parameter.startswith("memory.") and memory is None:
        raise ConfigError(f"sweep.parameter {sweep.parameter} needs a [memory] section")
    if sweep is not None and sweep.experiment == "memory" and memory is None:
        raise ConfigError("sweep.experiment = 'memory' needs a [memory] section")

    system = SystemConfig(
        g0=g0,
        omega_b=omega_b,
        kappa_b=kappa_b,
        tones=tones,
        n_thermal=n_thermal,
        cutoff=simulation.cutoff,
        gamma=1.0,
        gamma_over_2pi_MHz=gamma_mhz,
    )
    return RunConfig(
        system=system,
        simulation=simulation,
        output=output,
        memory=memory,
        sweep=sweep,
        molecule_name=molecule_name,
    )


def _table(section: str, v) -> dict:
    if not isinstance(v, dict):
        raise ConfigError(f"[{section}] must be a table")
    return v


def parse_config(path) -> RunConfig:
    """Parse the TOML run file at ``path``."""
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, origin=str(path))


def parse_material(path) -> MaterialSpec:
    """Parse a material file: one ``[material]`` section.

    Keys: ``deformation_potential_over_2pi_THz``, ``mode_volume_um3``,
    ``young_modulus_Pa``, ``freq_GHz``, ``Q``, ``temperature_K``, ``strain``
    (list of zero-point strain fractions), optional ``name``.
    """
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read material file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    _reject_unknown("top level", data, {"material"})
    if "material" not in data:
        raise ConfigError("missing required section [material]")
    table = _table("material", data["material"])
    allowed = {
        "deformation_potential_over_2pi_THz", "mode_volume_um3", "young_modulus_Pa",
        "freq_GHz", "Q", "temperature_K", "strain", "name",
    }
    _reject_unknown("material", table, allowed)
    for key in sorted(allowed - {"name"}):
        if key not in table:
            raise ConfigError(f"[material] needs {key}")
    strain_raw = table["strain"]
    if not isinstance(strain_raw, list) or not strain_raw:
        raise ConfigError("material.strain must be a non-empty list")
    strain = tuple(_want_number("material", "strain", s) for s in strain_raw)
    if any(s <= 0 for s in strain):
        raise ConfigError("material.strain entries must be positive")
    name = _want_str("material", "name", table["name"]) if "name" in table else None

    def num(key: str) -> float:
        val = _want_number("material", key, table[key])
        if val <= 0 and key != "temperature_K":
            raise ConfigError(f"material.{key} must be positive")
        if val < 0:
            raise ConfigError(f"material.{key} must be non-negative")
        return val

    return MaterialSpec(
        deformation_potential_over_2pi_THz=num("deformation_potential_over_2pi_THz"),
        mode_volume_um3=num("mode_volume_um3"),
        young_modulus_Pa=num("young_modulus_Pa"),
        freq_GHz=num("freq_GHz"),
        Q=num("Q"),
        temperature_K=num("temperature_K"),
        strain=strain,
        name=name,
    )


# ---------------------------------------------------------------------------
# schedule resolution and sweeps


def memory_schedule(cfg: RunConfig) -> MemorySchedule:
    """Resolve the [memory] section into a concrete `MemorySchedule`.

    Calibration-style keys (photon number, pulse-area constants) are inverted
    through the analytic theory; direct amplitudes pass through unchanged.
    """
    if cfg.memory is None:
        raise ConfigError("this command needs a [memory] section")
    m = cfg.memory
    sys_ = cfg.system

    if m.signal_amp is not None:
        signal = complex(m.signal_amp)
    else:
        signal = complex(signal_amp_for_photons(m.photons_per_pulse, m.pulse_width, sys_.gamma))

    def control(direct: float | None, constant: float | None) -> complex:
        if direct is not None:
            return complex(direct)
        return complex(
            control_amp_for_constant(constant, sys_.g0, m.pulse_width, sys_.gamma, sys_.omega_b)
        )

    return MemorySchedule(
        pulse_width=m.pulse_width,
        write_center=m.write_center if m.write_center is not None else 4.0 * m.pulse_width,
        storage_delay=m.storage_delay if m.storage_delay is not None else 7.0 * m.pulse_width,
        signal_amp=signal,
        control_write_amp=control(m.control_write_amp, m.write_constant),
        control_read_amp=control(m.control_read_amp, m.read_constant),
        raman_detuning=m.raman_detuning,
        margin=m.margin,
    )


def sweep_point(cfg: RunConfig, parameter: str, value: float) -> tuple[SystemConfig, MemorySchedule]:
    """Apply one sweep value and return the system plus schedule to run.

    System-side parameters (coupling, phonon) are applied after the base
    schedule is resolved, so control amplitudes stay fixed while e.g. g0
    varies.  Memory-side calibration parameters re-resolve the schedule.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep.parameter {parameter!r} not supported")
    if cfg.memory is None:
        raise ConfigError("sweeps over memory efficiency need a [memory] section")
    section, key = parameter.split(".", 1)
    if section == "memory":
        new_mem = replace(cfg.memory, **_memory_override(key, value))
        new_cfg = replace(cfg, memory=new_mem)
        return new_cfg.system, memory_schedule(new_cfg)
    base_schedule = memory_schedule(cfg)
    field_name = {"g0_in_gamma": "g0", "omega_b_in_gamma": "omega_b",
                  "kappa_b_in_gamma": "kappa_b", "n_thermal": "n_thermal"}[key]
    system = replace(cfg.system, **{field_name: float(value)})
    return system, base_schedule


def _memory_override(key: str, value: float) -> dict:
    if key == "photons_per_pulse":
        return {"photons_per_pulse": float(value), "signal_amp": None}
    if key == "write_constant":
        return {"write_constant": float(value), "control_write_amp": None}
    if key == "read_constant":
        return {"read_constant": float(value), "control_read_amp": None}
    return {key: float(value)}


# ---------------------------------------------------------------------------
# canonical re-serialization


def resolved_dict(cfg: RunConfig) -> dict:
    """Nested plain-value view of the resolved parameters (gamma units)."""
    out: dict = {
        "units": {"gamma_over_2pi_MHz": cfg.system.gamma_over_2pi_MHz},
        "phonon": {
            "omega_b_in_gamma": cfg.system.omega_b,
            "kappa_b_in_gamma": cfg.system.kappa_b,
            "n_thermal": cfg.system.n_thermal,
        },
        "coupling": {"g0_in_gamma": cfg.system.g0},
    }
    if cfg.molecule_name is not None:
        out["molecule"] = {"name": cfg.molecule_name}
    sim: dict = {
        "cutoff": cfg.simulation.cutoff,
        "check_convergence": cfg.simulation.check_convergence,
    }
    for key in ("rtol", "atol", "detuning_min", "detuning_max", "detuning_points",
                "substeps_per_period", "periods_per_window", "sample_stride_periods"):
        val = getattr(cfg.simulation, key)
        if val is not None:
            sim[key] = val
    out["simulation"] = sim
    out["output"] = {"directory": cfg.output.directory, "formats": list(cfg.output.formats)}
    if cfg.system.tones:
        out["tones"] = [_tone_dict(t) for t in cfg.system.tones]
    if cfg.memory is not None:
        sched = memory_schedule(cfg)
        out["memory"] = {
            "pulse_width": sched.pulse_width,
            "signal_amp": sched.signal_amp.real,
            "control_write_amp": sched.control_write_amp.real,
            "control_read_amp": sched.control_read_amp.real,
            "write_center": sched.write_center,
            "storage_delay": sched.storage_delay,
            "raman_detuning": sched.raman_detuning,
            "margin": sched.margin,
        }
    if cfg.sweep is not None:
        out["sweep"] = {
            "parameter": cfg.sweep.parameter,
            "values": list(cfg.sweep.values),
            "experiment": cfg.sweep.experiment,
        }
    return out


def _tone_dict(tone: DriveTone) -> dict:
    d: dict = {
        "role": tone.role,
        "amplitude": tone.amplitude.real,
        "detuning": tone.detuning,
    }
    if isinstance(tone.envelope, GaussianPulse):
        d["envelope"] = "gaussian"
        d["center"] = tone.envelope.center
        d["width"] = tone.envelope.width
    else:
        d["envelope"] = "cw"
    d["reference"] = tone.is_reference
    return d


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def resolved_toml(cfg: RunConfig) -> str:
    """Canonical TOML text of `resolved_dict`; reparsing it is an identity."""
    data = resolved_dict(cfg)
    lines: list[str] = []
    for section in ("units", "molecule", "phonon", "coupling", "simulation", "memory", "output", "sweep"):
        if section not in data:
            continue
        lines.append(f"[{section}]")
        for key, val in data[section].items():
            lines.append(f"{key} = {_toml_value(val)}")
        lines.append("")
    for tone in data.get("tones", []):
        lines.append("[[tones]]")
        for key, val in tone.items():
            lines.append(f"{key} = {_toml_value(val)}")
        lines.append("")
    return "\n".join(lines)
