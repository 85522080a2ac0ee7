"""Run configuration: JSON schema, scenario presets, validation.

A run file has up to six sections:

    {
      "scenario": "fig2a_uphill" | ... | "custom",
      "physical":  { ... },          # required iff scenario == "custom"
      "numerics":  { ... },          # optional overrides
      "initial_state": { ... },      # optional override
      "sweep":     { ... },          # optional; built in for the sweep preset
      "output":    {"dir": "out"},
      "meta":      { ... }           # free-form, ignored (lets manifests re-run)
    }

All laboratory frequencies are entered in Hz as plain (2*pi-free) numbers and
converted to angular frequencies internally.  The pump strength is given
either directly (eta_hz) or through the stationary lattice depth it should
produce (target_depth_er); the detuning either directly (delta_c_hz) or
relative to the collective shift (delta_c_minus_nu0_over_kappa,
delta0_over_kappa).  Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .units import HBAR, SR88_MASS, SR_LATTICE_WAVELENGTH, SR_LINEWIDTH

_TWO_PI = 2 * math.pi

_ATOMS = {
    "sr88": {
        "atom_mass_kg": SR88_MASS,
        "lattice_wavelength_nm": SR_LATTICE_WAVELENGTH * 1e9,
        "linewidth_hz": SR_LINEWIDTH / _TWO_PI,
    },
}

_TOP_KEYS = {"scenario", "physical", "numerics", "initial_state", "sweep", "output", "meta"}
_PHYSICAL_KEYS = {
    "atom", "atom_mass_kg", "lattice_wavelength_nm",
    "bloch_hz", "bias_force_newton", "gravity",
    "kappa_hz", "u0_hz", "n_atoms",
    "delta_c_hz", "delta_c_minus_nu0_over_kappa", "delta0_over_kappa",
    "eta_hz", "target_depth_er",
    "linewidth_hz", "atom_detuning_hz",
}
_NUMERICS_KEYS = {
    "sites", "points_per_site", "periods", "samples_per_period",
    "steps_per_sample", "basis_margin_sites", "backaction", "run_ladder",
    "ladder_steps_per_sample",
}
_INITIAL_KEYS = {"kind", "center_site", "width_sites", "weights"}
_SWEEP_KEYS = {"parameter", "values", "target_depth_er"}
_OUTPUT_KEYS = {"dir"}


@dataclass(frozen=True)
class PhysicalSpec:
    """Laboratory inputs exactly as configured (Hz, nm, kg, N)."""

    atom_mass_kg: float
    lattice_wavelength_nm: float
    bloch_hz: float | None
    bias_force_newton: float | None
    kappa_hz: float
    u0_hz: float
    n_atoms: int
    delta_kind: str       # "delta_c_hz" | "delta_c_minus_nu0_over_kappa" | "delta0_over_kappa"
    delta_value: float
    pump_kind: str        # "eta_hz" | "target_depth_er"
    pump_value: float
    linewidth_hz: float
    atom_detuning_hz: float

    def bias_force(self) -> float:
        if self.bias_force_newton is not None:
            return self.bias_force_newton
        period = self.lattice_wavelength_nm * 1e-9 / 2.0
        return -abs(self.bloch_hz) * _TWO_PI * HBAR / period


@dataclass(frozen=True)
class NumericsSpec:
    sites: int = 128
    points_per_site: int = 16
    periods: float = 12.0
    samples_per_period: int = 64
    steps_per_sample: int = 630          # dt = T_B / (samples * steps) ~ 1e-3
    basis_margin_sites: int = 12
    backaction: bool = True
    run_ladder: bool = True
    ladder_steps_per_sample: int = 158   # ladder dt ~ 4e-3


@dataclass(frozen=True)
class InitialSpec:
    kind: str = "delocalized"
    center_site: int = 0
    width_sites: float = 20.0
    weights: tuple | None = None


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    target_depth_er: float


@dataclass(frozen=True)
class RunConfig:
    name: str
    physical: PhysicalSpec
    numerics: NumericsSpec
    initial: InitialSpec
    sweep: SweepSpec | None
    output_dir: str
    branches: tuple = ()  # (name, RunConfig) pairs for composite scenarios


def _require(condition, path, message):
    if not condition:
        raise ConfigError(f"{path}: {message}")


def _check_keys(block, allowed, path):
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")


def _physical_from_dict(block: dict, path: str = "physical") -> PhysicalSpec:
    _check_keys(block, _PHYSICAL_KEYS, path)
    merged = dict(block)
    atom = merged.pop("atom", None)
    if atom is not None:
        _require(atom in _ATOMS, f"{path}.atom", f"unknown atom {atom!r}")
        for key, val in _ATOMS[atom].items():
            merged.setdefault(key, val)

    for key in ("atom_mass_kg", "lattice_wavelength_nm", "kappa_hz", "u0_hz", "n_atoms"):
        _require(key in merged, f"{path}.{key}", "missing")
    _require(merged["atom_mass_kg"] > 0, f"{path}.atom_mass_kg", "must be > 0")
    _require(merged["lattice_wavelength_nm"] > 0, f"{path}.lattice_wavelength_nm", "must be > 0")
    _require(merged["kappa_hz"] > 0, f"{path}.kappa_hz", "must be > 0")
    _require(int(merged["n_atoms"]) >= 1, f"{path}.n_atoms", "must be >= 1")

    force_keys = [k for k in ("bloch_hz", "bias_force_newton", "gravity") if merged.get(k)]
    _require(len(force_keys) == 1, path,
             "exactly one of bloch_hz, bias_force_newton, gravity must be set")
    bias = None
    bloch = None
    if "bias_force_newton" in merged and merged["bias_force_newton"]:
        bias = float(merged["bias_force_newton"])
        _require(bias < 0, f"{path}.bias_force_newton", "must be < 0")
    elif merged.get("gravity"):
        bias = -merged["atom_mass_kg"] * 9.80665
    else:
        bloch = float(merged["bloch_hz"])
        _require(bloch > 0, f"{path}.bloch_hz", "must be > 0")

    delta_keys = [k for k in ("delta_c_hz", "delta_c_minus_nu0_over_kappa", "delta0_over_kappa")
                  if k in merged]
    _require(len(delta_keys) == 1, path, "exactly one detuning key must be set")
    pump_keys = [k for k in ("eta_hz", "target_depth_er") if k in merged]
    _require(len(pump_keys) == 1, path, "exactly one of eta_hz, target_depth_er must be set")
    if pump_keys[0] == "target_depth_er":
        _require(merged["target_depth_er"] * merged["u0_hz"] > 0, f"{path}.target_depth_er",
                 "depth and u0 must have the same sign")

    return PhysicalSpec(
        atom_mass_kg=float(merged["atom_mass_kg"]),
        lattice_wavelength_nm=float(merged["lattice_wavelength_nm"]),
        bloch_hz=bloch,
        bias_force_newton=bias,
        kappa_hz=float(merged["kappa_hz"]),
        u0_hz=float(merged["u0_hz"]),
        n_atoms=int(merged["n_atoms"]),
        delta_kind=delta_keys[0],
        delta_value=float(merged[delta_keys[0]]),
        pump_kind=pump_keys[0],
        pump_value=float(merged[pump_keys[0]]),
        linewidth_hz=float(merged.get("linewidth_hz", SR_LINEWIDTH / _TWO_PI)),
        atom_detuning_hz=float(merged.get("atom_detuning_hz", -1e7)),
    )


def _numerics_from_dict(block: dict | None, base: NumericsSpec, path="numerics") -> NumericsSpec:
    if block is None:
        return base
    _check_keys(block, _NUMERICS_KEYS, path)
    merged = {**base.__dict__, **block}
    spec = NumericsSpec(**merged)
    _require(spec.sites >= 16, f"{path}.sites", "need at least 16 sites")
    _require(spec.points_per_site >= 16, f"{path}.points_per_site", "need >= 16 points per site")
    n_points = spec.sites * spec.points_per_site
    _require(n_points & (n_points - 1) == 0, path,
             f"sites*points_per_site = {n_points} must be a power of two")
    _require(spec.periods > 0, f"{path}.periods", "must be > 0")
    _require(spec.samples_per_period >= 20, f"{path}.samples_per_period", "need >= 20")
    _require(spec.steps_per_sample >= 1, f"{path}.steps_per_sample", "must be >= 1")
    _require(spec.basis_margin_sites >= 8, f"{path}.basis_margin_sites", "need >= 8")
    return spec


def _initial_from_dict(block: dict | None, base: InitialSpec, path="initial_state") -> InitialSpec:
    if block is None:
        return base
    _check_keys(block, _INITIAL_KEYS, path)
    merged = {**base.__dict__, **block}
    if merged.get("weights") is not None:
        merged["weights"] = tuple(merged["weights"])
    spec = InitialSpec(**merged)
    _require(spec.kind in ("delocalized", "localized", "custom"), f"{path}.kind",
             "must be delocalized, localized or custom")
    if spec.kind == "delocalized":
        _require(spec.width_sites > 0, f"{path}.width_sites", "must be > 0")
    if spec.kind == "custom":
        _require(spec.weights is not None, f"{path}.weights", "required for custom packets")
    return spec


def _sweep_from_dict(block: dict | None, path="sweep") -> SweepSpec | None:
    if block is None:
        return None
    _check_keys(block, _SWEEP_KEYS, path)
    _require(block.get("parameter") == "delta0_over_kappa", f"{path}.parameter",
             "only delta0_over_kappa sweeps are supported")
    values = block.get("values")
    _require(isinstance(values, (list, tuple)) and len(values) >= 2, f"{path}.values",
             "need a list of at least two values")
    _require("target_depth_er" in block, f"{path}.target_depth_er",
             "sweeps must fix the stationary depth")
    return SweepSpec(
        parameter="delta0_over_kappa",
        values=tuple(float(v) for v in values),
        target_depth_er=float(block["target_depth_er"]),
    )


# ---------------------------------------------------------------------------
# scenario presets

_SR_BASE = {
    "atom": "sr88",
    "bloch_hz": 744.5,       # figure-reproduction value; the running text rounds to 745
    "kappa_hz": 1000.0,
    "u0_hz": -1.0,
    "n_atoms": 1000,         # N u0 = -kappa
    "atom_detuning_hz": -1e7,
}

_FIG5_DELTAS = (-2.5, -2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0, 2.5)

PRESETS: dict[str, dict] = {
    "fig2a_uphill": {
        "physical": {**_SR_BASE, "delta_c_minus_nu0_over_kappa": 1.3, "target_depth_er": -3.0},
        "numerics": {},
        "initial_state": {"kind": "delocalized", "center_site": 0, "width_sites": 20.0},
    },
    "fig2a_downhill": {
        "physical": {**_SR_BASE, "delta_c_minus_nu0_over_kappa": -0.7, "target_depth_er": -3.0},
        "numerics": {},
        "initial_state": {"kind": "delocalized", "center_site": 0, "width_sites": 20.0},
    },
    "fig2b_breathing": {
        "physical": {**_SR_BASE, "delta_c_minus_nu0_over_kappa": -0.7, "target_depth_er": -3.0},
        "numerics": {"sites": 64},
        "initial_state": {"kind": "localized", "center_site": 0},
    },
    "zero_detuning": {
        "physical": {**_SR_BASE, "delta0_over_kappa": 0.0, "target_depth_er": -3.0},
        "numerics": {},
        "initial_state": {"kind": "delocalized", "center_site": 0, "width_sites": 20.0},
    },
    "static_lattice": {
        "physical": {**_SR_BASE, "delta_c_minus_nu0_over_kappa": -0.7, "target_depth_er": -3.0},
        "numerics": {"sites": 64, "backaction": False, "run_ladder": False, "periods": 6.0},
        "initial_state": {"kind": "delocalized", "center_site": 0, "width_sites": 20.0},
    },
    "fig4": {
        "branches": {
            "uphill": {
                "physical": {**_SR_BASE, "delta_c_minus_nu0_over_kappa": 1.3, "target_depth_er": -3.0},
                "numerics": {"periods": 101.0, "steps_per_sample": 324},
                "initial_state": {"kind": "delocalized", "center_site": 0, "width_sites": 20.0},
            },
            "downhill": {
                "physical": {**_SR_BASE, "delta_c_minus_nu0_over_kappa": -0.7, "target_depth_er": -3.0},
                "numerics": {"periods": 101.0, "steps_per_sample": 324},
                "initial_state": {"kind": "delocalized", "center_site": 0, "width_sites": 20.0},
            },
        },
    },
    "fig5_sweep": {
        "physical": {**_SR_BASE, "delta0_over_kappa": 0.0, "target_depth_er": -3.0},
        "numerics": {"periods": 101.0, "steps_per_sample": 324},
        "initial_state": {"kind": "delocalized", "center_site": 0, "width_sites": 20.0},
        "sweep": {
            "parameter": "delta0_over_kappa",
            "values": list(_FIG5_DELTAS),
            "target_depth_er": -3.0,
        },
    },
}


def list_presets() -> list[str]:
    return sorted(PRESETS)


def _build(name: str, raw: dict, output_dir: str) -> RunConfig:
    if "branches" in raw:
        branches = tuple(
            (sub, _build(f"{name}.{sub}", sub_raw, str(Path(output_dir) / sub)))
            for sub, sub_raw in raw["branches"].items()
        )
        first = branches[0][1]
        return RunConfig(
            name=name, physical=first.physical, numerics=first.numerics,
            initial=first.initial, sweep=None, output_dir=output_dir,
            branches=branches,
        )
    physical = _physical_from_dict(raw["physical"])
    numerics = _numerics_from_dict(raw.get("numerics"), NumericsSpec())
    initial = _initial_from_dict(raw.get("initial_state"), InitialSpec())
    sweep = _sweep_from_dict(raw.get("sweep"))
    return RunConfig(
        name=name, physical=physical, numerics=numerics,
        initial=initial, sweep=sweep, output_dir=output_dir,
    )


def preset_config(name: str, output_dir: str = "out") -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(
            f"scenario: unknown preset {name!r}; available: {', '.join(list_presets())}"
        )
    return _build(name, PRESETS[name], output_dir)


def load_config(path, preset_override: str | None = None) -> RunConfig:
    """Parse and fully validate a run file; every violation names its field."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: not valid JSON ({err})") from None
    if not isinstance(raw, dict) or not raw:
        raise ConfigError(f"{path}: top level must be a non-empty object")
    _check_keys(raw, _TOP_KEYS, "config")

    output_dir = "out"
    if "output" in raw:
        _check_keys(raw["output"], _OUTPUT_KEYS, "output")
        output_dir = str(raw["output"].get("dir", "out"))

    scenario = preset_override or raw.get("scenario")
    _require(scenario is not None, "scenario", "missing (or pass a preset name)")

    if scenario == "custom":
        _require("physical" in raw, "physical", "required for the custom scenario")
        base = {
            "physical": raw["physical"],
            "numerics": raw.get("numerics", {}),
            "initial_state": raw.get("initial_state", {}),
        }
        if raw.get("sweep") is not None:
            base["sweep"] = raw["sweep"]
        return _build("custom", base, output_dir)

    _require("physical" not in raw, "physical",
             "forbidden when a preset scenario is selected (use scenario: custom)")
    config = preset_config(scenario, output_dir)
    if raw.get("numerics") or raw.get("initial_state"):
        if config.branches:
            raise ConfigError("numerics/initial_state overrides cannot apply to composite scenarios")
        numerics = _numerics_from_dict(raw.get("numerics"), config.numerics)
        initial = _initial_from_dict(raw.get("initial_state"), config.initial)
        config = RunConfig(
            name=config.name, physical=config.physical, numerics=numerics,
            initial=initial, sweep=config.sweep, output_dir=config.output_dir,
        )
    return config


def config_to_dict(config: RunConfig) -> dict:
    """Re-expressed as a loadable 'custom' configuration (manifest payload)."""
    phys = config.physical
    physical = {
        "atom_mass_kg": phys.atom_mass_kg,
        "lattice_wavelength_nm": phys.lattice_wavelength_nm,
        "kappa_hz": phys.kappa_hz,
        "u0_hz": phys.u0_hz,
        "n_atoms": phys.n_atoms,
        phys.delta_kind: phys.delta_value,
        phys.pump_kind: phys.pump_value,
        "linewidth_hz": phys.linewidth_hz,
        "atom_detuning_hz": phys.atom_detuning_hz,
    }
    if phys.bloch_hz is not None:
        physical["bloch_hz"] = phys.bloch_hz
    else:
        physical["bias_force_newton"] = phys.bias_force_newton
    out = {
        "scenario": "custom",
        "physical": physical,
        "numerics": dict(config.numerics.__dict__),
        "initial_state": {
            k: v for k, v in config.initial.__dict__.items()
            if v is not None and (k != "weights" or v is not None)
        },
        "output": {"dir": config.output_dir},
    }
    if config.initial.weights is None:
        out["initial_state"].pop("weights", None)
    else:
        out["initial_state"]["weights"] = list(config.initial.weights)
    if config.sweep is not None:
        out["sweep"] = {
            "parameter": config.sweep.parameter,
            "values": list(config.sweep.values),
            "target_depth_er": config.sweep.target_depth_er,
        }
    return out
