"""Experiment configuration: schema, validation, canonical form, hashing.

Configs are JSON files.  Every key is validated; unknown keys are errors so
that typos cannot silently change an experiment.  The canonical dictionary
form is what gets echoed into result files and hashed for provenance.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .operators import PhysicalParams, dispersion_phase

SCENARIOS = (
    "fig2_mutual_info",
    "fig3_transfer",
    "fig4_postselect_map",
    "fig5_hbt",
    "custom",
)

_CAVITY_KINDS = {
    "vacuum": (),
    "fock": ("n",),
    "coherent": ("alpha", "phase"),
}

_ELECTRON_KINDS = {
    "delta": (),
    "comb": ("peaks", "phases"),
}

_TOP_KEYS = {
    "scenario", "g_q", "phi", "cavity1", "cavity2", "electron", "electrons",
    "n_max1", "n_max2", "k_half_range", "out", "rng_seed",
}


def _require_number(value, what, integer=False, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{what} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{what} must be >= {minimum}, got {value!r}")
    return int(value) if integer else float(value)


def _parse_complex(value, what):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(float(value), 0.0)
    if (isinstance(value, (list, tuple)) and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                    for v in value)):
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"{what} must be a number or a [re, im] pair, got {value!r}")


def _check_block(block, what, kinds):
    if not isinstance(block, dict):
        raise ConfigError(f"{what} must be an object, got {block!r}")
    kind = block.get("kind")
    if kind not in kinds:
        raise ConfigError(
            f"{what}.kind must be one of {sorted(kinds)}, got {kind!r}")
    allowed = {"kind", *kinds[kind]}
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {what}")
    return kind


def _parse_cavity(block, what):
    kind = _check_block(block, what, _CAVITY_KINDS)
    if kind == "vacuum":
        return {"kind": "vacuum"}
    if kind == "fock":
        n = _require_number(block.get("n", None), f"{what}.n", integer=True,
                            minimum=0)
        return {"kind": "fock", "n": n}
    alpha = _require_number(block.get("alpha", None), f"{what}.alpha",
                            minimum=0.0)
    phase = _require_number(block.get("phase", 0.0), f"{what}.phase")
    return {"kind": "coherent", "alpha": alpha, "phase": phase}


def _parse_electron(block, what):
    kind = _check_block(block, what, _ELECTRON_KINDS)
    if kind == "delta":
        return {"kind": "delta"}
    peaks = _require_number(block.get("peaks", None), f"{what}.peaks",
                            integer=True, minimum=1)
    phases = block.get("phases")
    if phases is not None:
        if (not isinstance(phases, list) or len(phases) != peaks
                or not all(isinstance(p, (int, float)) and not isinstance(p, bool)
                           for p in phases)):
            raise ConfigError(
                f"{what}.phases must be a list of {peaks} numbers")
        phases = [float(p) for p in phases]
    return {"kind": "comb", "peaks": peaks, "phases": phases}


def _parse_phi(value):
    """Either a number in radians or a physical-parameters block."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value), None
    if isinstance(value, dict):
        unknown = set(value) - {"kinetic_energy_ev", "photon_energy_ev", "z_m"}
        if unknown:
            raise ConfigError(f"unknown key(s) {sorted(unknown)} in phi block")
        try:
            params = PhysicalParams(
                kinetic_energy=_require_number(
                    value.get("kinetic_energy_ev"), "phi.kinetic_energy_ev"),
                photon_energy=_require_number(
                    value.get("photon_energy_ev"), "phi.photon_energy_ev"),
                z=_require_number(value.get("z_m"), "phi.z_m"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        block = {
            "kinetic_energy_ev": params.kinetic_energy,
            "photon_energy_ev": params.photon_energy,
            "z_m": params.z,
        }
        return dispersion_phase(params), block
    raise ConfigError(f"phi must be a number or a physical-parameters block, "
                      f"got {value!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One validated experiment description.

    `phi` is always the resolved FSP phase in radians; when the config gave a
    physical-parameters block instead, the block is kept in `phi_params` so
    the echo reproduces the input form.
    """

    scenario: str = "custom"
    g_q: complex = 0.1
    phi: float = 0.0
    phi_params: dict | None = None
    cavity1: dict = field(default_factory=lambda: {"kind": "vacuum"})
    cavity2: dict = field(default_factory=lambda: {"kind": "vacuum"})
    electron: dict = field(default_factory=lambda: {"kind": "delta"})
    electrons: int = 1
    n_max1: int | None = None
    n_max2: int | None = None
    k_half_range: int | None = None
    out: str = "results"
    rng_seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"scenario must be one of {list(SCENARIOS)}, got {self.scenario!r}")
        object.__setattr__(self, "g_q", complex(self.g_q))
        if abs(self.g_q) >= 2.0:
            raise ConfigError(f"|g_q| = {abs(self.g_q):.3g} is outside the "
                              "supported range (< 2)")
        if not math.isfinite(self.phi):
            raise ConfigError("phi must be finite")
        if self.electrons < 0:
            raise ConfigError("electrons must be nonnegative")
        for name in ("n_max1", "n_max2", "k_half_range"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be >= 1 when given")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError(f"config root must be an object, got {type(raw).__name__}")
        unknown = set(raw) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        kwargs = {}
        if "scenario" in raw:
            kwargs["scenario"] = raw["scenario"]
        if "g_q" in raw:
            kwargs["g_q"] = _parse_complex(raw["g_q"], "g_q")
        if "phi" in raw:
            phi, block = _parse_phi(raw["phi"])
            kwargs["phi"] = phi
            kwargs["phi_params"] = block
        for name in ("cavity1", "cavity2"):
            if name in raw:
                kwargs[name] = _parse_cavity(raw[name], name)
        if "electron" in raw:
            kwargs["electron"] = _parse_electron(raw["electron"], "electron")
        if "electrons" in raw:
            kwargs["electrons"] = _require_number(raw["electrons"], "electrons",
                                                  integer=True, minimum=0)
        for name in ("n_max1", "n_max2", "k_half_range", "rng_seed"):
            if name in raw and raw[name] is not None:
                kwargs[name] = _require_number(raw[name], name, integer=True)
        if "out" in raw:
            if not isinstance(raw["out"], str):
                raise ConfigError(f"out must be a string, got {raw['out']!r}")
            kwargs["out"] = raw["out"]
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        """Canonical JSON-compatible form; re-parses to an equal config."""
        out = {
            "scenario": self.scenario,
            "g_q": [self.g_q.real, self.g_q.imag],
            "phi": self.phi_params if self.phi_params is not None else self.phi,
            "cavity1": dict(self.cavity1),
            "cavity2": dict(self.cavity2),
            "electron": dict(self.electron),
            "electrons": self.electrons,
            "n_max1": self.n_max1,
            "n_max2": self.n_max2,
            "k_half_range": self.k_half_range,
            "out": self.out,
            "rng_seed": self.rng_seed,
        }
        return out

    def replace(self, **overrides) -> "ExperimentConfig":
        merged = self.to_dict()
        merged.update(overrides)
        # complex values arrive from code, not JSON; normalize them
        if isinstance(merged["g_q"], complex):
            merged["g_q"] = [merged["g_q"].real, merged["g_q"].imag]
        drop = [k for k, v in merged.items()
                if v is None and k in ("n_max1", "n_max2", "k_half_range")]
        for k in drop:
            del merged[k]
        return ExperimentConfig.from_dict(merged)

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True,
                             separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]
