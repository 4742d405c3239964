"""Experiment configuration: one JSON document shared by every subcommand.

Example document (every key optional, defaults shown in `DEFAULTS`)::

    {"medium": "N2", "rods": {"drive_frequency": 300, "b_eff": 0.85},
     "noise": {"enabled": false}, "seed": 7}
"""
from __future__ import annotations

import copy
import hashlib
import json
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from . import effects, fields
from .cavity import CavityConfig
from .signal import NoiseModel, PDHConfig

DEFAULTS = {
    "medium": "N2",
    "conditions": {"pressure": effects.BAR, "temperature": effects.REF_TEMPERATURE},
    "meda_ratio": 1.0,
    "effect": "meda",
    "coefficients": None,
    "rods": {
        "count": 4,
        "geometry": {
            "length": 0.20,
            "aperture": [0.004, 0.004],
            "electrode_gap": 0.004,
            "plateau_B": 0.185,
            "plateau_span": 0.185,
            "ramp_span": 0.020,
            "tail_decay": None,
        },
        "drive_voltage_peak": 2000.0,
        "drive_frequency": 300.0,
        "gate_period": 20.0,
        "duty": 0.5,
        "orientation_signs": None,
        # four-rod value used for the expected nitrogen signal; null -> profile integral
        "b_eff": 0.85,
    },
    "cavity": {
        "perimeter": 1.6,
        "finesse": 15000.0,
        "laser_frequency": 2.8178e14,
        "filled_length": 0.8,
    },
    "noise": {
        "enabled": True,
        "shot_floor": 1e-17,
        "excess_factor": 5.0,
        "drift_rate": 0.0,
    },
    "pdh": {"slope": 0.5, "power_scale": 1.0, "power_scale_end": None, "mod_frequency": 2.0e7},
    "lockin": {"f_mod": None, "tau": 1.0, "phase": 0.0, "order": 1},
    "estimator": {"settle": None, "n_periods": 10},
    "sampling": {"rate": 1.0e4},
    "calibration": {"dnu_rms": 6.5e-3, "duration": 60.0},
    "seed": 0,
}


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(where, "unknown key")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _build(section: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(section, str(exc)) from None


@dataclass(frozen=True)
class LockinSettings:
    f_mod: float | None
    tau: float
    phase: float
    order: int


@dataclass(frozen=True)
class EstimatorSettings:
    settle: float | None
    n_periods: int


class ExperimentConfig:
    """Validated experiment description built from a (partial) JSON document."""

    def __init__(self, doc: dict | None = None):
        self.doc = _merge(DEFAULTS, doc or {})
        d = self.doc
        self.medium = d["medium"]
        self.table = None
        if d["coefficients"] is not None:
            try:
                self.table = effects.load_table(d["coefficients"])
            except Exception as exc:
                raise ConfigError("coefficients", str(exc)) from None
        try:
            self.record = effects.lookup_coefficient(self.medium, self.table)
        except effects.UnknownMediumError as exc:
            raise ConfigError("medium", str(exc)) from None
        self.conditions = _build("conditions", effects.Conditions, **d["conditions"])
        if d["effect"] not in ("meda", "melb"):
            raise ConfigError("effect", "must be 'meda' or 'melb'")

        rods = dict(d["rods"])
        count = rods.pop("count")
        geo = dict(rods.pop("geometry"))
        geo["aperture"] = tuple(geo["aperture"])
        geometry = _build("rods.geometry", fields.RodGeometry, **geo)
        if not isinstance(count, int) or count < 1:
            raise ConfigError("rods.count", "need at least one rod")
        signs = rods.pop("orientation_signs")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            self.assembly = _build(
                "rods", fields.RodAssembly,
                rods=(geometry,) * count,
                orientation_signs=None if signs is None else tuple(signs),
                b_eff_override=rods.pop("b_eff"),
                **rods,
            )
        self.warnings = [str(w.message) for w in caught]
        for msg in self.warnings:
            warnings.warn(msg, stacklevel=2)

        self.cavity = _build("cavity", CavityConfig, **d["cavity"])
        self.noise = _build("noise", NoiseModel, rng_seed=int(d["seed"]), **d["noise"])
        self.pdh = _build("pdh", PDHConfig, **d["pdh"])
        self.lockin = LockinSettings(**d["lockin"])
        self.estimator = EstimatorSettings(**d["estimator"])
        self.rate = float(d["sampling"]["rate"])
        self.calibration = dict(d["calibration"])
        self.seed = int(d["seed"])
        self.validate()

    # -- construction helpers ------------------------------------------------
    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        text = Path(path).read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("<document>", "top level must be an object")
        return cls(doc)

    def updated(self, **overrides) -> "ExperimentConfig":
        """New config with dotted-path overrides, e.g. ``updated(**{"noise.enabled": False})``."""
        doc = copy.deepcopy(self.doc)
        for dotted, value in overrides.items():
            node = doc
            *parents, leaf = dotted.split(".")
            for p in parents:
                node = node[p]
            if leaf not in node:
                raise ConfigError(dotted, "unknown key")
            node[leaf] = value
        return ExperimentConfig(doc)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.doc)

    def digest(self) -> str:
        return self._digest

    @cached_property
    def _digest(self) -> str:
        canon = json.dumps(self.doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    # -- derived quantities --------------------------------------------------
    @property
    def f_mod(self) -> float:
        f = self.lockin.f_mod
        return float(self.assembly.drive_frequency if f is None else f)

    @property
    def settle(self) -> float:
        s = self.estimator.settle
        return 5.0 * self.lockin.tau if s is None else float(s)

    @property
    def run_duration(self) -> float:
        return self.estimator.n_periods * self.assembly.gate_period

    def fields(self) -> fields.AssemblyFields:
        return self._fields

    @cached_property
    def _fields(self):
        return fields.assembly_fields(self.assembly)

    def delta_n(self, B, E):
        if self.doc["effect"] == "melb":
            return effects.delta_n_melb(self.record, B, E, self.conditions)
        return effects.delta_n_meda(self.record, B, E, self.conditions,
                                    meda_ratio=self.doc["meda_ratio"])

    def validate(self) -> None:
        if not self.rate > 2 * self.f_mod:
            raise ConfigError(
                "sampling.rate",
                f"sampling constraint violated: rate {self.rate} Hz must exceed "
                f"2 f_mod = {2 * self.f_mod} Hz",
            )
        if not self.lockin.tau > 0:
            raise ConfigError("lockin.tau", "must be positive")
        if self.lockin.order not in (1, 2, 3, 4):
            raise ConfigError("lockin.order", "must be 1..4")
        half = min(self.assembly.duty, 1 - self.assembly.duty) * self.assembly.gate_period
        if not 0 <= self.settle < half:
            raise ConfigError(
                "estimator.settle",
                f"settle {self.settle} s must be shorter than the half-period {half} s",
            )
        if not isinstance(self.estimator.n_periods, int) or self.estimator.n_periods < 1:
            raise ConfigError("estimator.n_periods", "must be a positive integer")
        if self.doc["meda_ratio"] is None and self.record.eta_meda is None \
                and self.doc["effect"] == "meda":
            raise ConfigError("meda_ratio", f"{self.record.medium} needs a MEDA/MELB ratio")
        cal = self.calibration
        if not cal["dnu_rms"] > 0:
            raise ConfigError("calibration.dnu_rms", "must be positive")
        if not cal["duration"] > self.settle:
            raise ConfigError("calibration.duration", "must exceed the settle time")
