"""Expected signals and integration times for a planned measurement."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import effects
from .cavity import ND_YAG_FREQUENCY

SWEEP_COLUMNS = ("medium", "B_T", "E_Vpm", "dn", "dnu_Hz", "T_snr1_s")


@dataclass(frozen=True)
class ExperimentPlan:
    medium: str = "N2"
    b_eff: float = 0.85  # T
    e_rms: float = 3.5e5  # V/m
    l_fields: float = 0.8  # m
    laser_frequency: float = ND_YAG_FREQUENCY  # Hz
    perimeter: float = 1.6  # m
    sensitivity: float = 1e-16  # relative, per sqrt(Hz)
    target_snr: float = 1.0
    effect: str = "meda"
    meda_ratio: float | None = 1.0
    conditions: effects.Conditions | None = None

    def __post_init__(self):
        if not self.sensitivity > 0:
            raise ValueError("sensitivity must be positive")
        if not self.target_snr > 0:
            raise ValueError("target_snr must be positive")
        if not 0 < self.l_fields <= self.perimeter:
            raise ValueError("l_fields must lie in (0, perimeter]")
        if not self.laser_frequency > 0:
            raise ValueError("laser_frequency must be positive")
        if self.effect not in ("meda", "melb"):
            raise ValueError("effect must be 'meda' or 'melb'")

    @property
    def fill(self) -> float:
        return self.l_fields / self.perimeter

    @classmethod
    def from_config(cls, config, sensitivity: float, target_snr: float = 1.0):
        f = config.fields()
        return cls(
            medium=config.record.medium, b_eff=f.b_eff, e_rms=f.e_rms, l_fields=f.l_fields,
            laser_frequency=config.cavity.laser_frequency, perimeter=config.cavity.perimeter,
            sensitivity=sensitivity, target_snr=target_snr, effect=config.doc["effect"],
            meda_ratio=config.doc["meda_ratio"], conditions=config.conditions,
        )

    @classmethod
    def from_dict(cls, doc: dict):
        doc = dict(doc)
        cond = doc.pop("conditions", None)
        if cond is not None:
            doc["conditions"] = effects.Conditions(**cond)
        return cls(**doc)


def plan_delta_n(plan: ExperimentPlan, B=None, E=None):
    B = plan.b_eff if B is None else B
    E = plan.e_rms if E is None else E
    if plan.effect == "melb":
        return effects.delta_n_melb(plan.medium, B, E, plan.conditions)
    return effects.delta_n_meda(plan.medium, B, E, plan.conditions, meda_ratio=plan.meda_ratio)


def expected_signal(plan: ExperimentPlan) -> float:
    """Signed rms frequency modulation nu * fill * dn (Hz)."""
    return plan.laser_frequency * plan.fill * plan_delta_n(plan)


def time_to_snr(plan: ExperimentPlan) -> float:
    """Integration time (s) for the target SNR, white noise averaging as sqrt(T)."""
    rel = abs(expected_signal(plan)) / plan.laser_frequency
    if rel == 0:
        raise ValueError("expected signal is zero; no integration time reaches the target SNR")
    return (plan.target_snr * plan.sensitivity / rel) ** 2


def dn_unit_sensitivity(plan: ExperimentPlan) -> float:
    """Sensitivity expressed in multiples of the medium's dn per sqrt(Hz)."""
    dn = abs(plan_delta_n(plan))
    if dn == 0:
        raise ValueError("medium index change is zero under the plan fields")
    return (plan.sensitivity / plan.fill) / dn


def sweep(plan: ExperimentPlan, B_values, E_values) -> list[dict]:
    rows = []
    for B in np.atleast_1d(B_values):
        for E in np.atleast_1d(E_values):
            p = replace(plan, b_eff=float(B), e_rms=float(E))
            dnu = expected_signal(p)
            try:
                t = time_to_snr(replace(p, target_snr=1.0))
            except ValueError:
                t = float("inf")
            rows.append({"medium": p.medium, "B_T": p.b_eff, "E_Vpm": p.e_rms,
                         "dn": plan_delta_n(p), "dnu_Hz": dnu, "T_snr1_s": t})
    return rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (v if isinstance(v, str) else f"{v:.9e}") for k, v in r.items()})
