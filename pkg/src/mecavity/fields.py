"""Field rods: magnet profile along the beam, electrodes and gated drive."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

MAX_DRIVE_VOLTAGE = 2000.0  # V, amplifier limit
DRIVE_BAND = (200.0, 500.0)  # Hz

# Ramp anchors: the field falls from 98 % to 1 % of the plateau over ramp_span.
RAMP_HIGH = 0.98
RAMP_LOW = 0.01


@dataclass(frozen=True)
class RodGeometry:
    length: float = 0.20  # m
    aperture: tuple[float, float] = (0.004, 0.004)  # m x m
    electrode_gap: float = 0.004  # m
    plateau_B: float = 0.185  # T
    plateau_span: float = 0.185  # m
    ramp_span: float = 0.020  # m
    tail_decay: float | None = None  # m; None -> slope-continuous with the ramp

    def __post_init__(self):
        for name in ("length", "electrode_gap", "plateau_span", "ramp_span"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if min(self.aperture) <= 0:
            raise ValueError("aperture must be positive")
        if self.tail_decay is not None and self.tail_decay <= 0:
            raise ValueError("tail_decay must be positive")

    @property
    def decay_length(self) -> float:
        if self.tail_decay is not None:
            return self.tail_decay
        # match the slope of the linear ramp at its 1 % end
        return RAMP_LOW * self.ramp_span / (RAMP_HIGH - RAMP_LOW)


def magnetic_profile(z, geometry: RodGeometry = RodGeometry()):
    """Magnetic field (T) along the beam, z measured from the rod center.

    Flat plateau over ``plateau_span``, linear fall from 98 % to 1 % over
    ``ramp_span`` on each side, then an exponential fringe tail.
    """
    z = np.abs(np.asarray(z, dtype=float))
    g = geometry
    edge = 0.5 * g.plateau_span
    ramp_end = edge + g.ramp_span
    frac = (z - edge) / g.ramp_span
    ramp = RAMP_HIGH - (RAMP_HIGH - RAMP_LOW) * frac
    tail = RAMP_LOW * np.exp(-(z - ramp_end) / g.decay_length)
    rel = np.where(z <= edge, 1.0, np.where(z <= ramp_end, ramp, tail))
    out = g.plateau_B * rel
    return float(out) if out.ndim == 0 else out


def effective_field(profile: Callable, L: float, step: float = 1e-4,
                    window: float | None = None, center: float = 0.0) -> float:
    """Path-averaged field: integral of `profile` over the window, divided by L.

    Composite midpoint rule with the given step.  The window defaults to the
    rod length L centered on `center`; pass a wider window to include the
    fringe extension beyond the rod ends.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    if not step > 0:
        raise ValueError("step must be positive")
    window = L if window is None else window
    n = max(int(math.ceil(window / step - 1e-9)), 1)
    h = window / n
    z = center - 0.5 * window + h * (np.arange(n) + 0.5)
    return float(np.sum(profile(z)) * h / L)


def rod_effective_field(geometry: RodGeometry = RodGeometry(), step: float = 1e-4,
                        window: float | None = None) -> float:
    return effective_field(lambda z: magnetic_profile(z, geometry), geometry.length,
                           step=step, window=window)


def electrode_field(voltage, gap: float):
    """Parallel-plate field V/gap (V/m)."""
    if not gap > 0:
        raise ValueError("electrode gap must be positive")
    return voltage / gap


def transverse_offset_factor(offset: float, half_aperture: float = 0.002) -> float:
    """Relative increase of B off the hole axis: 1 % at 1 mm, quadratic."""
    if abs(offset) > half_aperture:
        raise ValueError(f"offset {offset} m lies outside the {half_aperture} m half-aperture")
    return 1.0 + 0.01 * (abs(offset) / 1e-3) ** 2


@dataclass(frozen=True)
class RodAssembly:
    rods: tuple[RodGeometry, ...] = field(default_factory=lambda: (RodGeometry(),) * 4)
    drive_voltage_peak: float = 2000.0  # V
    drive_frequency: float = 300.0  # Hz, f_mod
    gate_period: float = 20.0  # s, T_AM
    duty: float = 0.5
    orientation_signs: tuple[int, ...] | None = None
    b_eff_override: float | None = None  # T

    def __post_init__(self):
        if len(self.rods) == 0:
            raise ValueError("assembly has no rods")
        if abs(self.drive_voltage_peak) > MAX_DRIVE_VOLTAGE:
            raise ValueError(
                f"drive_voltage_peak {self.drive_voltage_peak} V exceeds the "
                f"{MAX_DRIVE_VOLTAGE:.0f} V amplifier limit"
            )
        if not self.drive_frequency > 0:
            raise ValueError("drive_frequency must be positive")
        lo, hi = DRIVE_BAND
        if not lo <= self.drive_frequency <= hi:
            warnings.warn(
                f"drive frequency {self.drive_frequency} Hz outside the {lo:.0f}-{hi:.0f} Hz band",
                stacklevel=2,
            )
        if not self.gate_period > 0:
            raise ValueError("gate_period must be positive")
        if not 0 < self.duty < 1:
            raise ValueError("duty must lie in (0, 1)")
        signs = self.signs
        if len(signs) != len(self.rods) or any(s not in (1, -1) for s in signs):
            raise ValueError("orientation_signs must hold one +1/-1 per rod")

    @property
    def signs(self) -> tuple[int, ...]:
        if self.orientation_signs is None:
            return (1,) * len(self.rods)
        return tuple(int(s) for s in self.orientation_signs)

    @property
    def electrode_gap(self) -> float:
        return self.rods[0].electrode_gap

    @property
    def e_peak(self) -> float:
        return electrode_field(self.drive_voltage_peak, self.electrode_gap)

    def orientation_factor(self) -> float:
        """Length-weighted net E x B orientation, in [-1, 1]."""
        lengths = np.array([r.length for r in self.rods])
        return float(np.dot(self.signs, lengths) / lengths.sum())


def gate(t, period: float, duty: float = 0.5):
    """1 during the first `duty` fraction of each period, else 0."""
    phase = np.mod(np.asarray(t, dtype=float), period)
    return (phase < duty * period).astype(float)


def drive_waveform(t, assembly: RodAssembly = RodAssembly()):
    """Electric field E(t) in V/m: gated sine at the drive frequency."""
    t = np.asarray(t, dtype=float)
    e = gate(t, assembly.gate_period, assembly.duty) * assembly.e_peak * np.sin(
        2 * np.pi * assembly.drive_frequency * t
    )
    return float(e) if e.ndim == 0 else e


class AssemblyFields(NamedTuple):
    b_eff: float  # T, per-rod convention
    e_rms: float  # V/m
    l_fields: float  # m


def assembly_fields(assembly: RodAssembly, step: float = 1e-4) -> AssemblyFields:
    if not assembly.rods:
        raise ValueError("assembly has no rods")
    lengths = np.array([r.length for r in assembly.rods])
    if assembly.b_eff_override is not None:
        b_eff = float(assembly.b_eff_override)
    else:
        per_rod = np.array([rod_effective_field(r, step) for r in assembly.rods])
        b_eff = float(np.dot(per_rod, lengths) / lengths.sum())
    return AssemblyFields(b_eff, abs(assembly.e_peak) / math.sqrt(2), float(lengths.sum()))


def export_profile(path, geometry: RodGeometry = RodGeometry(), half_range: float = 0.15,
                   step: float = 5e-4) -> None:
    z = np.arange(-half_range, half_range + 0.5 * step, step)
    b = magnetic_profile(z, geometry)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z_m", "B_T"])
        for zi, bi in zip(z, b):
            w.writerow([f"{zi:.6e}", f"{bi:.9e}"])
