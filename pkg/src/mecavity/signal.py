"""Error-signal synthesis and lock-in demodulation.

The counterpropagating error signal is modeled as a linear frequency
discriminant: V(t) = D * power_scale(t) * [dnu_signal(t) + nu * noise(t)].
All frequencies are differences in Hz; the optical carrier never appears
as an absolute number in a trace.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import cavity, fields

UNITS = ("volts", "hertz", "dimensionless")


@dataclass(frozen=True)
class NoiseModel:
    shot_floor: float = 1e-17  # relative frequency noise per sqrt(Hz)
    excess_factor: float = 5.0
    drift_rate: float = 0.0  # relative frequency per s
    rng_seed: int = 0
    enabled: bool = True  # white noise on/off; drift is independent

    def __post_init__(self):
        if not self.shot_floor > 0:
            raise ValueError("shot_floor must be positive")
        if not 1.0 <= self.excess_factor < 10.0:
            raise ValueError("excess_factor must lie in [1, 10)")

    @property
    def asd(self) -> float:
        """One-sided amplitude spectral density of the white part, /sqrt(Hz)."""
        return self.excess_factor * self.shot_floor if self.enabled else 0.0


@dataclass(frozen=True)
class PDHConfig:
    slope: float = 0.5  # V/Hz at unit power
    power_scale: float = 1.0
    power_scale_end: float | None = None  # linear drift of the gain across a run
    mod_frequency: float = 2.0e7  # Hz, metadata only

    def __post_init__(self):
        if not self.slope > 0:
            raise ValueError("slope must be positive")
        if not self.power_scale > 0:
            raise ValueError("power_scale must be positive")
        if self.power_scale_end is not None and not self.power_scale_end > 0:
            raise ValueError("power_scale_end must be positive")

    def gain(self, frac=0.0):
        """Discriminant slope (V/Hz) at fraction `frac` of the run."""
        end = self.power_scale if self.power_scale_end is None else self.power_scale_end
        return self.slope * (self.power_scale + (end - self.power_scale) * np.asarray(frac))


@dataclass
class SignalTrace:
    samples: np.ndarray
    rate: float
    t0: float = 0.0
    unit: str = "volts"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("trace needs at least one sample")
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        if self.unit not in UNITS:
            raise ValueError(f"unit must be one of {UNITS}")

    def __len__(self):
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.rate

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate

    def with_samples(self, samples, **meta) -> "SignalTrace":
        return SignalTrace(samples, self.rate, self.t0, self.unit, {**self.meta, **meta})


def run_seed(master: int, index: int) -> np.random.SeedSequence:
    """Independent generator stream for run `index` of an ensemble."""
    return np.random.SeedSequence(master, spawn_key=(index,))


def _seed_meta(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"seed": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return {"seed": seed}


def _n_samples(duration, rate):
    if not rate > 0:
        raise ValueError("rate must be positive")
    n = int(round(duration * rate))
    if n < 1:
        raise ValueError("duration too short: empty trace")
    return n


def synthesize_noise(model: NoiseModel, duration: float, rate: float,
                     f_mod: float | None = None, seed=None, t0: float = 0.0) -> SignalTrace:
    """White relative-frequency noise plus a linear drift.

    The white part has one-sided PSD ``model.asd**2``, so its per-sample
    standard deviation is ``asd * sqrt(rate / 2)``.
    """
    if f_mod is not None and not rate > 2 * f_mod:
        raise ValueError(f"rate {rate} Hz must exceed 2 f_mod = {2 * f_mod} Hz")
    n = _n_samples(duration, rate)
    seed = model.rng_seed if seed is None else seed
    rng = np.random.default_rng(seed)
    t = np.arange(n) / rate
    x = model.asd * math.sqrt(rate / 2) * rng.standard_normal(n)
    if model.drift_rate:
        x = x + model.drift_rate * t
    return SignalTrace(x, rate, t0, "dimensionless", {**_seed_meta(seed), "stage": "noise"})


def _tone(t, dnu_rms, f_mod, phase=0.0):
    return math.sqrt(2) * dnu_rms * np.sin(2 * np.pi * f_mod * t + phase)


def signal_frequency(t, config, fields_on: bool = True):
    """Field-induced split nu_ccw - nu_cw (Hz) at times t."""
    t = np.asarray(t, dtype=float)
    if not fields_on:
        return np.zeros_like(t)
    b_eff = config.fields().b_eff
    e_t = fields.drive_waveform(t, config.assembly)
    dn = config.delta_n(b_eff, e_t)
    return cavity.counterprop_split(dn, config.cavity, config.assembly.orientation_factor())


def synthesize_run(config, seed=None, duration: float | None = None, t0: float = 0.0,
                   fields_on: bool = True, dnu_cal: float = 0.0) -> SignalTrace:
    """Error-signal trace (volts) for one run of the experiment described by `config`.

    `dnu_cal` adds an always-on calibration modulation (Hz rms) at f_mod.
    Time is absolute: the field gate starts "on" at t = 0.
    """
    config.validate()
    f_mod = config.f_mod
    rate = config.rate
    if duration is None:
        duration = config.run_duration
    seed = config.seed if seed is None else seed
    n = _n_samples(duration, rate)
    t = t0 + np.arange(n) / rate
    dnu = signal_frequency(t, config, fields_on)
    if dnu_cal:
        dnu = dnu + _tone(t, dnu_cal, f_mod)
    noise = synthesize_noise(config.noise, duration, rate, f_mod, seed=seed).samples
    gain = config.pdh.gain(np.arange(n) / n)
    v = gain * (dnu + config.cavity.laser_frequency * noise)
    meta = {
        **_seed_meta(seed),
        "stage": "raw",
        "digest": config.digest(),
        "f_mod": f_mod,
        "gate_period": config.assembly.gate_period,
        "duty": config.assembly.duty,
        "gate": "on-first",
        "gate_t0": 0.0,
        "fields_on": bool(fields_on),
        "dnu_cal": dnu_cal,
        "slope": config.pdh.slope,
        "power_scale": config.pdh.power_scale,
    }
    return SignalTrace(v, rate, t0, "volts", meta)


def inject_calibration(trace: SignalTrace, dnu_cal_rms: float, f_mod: float,
                       slope: float | None = None, phase: float = 0.0) -> SignalTrace:
    """Add the EOM calibration tone D * sqrt(2) * dnu_cal_rms * sin(2 pi f_mod t)."""
    if trace.unit != "volts":
        raise ValueError(f"calibration needs a trace in volts, got {trace.unit}")
    if slope is None:
        try:
            slope = trace.meta["slope"] * trace.meta.get("power_scale", 1.0)
        except KeyError:
            raise ValueError("trace carries no discriminant slope; pass slope") from None
    if dnu_cal_rms == 0:
        return trace.with_samples(trace.samples.copy())
    added = slope * _tone(trace.times, dnu_cal_rms, f_mod, phase)
    return trace.with_samples(trace.samples + added,
                              dnu_cal=trace.meta.get("dnu_cal", 0.0) + dnu_cal_rms)


def ripple_fraction(f_mod: float, tau: float, order: int = 1) -> float:
    """Residual 2 f_mod ripple of the cascaded single-pole filter, relative to DC."""
    return (1.0 + (2 * np.pi * 2 * f_mod * tau) ** 2) ** (-order / 2)


def lockin_demodulate(trace: SignalTrace, f_mod: float, tau: float = 1.0,
                      phase: float = 0.0, order: int = 1) -> SignalTrace:
    """In-phase lock-in output, rms convention.

    Multiplies by sqrt(2) sin(2 pi f_mod t + phase) and low-passes with
    `order` cascaded single-pole stages of time constant `tau`, so a tone
    A sin(2 pi f_mod t) settles to A / sqrt(2).
    """
    if not trace.rate > 2 * f_mod:
        raise ValueError(f"rate {trace.rate} Hz must exceed 2 f_mod = {2 * f_mod} Hz")
    if not tau > 0:
        raise ValueError("tau must be positive")
    if order not in (1, 2, 3, 4):
        raise ValueError("order must be 1..4")
    if ripple_fraction(f_mod, tau, order) > 0.01:
        warnings.warn(f"tau = {tau} s passes more than 1% of the 2 f_mod ripple", stacklevel=2)
    a = math.exp(-1.0 / (trace.rate * tau))
    y = math.sqrt(2) * trace.samples * np.sin(2 * np.pi * f_mod * trace.times + phase)
    for _ in range(order):
        y = lfilter([1.0 - a], [1.0, -a], y)
    return trace.with_samples(y, stage="demod", f_mod=f_mod, tau=tau, phase=phase, order=order,
                              component="in-phase")


def demodulate_run(trace: SignalTrace, config) -> SignalTrace:
    lk = config.lockin
    return lockin_demodulate(trace, config.f_mod, lk.tau, lk.phase, lk.order)

