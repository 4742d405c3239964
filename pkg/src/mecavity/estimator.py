"""On/off differencing estimator, calibration and sensitivity.

The field gate alternates on and off halves with period T_AM.  Each period
contributes dV_i = mean(on) - mean(off) with the lock-in settling time cut
from the start of each half; the result is the plain average over periods.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import welch

from .signal import (SignalTrace, demodulate_run, lockin_demodulate, run_seed,
                     synthesize_run)


class CalibrationBracketError(ValueError):
    pass


@dataclass
class MeasurementEstimate:
    value: float
    sigma: float  # standard error, nan when n_periods == 1
    n_periods: int
    unit: str = "volts"
    calibration: dict | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_periods < 1:
            raise ValueError("n_periods must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isnan(self.sigma):
            d["sigma"] = None
        return d

    def __str__(self):
        sig = "n/a" if math.isnan(self.sigma) else f"{self.sigma:.3e}"
        return f"{self.value:.6e} +/- {sig} {self.unit} (N={self.n_periods})"


@dataclass(frozen=True)
class CalibrationRun:
    dnu_cal: float  # Hz rms injected
    level: float  # V, steady-state demodulated level
    timestamp: float  # s

    def __post_init__(self):
        if not self.dnu_cal > 0:
            raise ValueError("dnu_cal must be positive")

    @property
    def factor(self) -> float:
        return self.level / self.dnu_cal

    def to_dict(self):
        return asdict(self)


def _first_index(t, t0, rate):
    return int(math.ceil((t - t0) * rate - 1e-6))


def segment_periods(demod: SignalTrace, T_AM: float | None = None, settle: float | None = None,
                    duty: float | None = None, gate: str | None = None) -> np.ndarray:
    """Per-period (on_mean, off_mean) pairs, shape (N, 2).

    Periods start at ``gate_t0 + k * T_AM`` (metadata, default 0).  The first
    `settle` seconds of every half are excluded; `settle` defaults to five
    lock-in time constants.
    """
    meta = demod.meta
    T_AM = meta.get("gate_period") if T_AM is None else T_AM
    if T_AM is None or not T_AM > 0:
        raise ValueError("gate period T_AM unknown")
    duty = meta.get("duty", 0.5) if duty is None else duty
    gate = meta.get("gate", "on-first") if gate is None else gate
    if gate not in ("on-first", "off-first"):
        raise ValueError("gate must be 'on-first' or 'off-first'")
    if settle is None:
        settle = 5.0 * meta.get("tau", 0.0)
    first_len = duty * T_AM
    second_len = T_AM - first_len
    if settle < 0 or settle >= min(first_len, second_len):
        raise ValueError(f"settle {settle} s must be shorter than each half-period")

    rate, t0 = demod.rate, demod.t0
    gate_t0 = meta.get("gate_t0", 0.0)
    n = len(demod)
    t_end = t0 + n / rate
    k0 = math.ceil((t0 - gate_t0) / T_AM - 1e-9)
    x = demod.samples
    pairs = []
    k = k0
    while True:
        start = gate_t0 + k * T_AM
        stop = start + T_AM
        if stop > t_end + 1e-9:
            break
        edges = [start + settle, start + first_len, start + first_len + settle, stop]
        i = [_first_index(e, t0, rate) for e in edges]
        first = x[i[0]:i[1]].mean()
        second = x[i[2]:i[3]].mean()
        pairs.append((first, second) if gate == "on-first" else (second, first))
        k += 1
    if not pairs:
        raise ValueError("trace shorter than one gate period")
    return np.array(pairs)


def on_off_estimate(pairs, unit: str = "volts") -> MeasurementEstimate:
    """Average of on - off over the periods, with its standard error."""
    pairs = np.asarray(pairs, dtype=float)
    if pairs.size == 0:
        raise ValueError("no periods to average")
    dv = pairs[:, 0] - pairs[:, 1]
    n = dv.size
    sigma = float(dv.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return MeasurementEstimate(float(dv.mean()), sigma, n, unit, meta={"method": "on-off"})


def symmetric_estimate(pairs, unit: str = "volts") -> MeasurementEstimate:
    """Off-on-off variant: each on mean minus the average of its neighbouring off means.

    Cancels a linear drift exactly for on-first gating at the cost of one
    period.  Not part of the reference procedure.
    """
    pairs = np.asarray(pairs, dtype=float)
    if len(pairs) < 2:
        raise ValueError("need at least two periods")
    dv = pairs[1:, 0] - 0.5 * (pairs[:-1, 1] + pairs[1:, 1])
    n = dv.size
    sigma = float(dv.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return MeasurementEstimate(float(dv.mean()), sigma, n, unit, meta={"method": "off-on-off"})


def measure_calibration(trace: SignalTrace, dnu_cal: float, f_mod: float, tau: float = 1.0,
                        settle: float | None = None, phase: float = 0.0,
                        timestamp: float | None = None) -> CalibrationRun:
    """Demodulate a calibration trace and average it after the settling time."""
    demod = lockin_demodulate(trace, f_mod, tau, phase)
    settle = 5 * tau if settle is None else settle
    i0 = _first_index(trace.t0 + settle, trace.t0, trace.rate)
    if i0 >= len(demod):
        raise ValueError("calibration trace shorter than the settling time")
    level = float(demod.samples[i0:].mean())
    if timestamp is None:
        timestamp = trace.t0 + 0.5 * trace.duration
    return CalibrationRun(dnu_cal, level, timestamp)


def calibration_factor(before: CalibrationRun, after: CalibrationRun, t: float) -> float:
    """Discriminant factor (V/Hz) at time t, linear between two calibrations."""
    if before.level <= 0 or after.level <= 0:
        raise ValueError("calibration levels must be positive")
    t_b, t_a = before.timestamp, after.timestamp
    if t_b > t_a:
        raise CalibrationBracketError("'before' calibration is later than 'after'")
    if not t_b <= t <= t_a:
        raise CalibrationBracketError(f"t = {t} s outside calibration bracket [{t_b}, {t_a}] s")
    if t_a == t_b:
        return 0.5 * (before.factor + after.factor)
    w = (t - t_b) / (t_a - t_b)
    return (1 - w) * before.factor + w * after.factor


def to_frequency(estimate: MeasurementEstimate, factor: float,
                 calibration: dict | None = None) -> MeasurementEstimate:
    if not factor > 0:
        raise ValueError("calibration factor must be positive")
    if estimate.unit != "volts":
        raise ValueError(f"expected an estimate in volts, got {estimate.unit}")
    cal = dict(calibration or {})
    cal.setdefault("interpolated", factor)
    return MeasurementEstimate(estimate.value / factor, estimate.sigma / factor,
                               estimate.n_periods, "hertz", cal, dict(estimate.meta))


def sensitivity_psd(trace: SignalTrace, nu: float, factor: float, f_mod: float | None = None,
                    band: float = 0.5, n_segments: int = 8) -> float:
    """Relative frequency noise per sqrt(Hz) of an error-signal trace.

    The trace is converted to Hz with `factor` (V/Hz), its one-sided PSD is
    Welch-averaged (Hann window, 50 % overlap, `n_segments` segments) and the
    mean over the band f_mod * (1 +/- band) is square-rooted and divided by
    `nu`.  Bins within the window main lobe around f_mod are skipped so a
    signal line does not count as noise.  Without f_mod the whole spectrum
    except DC and Nyquist is used.
    """
    if not factor > 0:
        raise ValueError("factor must be positive")
    if n_segments < 8:
        raise ValueError("need at least 8 averaging segments")
    n = len(trace)
    nperseg = (2 * n) // (n_segments + 1)
    if nperseg < 16:
        raise ValueError(f"trace too short for {n_segments} Welch segments")
    f, p = welch(trace.samples / factor, fs=trace.rate, window="hann", nperseg=nperseg,
                 noverlap=nperseg // 2, detrend="constant", scaling="density")
    df = f[1] - f[0]
    if f_mod is None:
        sel = (f > 0) & (f < f[-1])
    else:
        sel = (np.abs(f - f_mod) <= band * f_mod) & (np.abs(f - f_mod) > 2.5 * df) & (f > 0)
    if not sel.any():
        raise ValueError("no spectral bins in the requested band")
    return float(math.sqrt(p[sel].mean()) / nu)


# --- end-to-end helpers ------------------------------------------------------

def calibrate(config, timestamp: float, power_scale: float | None = None, seed=None,
              noise: bool = True) -> CalibrationRun:
    """Simulated EOM calibration with the fields off, centred on `timestamp`."""
    cal = config.calibration
    overrides = {"pdh.power_scale_end": None}
    if power_scale is not None:
        overrides["pdh.power_scale"] = power_scale
    if not noise:
        overrides["noise.enabled"] = False
    cfg = config.updated(**overrides)
    trace = synthesize_run(cfg, seed=seed, duration=cal["duration"], fields_on=False,
                           dnu_cal=cal["dnu_rms"])
    run = measure_calibration(trace, cal["dnu_rms"], cfg.f_mod, cfg.lockin.tau, cfg.settle,
                              cfg.lockin.phase)
    return CalibrationRun(run.dnu_cal, run.level, timestamp)


def bracketing_calibrations(config, seed=None):
    """Calibrations at the start and end of a run, tracking any gain drift."""
    ss = np.random.SeedSequence(config.seed if seed is None else seed)
    s_before, s_after = ss.spawn(2)
    end = config.pdh.power_scale_end
    before = calibrate(config, 0.0, config.pdh.power_scale, seed=s_before)
    after = calibrate(config, config.run_duration,
                      config.pdh.power_scale if end is None else end, seed=s_after)
    return before, after


def estimate_run(demod: SignalTrace, config) -> MeasurementEstimate:
    pairs = segment_periods(demod, config.assembly.gate_period, config.settle,
                            config.assembly.duty)
    est = on_off_estimate(pairs)
    est.meta.update(component="in-phase", phase=config.lockin.phase)
    return est


def simulate_estimate(config, seed=None) -> MeasurementEstimate:
    """One simulated run demodulated and reduced to an on/off estimate in volts."""
    trace = synthesize_run(config, seed=seed)
    return estimate_run(demodulate_run(trace, config), config)


def _ensemble_member(args):
    config_doc, master, index = args
    from .config import ExperimentConfig

    return simulate_estimate(ExperimentConfig(config_doc), seed=run_seed(master, index))


def run_ensemble(config, n_runs: int, master_seed: int = 0, workers: int = 1):
    """Estimates for `n_runs` independent seeds derived from `master_seed`."""
    if workers <= 1:
        return [simulate_estimate(config, seed=run_seed(master_seed, i)) for i in range(n_runs)]
    jobs = [(config.to_dict(), master_seed, i) for i in range(n_runs)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_ensemble_member, jobs, chunksize=max(1, n_runs // (4 * workers))))
