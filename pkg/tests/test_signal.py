import math
import warnings

import numpy as np
import pytest
from scipy.signal import welch

from mecavity.signal import (NoiseModel, SignalTrace, inject_calibration, lockin_demodulate,
                             ripple_fraction, run_seed, synthesize_noise, synthesize_run)

from conftest import make_config


def tone_trace(rms, f, rate=5000.0, duration=10.0, phase=0.0):
    t = np.arange(int(duration * rate)) / rate
    return SignalTrace(math.sqrt(2) * rms * np.sin(2 * np.pi * f * t + phase), rate,
                       meta={"slope": 1.0})


def test_noise_psd_welch_oracle():
    model = NoiseModel(shot_floor=1e-16, excess_factor=1.0, rng_seed=3)
    tr = synthesize_noise(model, 100.0, 1e4)
    f, p = welch(tr.samples, fs=tr.rate, nperseg=4096)
    assert p[1:-1].mean() == pytest.approx(1e-32, rel=0.1)


def test_noise_errors_and_determinism():
    model = NoiseModel()
    with pytest.raises(ValueError, match="empty"):
        synthesize_noise(model, 0.0, 1e4)
    with pytest.raises(ValueError, match="2 f_mod"):
        synthesize_noise(model, 1.0, 500.0, f_mod=300.0)
    a = synthesize_noise(model, 1.0, 1e3, seed=5).samples
    b = synthesize_noise(model, 1.0, 1e3, seed=5).samples
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, synthesize_noise(model, 1.0, 1e3, seed=6).samples)


def test_noise_model_invariants():
    with pytest.raises(ValueError):
        NoiseModel(excess_factor=10.0)
    with pytest.raises(ValueError):
        NoiseModel(excess_factor=0.5)
    with pytest.raises(ValueError):
        NoiseModel(shot_floor=0.0)


def test_drift_only():
    model = NoiseModel(drift_rate=1e-18, enabled=False)
    tr = synthesize_noise(model, 2.0, 100.0)
    np.testing.assert_allclose(tr.samples, 1e-18 * np.arange(200) / 100.0)


def test_run_seeds_are_independent_streams():
    a = np.random.default_rng(run_seed(1, 0)).standard_normal(4)
    b = np.random.default_rng(run_seed(1, 1)).standard_normal(4)
    c = np.random.default_rng(run_seed(1, 0)).standard_normal(4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, c)


def test_zero_fields_zero_noise(quiet_config):
    cfg = quiet_config.updated(**{"rods.b_eff": 0.0})
    assert np.all(synthesize_run(cfg).samples == 0.0)


def test_n2_run_is_gated_sine(quiet_config):
    cfg = quiet_config
    tr = synthesize_run(cfg)
    t = tr.times
    on = (t % 20.0) < 10.0
    d = cfg.pdh.slope
    expected_rms = d * 3.8e-3
    assert np.sqrt(np.mean(tr.samples[on] ** 2)) == pytest.approx(expected_rms, rel=0.01)
    assert np.all(tr.samples[~on] == 0.0)
    # phase-coherent with the drive
    ref = np.sin(2 * np.pi * cfg.f_mod * t[on])
    assert np.corrcoef(ref, tr.samples[on])[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_drift_baseline(quiet_config):
    cfg = quiet_config.updated(**{"rods.b_eff": 0.0, "noise.drift_rate": 1e-19})
    tr = synthesize_run(cfg, duration=10.0)
    expected = cfg.pdh.slope * cfg.cavity.laser_frequency * 1e-19 * np.arange(len(tr)) / tr.rate
    np.testing.assert_allclose(tr.samples, expected, rtol=1e-12)


def test_run_rejects_undersampling():
    from mecavity.config import ConfigError

    with pytest.raises(ConfigError, match="sampling"):
        make_config(sampling={"rate": 500.0})


def test_inject_calibration():
    base = SignalTrace(np.zeros(50000), 5000.0, meta={"slope": 0.5})
    one = inject_calibration(base, 6.5e-3, 300.0)
    assert np.sqrt(np.mean(one.samples**2)) == pytest.approx(0.5 * 6.5e-3, rel=1e-6)
    assert np.array_equal(inject_calibration(base, 0.0, 300.0).samples, base.samples)
    both = inject_calibration(inject_calibration(base, 1e-3, 300.0), 2e-3, 300.0)
    np.testing.assert_allclose(both.samples, inject_calibration(base, 3e-3, 300.0).samples,
                               atol=1e-15)
    with pytest.raises(ValueError, match="volts"):
        inject_calibration(SignalTrace([0.0], 1.0, unit="hertz"), 1e-3, 0.1)


def test_lockin_steady_state_closed_form():
    tau, rate, a = 0.1, 5000.0, 2.0
    out = lockin_demodulate(tone_trace(a, 300.0, rate, duration=1.0), 300.0, tau)
    t = out.times
    # single pole driven by a step of height a: a * (1 - exp(-t / tau)) up to the ripple
    expected = a * (1 - np.exp(-(t + 1 / rate) / tau))
    late = t > 10 * tau * 0.5
    np.testing.assert_allclose(out.samples[late], expected[late], atol=a * 2 * ripple_fraction(300, tau))
    assert out.samples[-1] == pytest.approx(a, rel=0.01)


def test_lockin_orthogonality():
    out3 = lockin_demodulate(tone_trace(1.0, 900.0), 300.0, 0.5)
    assert abs(out3.samples[-5000:].mean()) < 0.01
    quad = lockin_demodulate(tone_trace(1.0, 300.0), 300.0, 0.5, phase=math.pi / 2)
    assert abs(quad.samples[-5000:].mean()) < 0.01


def test_lockin_warns_on_short_tau():
    with pytest.warns(UserWarning, match="ripple"):
        lockin_demodulate(tone_trace(1.0, 300.0, duration=0.1), 300.0, 1e-4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        lockin_demodulate(tone_trace(1.0, 300.0, duration=0.1), 300.0, 1.0)


def test_lockin_linearity():
    a, b = tone_trace(1.0, 300.0), tone_trace(0.3, 310.0, phase=1.0)
    rng = np.random.default_rng(0)
    n = SignalTrace(rng.standard_normal(len(a)), a.rate)
    s = a.with_samples(a.samples + b.samples + n.samples)
    outs = [lockin_demodulate(x, 300.0, 0.2).samples for x in (a, b, n, s)]
    np.testing.assert_allclose(outs[3], outs[0] + outs[1] + outs[2], atol=1e-12)


def test_lockin_higher_order():
    out = lockin_demodulate(tone_trace(1.0, 300.0), 300.0, 0.2, order=4)
    assert out.samples[-1] == pytest.approx(1.0, rel=0.01)
    with pytest.raises(ValueError):
        lockin_demodulate(tone_trace(1.0, 300.0), 300.0, 0.2, order=5)


def test_calibration_proportionality():
    d = 0.7
    levels = []
    cals = np.array([1e-3, 3e-3, 6.5e-3, 1e-2])
    base = SignalTrace(np.zeros(40000), 4000.0, meta={"slope": d})
    for c in cals:
        out = lockin_demodulate(inject_calibration(base, c, 300.0), 300.0, 0.5)
        levels.append(out.samples[int(5 * 0.5 * 4000):].mean())
    slope, intercept = np.polyfit(cals, levels, 1)
    assert slope == pytest.approx(d, rel=0.01)
    assert abs(intercept) < 1e-3 * d * cals.max()


def test_demodulated_noise_floor():
    # in-phase output of sqrt(2) x sin(...) for white x of one-sided ASD A has
    # variance A^2 / (4 tau) after a single pole
    asd, tau, d, nu = 4e-17, 0.05, 0.5, 2.8178e14
    cfg = make_config(noise={"shot_floor": asd / 4, "excess_factor": 4.0},
                      rods={"b_eff": 0.0}, lockin={"tau": tau}, sampling={"rate": 2000.0},
                      estimator={"n_periods": 3})
    tr = synthesize_run(cfg)
    out = lockin_demodulate(tr, cfg.f_mod, tau)
    std = out.samples[int(10 * tau * tr.rate):].std()
    assert std == pytest.approx(asd * nu * d * math.sqrt(1 / (4 * tau)), rel=0.2)


def test_run_determinism(noisy_config):
    a = synthesize_run(noisy_config, seed=11).samples
    b = synthesize_run(noisy_config, seed=11).samples
    assert a.tobytes() == b.tobytes()
