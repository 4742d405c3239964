import pytest
from hypothesis import given
from hypothesis import strategies as st

from mecavity.cavity import (CavityConfig, counterprop_split, free_spectral_range,
                             frequency_shift, linewidth)

ROUNDED_NU = CavityConfig(laser_frequency=2.8e14)


def test_fsr():
    assert free_spectral_range(CavityConfig()) == pytest.approx(187.37e6, rel=1e-4)
    assert free_spectral_range(CavityConfig(perimeter=3.2, filled_length=0.8)) == pytest.approx(
        93.685e6, rel=1e-4)
    assert free_spectral_range(CavityConfig(perimeter=3.2)) * 2 == free_spectral_range(CavityConfig())


def test_linewidth():
    assert linewidth(CavityConfig(finesse=15000)) == pytest.approx(12.49e3, rel=1e-3)
    assert linewidth(CavityConfig(finesse=50000)) == pytest.approx(3.747e3, rel=1e-3)
    assert linewidth(CavityConfig(finesse=30000)) * 2 == pytest.approx(
        linewidth(CavityConfig(finesse=15000)))


def test_frequency_shift():
    assert frequency_shift(2.7e-17, ROUNDED_NU) == pytest.approx(3.8e-3, rel=0.01)
    assert frequency_shift(0.0, ROUNDED_NU) == 0.0
    assert frequency_shift(2.01e-23, ROUNDED_NU) == pytest.approx(2.814e-9, rel=1e-12)


def test_counterprop_split():
    assert counterprop_split(2.7e-17, ROUNDED_NU, +1) == pytest.approx(3.78e-3, rel=1e-12)
    assert counterprop_split(2.7e-17, ROUNDED_NU, -1) == -counterprop_split(2.7e-17, ROUNDED_NU, +1)
    assert counterprop_split(0.0, ROUNDED_NU) == 0.0


@given(dn=st.floats(-1e-10, 1e-10), fill=st.floats(0.01, 1.0), nu=st.floats(1e13, 1e15))
def test_shift_properties(dn, fill, nu):
    full = CavityConfig(laser_frequency=nu, filled_length=1.6)
    part = CavityConfig(laser_frequency=nu, filled_length=1.6 * fill)
    assert frequency_shift(dn, part) == pytest.approx(fill * frequency_shift(dn, full),
                                                      rel=1e-12, abs=1e-300)
    assert frequency_shift(dn, part) / nu == pytest.approx(fill * dn, rel=1e-12, abs=1e-300)
    assert counterprop_split(-dn, part, -1) == pytest.approx(counterprop_split(dn, part, 1),
                                                             rel=1e-15, abs=1e-300)


def test_config_validation():
    with pytest.raises(ValueError):
        CavityConfig(filled_length=2.0)
    with pytest.raises(ValueError):
        CavityConfig(finesse=1.0)
