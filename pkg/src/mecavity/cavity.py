"""Ring-cavity arithmetic: FSR, linewidth and index-to-frequency conversion."""
from __future__ import annotations

from dataclasses import dataclass

from scipy.constants import c

ND_YAG_FREQUENCY = 2.8178e14  # Hz


@dataclass(frozen=True)
class CavityConfig:
    perimeter: float = 1.6  # m
    finesse: float = 15000.0
    laser_frequency: float = ND_YAG_FREQUENCY  # Hz
    filled_length: float = 0.8  # m

    def __post_init__(self):
        if not self.perimeter > 0:
            raise ValueError("perimeter must be positive")
        if not 0 < self.filled_length <= self.perimeter:
            raise ValueError("filled_length must lie in (0, perimeter]")
        if not self.finesse > 1:
            raise ValueError("finesse must exceed 1")
        if not self.laser_frequency > 0:
            raise ValueError("laser_frequency must be positive")

    @property
    def fill(self) -> float:
        return self.filled_length / self.perimeter


def free_spectral_range(config: CavityConfig) -> float:
    return c / config.perimeter


def linewidth(config: CavityConfig) -> float:
    """FWHM of a resonance, FSR / finesse."""
    return free_spectral_range(config) / config.finesse


def frequency_shift(dn, config: CavityConfig):
    """Resonance shift for an index change dn over the field-filled length."""
    return config.laser_frequency * config.fill * dn


def counterprop_split(dn_meda, config: CavityConfig, orientation: float = 1):
    """nu_ccw - nu_cw for a directional anisotropy dn_meda = n+ - n-.

    With orientation +1 the clockwise beam propagates along +E x B.  The
    split is modelled as an effective index change converted with unit
    efficiency; polarization optics that would turn a Jones birefringence
    into a directional split are not modelled (assumption).
    """
    return orientation * frequency_shift(dn_meda, config)
