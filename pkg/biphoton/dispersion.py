"""
Refractive-index model for negative uniaxial Type-I crystals (BBO by default)
"""

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .errors import ValidationError, WavelengthRangeError

# Sellmeier form is not trusted outside this window
OPERATING_RANGE = (300e-9, 800e-9)

PRESET_DIR = Path(__file__).parent / 'presets'


@dataclass(frozen=True)
class SellmeierSet:
    """
    Coefficients of n^2 = b0 + b1 / (lambda^2 - b2) - b3 * lambda^2,
    lambda in micrometers.
    """
    b0: float
    b1: float
    b2: float
    b3: float

    def __post_init__(self):
        lo_um = OPERATING_RANGE[0] * 1e6
        if not self.b2 < lo_um ** 2:
            raise ValidationError(
                f"Sellmeier pole b2={self.b2} um^2 must lie below ({lo_um} um)^2"
            )
        grid = np.linspace(lo_um, OPERATING_RANGE[1] * 1e6, 51)
        if np.any(self.index_squared(grid) <= 1.0):
            raise ValidationError("Sellmeier set gives n^2 <= 1 inside the operating range")

    def index_squared(self, wavelength_um):
        lam2 = np.square(wavelength_um)
        return self.b0 + self.b1 / (lam2 - self.b2) - self.b3 * lam2


BBO_ORDINARY = SellmeierSet(2.7405, 0.0184, 0.0179, 0.0155)
BBO_EXTRAORDINARY = SellmeierSet(2.3730, 0.0128, 0.0156, 0.0044)


@dataclass(frozen=True)
class CrystalSpec:
    """Birefringent crystal: length, cut angle and Sellmeier sets"""
    length_l: float
    cut_angle_alpha: float
    ordinary: SellmeierSet = field(default=BBO_ORDINARY)
    extraordinary: SellmeierSet = field(default=BBO_EXTRAORDINARY)
    name: str = 'BBO'

    def __post_init__(self):
        if not self.length_l > 0:
            raise ValidationError(f"Crystal length must be positive, got {self.length_l!r}")
        if not 0.0 < self.cut_angle_alpha < math.pi / 2:
            raise ValidationError(
                f"Cut angle must lie in (0, pi/2), got {self.cut_angle_alpha!r} rad"
            )

    def with_cut_angle(self, alpha: float) -> 'CrystalSpec':
        return replace(self, cut_angle_alpha=alpha)

    def with_length(self, length: float) -> 'CrystalSpec':
        return replace(self, length_l=length)


def check_wavelength(wavelength: float) -> float:
    lo, hi = OPERATING_RANGE
    if not lo <= wavelength <= hi:
        raise WavelengthRangeError(wavelength, lo, hi)
    return wavelength


def index_ordinary(wavelength: float, sellmeier: SellmeierSet) -> float:
    """Index from a Sellmeier set at `wavelength` (meters)"""
    check_wavelength(wavelength)
    return math.sqrt(float(sellmeier.index_squared(wavelength * 1e6)))


def index_extraordinary_at_angle(wavelength: float, theta: float, crystal: CrystalSpec) -> float:
    """
    Extraordinary index for propagation at `theta` from the optic axis:
    1/n(theta)^2 = cos^2/n_o^2 + sin^2/n_E^2.
    """
    if not 0.0 <= theta <= math.pi / 2:
        raise ValidationError(f"Propagation angle must lie in [0, pi/2], got {theta!r}")
    n_o = index_ordinary(wavelength, crystal.ordinary)
    n_e = index_ordinary(wavelength, crystal.extraordinary)
    if theta == 0.0:
        return n_o
    inverse_sq = (math.cos(theta) / n_o) ** 2 + (math.sin(theta) / n_e) ** 2
    return 1.0 / math.sqrt(inverse_sq)


def extraordinary_index_slope(wavelength: float, theta: float, crystal: CrystalSpec) -> float:
    """d n_e(theta) / d theta"""
    n_o = index_ordinary(wavelength, crystal.ordinary)
    n_e = index_ordinary(wavelength, crystal.extraordinary)
    n_theta = index_extraordinary_at_angle(wavelength, theta, crystal)
    return -n_theta ** 3 * math.sin(theta) * math.cos(theta) * (1.0 / n_e ** 2 - 1.0 / n_o ** 2)


def read_crystal_presets(path: Optional[Path] = None) -> Dict[str, Dict[str, str]]:
    """Raw key-value sections of the crystal preset file, keyed by section name"""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    preset_path = Path(path) if path else PRESET_DIR / 'crystals.ini'
    with open(preset_path, 'r', encoding='utf-8') as handle:
        parser.read_file(handle)
    return {name: dict(parser[name]) for name in parser.sections()}
