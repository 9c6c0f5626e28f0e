"""
Transverse part of the biphoton amplitude in the monochromatic limit.

F_x is a Gaussian of the difference combination of the angular deviations
(set by the pump diameter a), F_z a sinc of their sum (set by the crystal
length l). Deviations are measured outward from the pump axis on each
photon's own side, so a rigid rotation of the pair is (+d, -d) and an
opening of the pair is (+d, +d).
"""

import math
from dataclasses import dataclass
from typing import Literal, Tuple

import numpy as np
import pandas as pd

from .dispersion import CrystalSpec
from .errors import ValidationError
from .numerics import bracketed_root
from .phasematch import PhaseMatchPoint, PumpSpec

Frame = Literal['internal', 'external']

# small-deviation regime of the amplitude expansion
MAX_DEVIATION = 0.1


def sinc(x):
    """Unnormalized sin(x)/x, series near zero"""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)


SINC_HALF_ROOT = bracketed_root(lambda x: float(sinc(x)) - 0.5, 1.0, 3.0)


def _check_frame(frame: str) -> str:
    if frame not in ('internal', 'external'):
        raise ValidationError(f"Frame must be 'internal' or 'external', got {frame!r}")
    return frame


@dataclass(frozen=True)
class AngularDeviation:
    d_theta_s: float
    d_theta_i: float
    frame: Frame = 'internal'

    def __post_init__(self):
        _check_frame(self.frame)
        for name, value in (('d_theta_s', self.d_theta_s), ('d_theta_i', self.d_theta_i)):
            if not abs(value) < MAX_DEVIATION:
                raise ValidationError(f"|{name}|={abs(value)!r} rad outside the small-deviation regime")


def snell_factors(base: PhaseMatchPoint) -> Tuple[float, float]:
    """d(internal deviation) / d(external deviation) for signal and idler"""
    factor_s = math.cos(base.theta_s_ext) / (base.n_s * math.cos(base.theta_s_int))
    factor_i = math.cos(base.theta_i_ext) / (base.n_i * math.cos(base.theta_i_int))
    return factor_s, factor_i


def to_internal(dev: AngularDeviation, base: PhaseMatchPoint) -> AngularDeviation:
    if dev.frame == 'internal':
        return dev
    factor_s, factor_i = snell_factors(base)
    return AngularDeviation(dev.d_theta_s * factor_s, dev.d_theta_i * factor_i, 'internal')


@dataclass(frozen=True)
class AmplitudeCoefficients:
    """Per-radian weights of the deviations inside F_x (cx_*) and F_z (cz_*), in 1/m"""
    cx_s: float
    cx_i: float
    cz_s: float
    cz_i: float


def coefficients(base: PhaseMatchPoint, frame: Frame = 'internal') -> AmplitudeCoefficients:
    k_s = base.n_s / base.lambda_s
    k_i = base.n_i / base.lambda_i
    theta_s = abs(base.theta_s_int)
    theta_i = abs(base.theta_i_int)
    coeffs = AmplitudeCoefficients(
        cx_s=k_s * math.cos(theta_s),
        cx_i=k_i * math.cos(theta_i),
        cz_s=k_s * math.sin(theta_s),
        cz_i=k_i * math.sin(theta_i),
    )
    if _check_frame(frame) == 'internal':
        return coeffs
    factor_s, factor_i = snell_factors(base)
    return AmplitudeCoefficients(coeffs.cx_s * factor_s, coeffs.cx_i * factor_i,
                                 coeffs.cz_s * factor_s, coeffs.cz_i * factor_i)


def fx_values(d_s, d_i, coeffs: AmplitudeCoefficients, diameter: float):
    difference = coeffs.cx_s * np.asarray(d_s) - coeffs.cx_i * np.asarray(d_i)
    return np.exp(-((2.0 * math.pi * diameter) ** 2 / 4.0) * difference ** 2)


def fz_values(d_s, d_i, coeffs: AmplitudeCoefficients, length: float):
    total = coeffs.cz_s * np.asarray(d_s) + coeffs.cz_i * np.asarray(d_i)
    # leading minus of the argument dropped: sinc is even
    return sinc(math.pi * length * total)


def f_x(dev: AngularDeviation, base: PhaseMatchPoint, pump: PumpSpec) -> float:
    """Gaussian transverse factor set by the pump diameter"""
    internal = to_internal(dev, base)
    return float(fx_values(internal.d_theta_s, internal.d_theta_i, coefficients(base), pump.beam_diameter_a))


def f_z(dev: AngularDeviation, base: PhaseMatchPoint, crystal: CrystalSpec) -> float:
    """Sinc longitudinal factor set by the crystal length"""
    internal = to_internal(dev, base)
    return float(fz_values(internal.d_theta_s, internal.d_theta_i, coefficients(base), crystal.length_l))


def correlation(d_s, d_i, base: PhaseMatchPoint, pump: PumpSpec, crystal: CrystalSpec,
                frame: Frame = 'external'):
    """Vectorized (F_x, F_z) for deviation arrays given in `frame`"""
    coeffs = coefficients(base, frame)
    return (fx_values(d_s, d_i, coeffs, pump.beam_diameter_a),
            fz_values(d_s, d_i, coeffs, crystal.length_l))


@dataclass(frozen=True)
class GridSpec:
    half_width_s: float = 5e-3
    half_width_i: float = 5e-3
    points_s: int = 201
    points_i: int = 201
    frame: Frame = 'external'

    def __post_init__(self):
        _check_frame(self.frame)
        if self.points_s < 2 or self.points_i < 2:
            raise ValidationError(
                f"Grid needs at least 2 points per axis, got {self.points_s}x{self.points_i}"
            )
        for value in (self.half_width_s, self.half_width_i):
            if not 0 < value < MAX_DEVIATION:
                raise ValidationError(f"Grid half-width {value!r} rad outside (0, {MAX_DEVIATION})")

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        return (np.linspace(-self.half_width_s, self.half_width_s, self.points_s),
                np.linspace(-self.half_width_i, self.half_width_i, self.points_i))


@dataclass(frozen=True)
class AmplitudeMap:
    base_point: PhaseMatchPoint
    grid_s: np.ndarray
    grid_i: np.ndarray
    f_x: np.ndarray
    f_z: np.ndarray
    f_sq: np.ndarray
    pump_diameter_a: float
    crystal_length_l: float
    frame: Frame

    def to_frame(self) -> pd.DataFrame:
        mesh_s, mesh_i = np.meshgrid(self.grid_s, self.grid_i, indexing='ij')
        return pd.DataFrame({
            'd_theta_s': mesh_s.ravel(),
            'd_theta_i': mesh_i.ravel(),
            'f_x': self.f_x.ravel(),
            'f_z': self.f_z.ravel(),
            'f_sq': self.f_sq.ravel(),
        })


def correlation_map(base: PhaseMatchPoint, pump: PumpSpec, crystal: CrystalSpec,
                    grid: GridSpec = GridSpec()) -> AmplitudeMap:
    """F_x, F_z and F^2 = (F_x F_z)^2 on a rectangular deviation grid, rows along d_theta_s"""
    grid_s, grid_i = grid.axes()
    mesh_s, mesh_i = np.meshgrid(grid_s, grid_i, indexing='ij')
    fx, fz = correlation(mesh_s, mesh_i, base, pump, crystal, grid.frame)
    return AmplitudeMap(
        base_point=base,
        grid_s=grid_s,
        grid_i=grid_i,
        f_x=fx,
        f_z=fz,
        f_sq=(fx * fz) ** 2,
        pump_diameter_a=pump.beam_diameter_a,
        crystal_length_l=crystal.length_l,
        frame=grid.frame,
    )


def fz_half_width(base: PhaseMatchPoint, crystal: CrystalSpec, frame: Frame = 'external') -> float:
    """Half-width at half maximum of F_z along d_theta_s = d_theta_i"""
    coeffs = coefficients(base, frame)
    total = coeffs.cz_s + coeffs.cz_i
    if total == 0.0:
        return math.inf
    return SINC_HALF_ROOT / (math.pi * crystal.length_l * total)


def ridge_angles(base: PhaseMatchPoint, frame: Frame = 'external') -> Tuple[float, float]:
    """
    Directions in the (d_theta_s, d_theta_i) plane, measured from the
    d_theta_s axis, along which F_x and F_z respectively stay equal to 1.
    """
    coeffs = coefficients(base, frame)
    return (math.atan2(coeffs.cx_s, coeffs.cx_i),
            math.atan2(-coeffs.cz_s, coeffs.cz_i))
