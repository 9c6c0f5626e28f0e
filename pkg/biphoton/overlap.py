"""
Overlap between down- and up-conversion phase matching: versus optic-axis
misalignment, versus displacement from the 1:1 imaging plane, and the
displacement-averaged spectral overlap of a finite crystal.
"""

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Optional

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from .amplitude import AngularDeviation, correlation
from .dispersion import CrystalSpec
from .errors import DomainError, ValidationError
from .numerics import simpson_mean
from .phasematch import PhaseMatchPoint, PumpSpec, angle_derivative_wrt_cut, solve_emission_angles
from .utils import logger

Axis = Literal['misalignment_deg', 'displacement_m', 'wavelength_nm']

# wavelength used in place of the exact degenerate branch point
DEGENERATE_PROXY_NM = 701.0
QUADRATURE_NODES = 129


@dataclass(frozen=True)
class ImagingSystem:
    """Thin lens relaying the down-conversion crystal onto the up-conversion crystal"""
    focal_length_f: float = 50e-3
    object_distance: Optional[float] = None
    image_distance: Optional[float] = None

    def __post_init__(self):
        if not self.focal_length_f > 0:
            raise ValidationError(f"Focal length must be positive, got {self.focal_length_f!r}")
        if self.object_distance is None:
            object.__setattr__(self, 'object_distance', 2.0 * self.focal_length_f)
        if self.image_distance is None:
            object.__setattr__(self, 'image_distance', 2.0 * self.focal_length_f)
        lens = 1.0 / self.object_distance + 1.0 / self.image_distance
        if abs(lens * self.focal_length_f - 1.0) > 1e-9:
            raise ValidationError(
                f"Object/image distances {self.object_distance!r}, {self.image_distance!r} m "
                f"violate the thin-lens relation for f={self.focal_length_f!r} m"
            )

    @property
    def magnification(self) -> float:
        return -self.image_distance / self.object_distance


@dataclass(frozen=True)
class OverlapCurve:
    axis: Axis
    abscissa: np.ndarray
    overlap: np.ndarray
    lambda_s: Optional[float] = None
    lambda_i: Optional[float] = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({self.axis: self.abscissa, 'overlap': self.overlap})


DisplacementModel = Callable[[float, PhaseMatchPoint, 'ImagingSystem'], AngularDeviation]


def displacement_angular_errors(z: float, base: PhaseMatchPoint, imaging: ImagingSystem,
                                max_displacement: Optional[float] = None) -> AngularDeviation:
    """
    First-order thin-lens error: a source displaced by z from the object
    plane sees its angular magnification change by (1 - z/f), so each
    external emission angle is off by -(z/f) theta_ext.
    """
    f = imaging.focal_length_f
    if abs(z) >= f:
        raise DomainError(f"Displacement |z|={abs(z)!r} m invalidates the first-order model (f={f!r} m)")
    if max_displacement is not None and abs(z) > max_displacement:
        raise ValidationError(f"Displacement |z|={abs(z)!r} m exceeds {max_displacement!r} m")
    scale = -z / f
    return AngularDeviation(scale * abs(base.theta_s_ext), scale * abs(base.theta_i_ext), 'external')


def _overlap(d_s, d_i, base: PhaseMatchPoint, pump: PumpSpec, crystal: CrystalSpec):
    fx, fz = correlation(d_s, d_i, base, pump, crystal, frame='external')
    return (fx * fz) ** 2


def overlap_vs_misalignment(lambda_s: float, delta_alpha: Iterable[float], pump: PumpSpec,
                            crystal: CrystalSpec) -> OverlapCurve:
    """F^2 at the emission-angle shifts d theta/d alpha * delta_alpha (radians in, degrees out)"""
    base = solve_emission_angles(lambda_s, pump, crystal)
    slope_s = angle_derivative_wrt_cut(lambda_s, pump, crystal, 'signal')
    slope_i = angle_derivative_wrt_cut(lambda_s, pump, crystal, 'idler')
    alphas = np.asarray(list(delta_alpha), dtype=float)

    # signed-angle slopes turned into outward deviations
    d_s = math.copysign(1.0, base.theta_s_ext) * slope_s * alphas
    d_i = math.copysign(1.0, base.theta_i_ext) * slope_i * alphas
    values = _overlap(d_s, d_i, base, pump, crystal)

    logger.info("overlap_vs_misalignment", lambda_s_nm=lambda_s * 1e9,
                slope_s=slope_s, slope_i=slope_i, samples=alphas.size)
    return OverlapCurve('misalignment_deg', np.degrees(alphas), values, base.lambda_s, base.lambda_i)


def misalignment_half_width(curve: OverlapCurve, level: float = 0.5) -> float:
    """First crossing of `level` on the positive side of the abscissa, linearly interpolated"""
    x = np.asarray(curve.abscissa)
    y = np.asarray(curve.overlap)
    order = np.argsort(x)
    x, y = x[order], y[order]
    positive = x >= 0
    x, y = x[positive], y[positive]
    below = np.nonzero(y < level)[0]
    if below.size == 0 or below[0] == 0:
        raise ValidationError(f"Curve does not cross {level} on its positive side")
    k = below[0]
    return float(x[k - 1] + (level - y[k - 1]) * (x[k] - x[k - 1]) / (y[k] - y[k - 1]))


def overlap_vs_displacement(lambda_s: float, z_values: Iterable[float], pump: PumpSpec,
                            crystal: CrystalSpec, imaging: ImagingSystem,
                            model: DisplacementModel = displacement_angular_errors) -> OverlapCurve:
    base = solve_emission_angles(lambda_s, pump, crystal)
    zs = np.asarray(list(z_values), dtype=float)
    errors = [model(float(z), base, imaging) for z in zs]
    d_s = np.array([err.d_theta_s for err in errors])
    d_i = np.array([err.d_theta_i for err in errors])
    return OverlapCurve('displacement_m', zs, _overlap(d_s, d_i, base, pump, crystal),
                        base.lambda_s, base.lambda_i)


def spectral_overlap(wavelengths: Iterable[float], crystal: CrystalSpec, pump: PumpSpec,
                     imaging: ImagingSystem, nodes: int = QUADRATURE_NODES,
                     model: DisplacementModel = displacement_angular_errors) -> OverlapCurve:
    """S(lambda) = (1/l) * integral of F^2 over z in [-l/2, l/2], composite Simpson"""
    if nodes < 3:
        raise ValidationError(f"Quadrature needs at least 3 nodes, got {nodes}")
    half = crystal.length_l / 2.0
    zs = np.linspace(-half, half, nodes)
    lambdas = np.asarray(list(wavelengths), dtype=float)
    values = np.empty_like(lambdas)
    for k, lambda_s in enumerate(lambdas):
        curve = overlap_vs_displacement(float(lambda_s), zs, pump, crystal, imaging, model)
        values[k] = simpson_mean(curve.overlap, zs)

    logger.info("spectral_overlap", points=lambdas.size, nodes=nodes,
                length_mm=crystal.length_l * 1e3, focal_mm=imaging.focal_length_f * 1e3)
    return OverlapCurve('wavelength_nm', lambdas * 1e9, values)


def band_efficiency(curve: OverlapCurve) -> float:
    """Mean overlap over the sampled band"""
    x = np.asarray(curve.abscissa, dtype=float)
    span = x[-1] - x[0]
    if span == 0:
        return float(curve.overlap[0])
    return float(trapezoid(curve.overlap, x) / span)
