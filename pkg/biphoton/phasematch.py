"""
Type-I (e -> o + o) phase matching: cut angles, tuning curves, conjugate
wavelengths, Snell refraction at the exit face and emission-angle
derivatives with respect to the cut angle.

Sign convention: the signal leaves on the positive side of the pump axis,
the idler on the negative side.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np
import pandas as pd

from .dispersion import (
    BBO_EXTRAORDINARY,
    BBO_ORDINARY,
    CrystalSpec,
    SellmeierSet,
    extraordinary_index_slope,
    index_extraordinary_at_angle,
    index_ordinary,
)
from .errors import DerivativeUndefinedError, DomainError, NoSolutionError, ValidationError
from .numerics import bracketed_root
from .utils import logger

# bisection window for the internal signal angle
SEARCH_MAX_ANGLE = 0.2
# |k_s + k_i - k_p| below this fraction of k_p counts as collinear
COLLINEAR_TOLERANCE = 1e-11
CUT_ANGLE_STEP = 1e-4

Photon = Literal['signal', 'idler']


@dataclass(frozen=True)
class PumpSpec:
    wavelength_p: float = 351.1e-9
    beam_diameter_a: float = 100e-6
    power: float = 0.0

    def __post_init__(self):
        if not self.wavelength_p > 0:
            raise ValidationError(f"Pump wavelength must be positive, got {self.wavelength_p!r}")
        if not self.beam_diameter_a > 0:
            raise ValidationError(f"Pump diameter must be positive, got {self.beam_diameter_a!r}")
        if not self.power >= 0:
            raise ValidationError(f"Pump power must be nonnegative, got {self.power!r}")

    @property
    def degenerate_wavelength(self) -> float:
        return 2.0 * self.wavelength_p


@dataclass(frozen=True)
class PhaseMatchPoint:
    lambda_s: float
    lambda_i: float
    theta_s_int: float
    theta_i_int: float
    theta_s_ext: float
    theta_i_ext: float
    residual: float
    n_s: float
    n_i: float

    @property
    def is_collinear(self) -> bool:
        return self.theta_s_int == 0.0 and self.theta_i_int == 0.0


def conjugate_wavelength(lambda_s: float, pump: PumpSpec) -> float:
    """Idler wavelength from energy conservation 1/l_s + 1/l_i = 1/l_p"""
    if not lambda_s > pump.wavelength_p:
        raise DomainError(
            f"Signal wavelength {lambda_s!r} m must exceed the pump wavelength {pump.wavelength_p!r} m"
        )
    return 1.0 / (1.0 / pump.wavelength_p - 1.0 / lambda_s)


def pump_wavenumber(pump: PumpSpec, crystal: CrystalSpec) -> float:
    n_p = index_extraordinary_at_angle(pump.wavelength_p, crystal.cut_angle_alpha, crystal)
    return 2.0 * math.pi * n_p / pump.wavelength_p


def degenerate_cut_angle(pump: PumpSpec, crystal: CrystalSpec) -> float:
    """Cut angle for collinear degenerate matching: n_e(l_p, alpha) = n_o(2 l_p)"""
    target = index_ordinary(pump.degenerate_wavelength, crystal.ordinary)

    def mismatch(alpha: float) -> float:
        return index_extraordinary_at_angle(pump.wavelength_p, alpha, crystal) - target

    def slope(alpha: float) -> float:
        return extraordinary_index_slope(pump.wavelength_p, alpha, crystal)

    try:
        alpha = bracketed_root(mismatch, 0.0, math.pi / 2, fprime=slope)
    except NoSolutionError as exc:
        raise NoSolutionError(
            f"{crystal.name}: extraordinary pump index never reaches n_o(2 l_p)={target:.6f}"
        ) from exc

    logger.debug("degenerate_cut_angle", crystal=crystal.name,
                 alpha_deg=math.degrees(alpha), residual=mismatch(alpha))
    return alpha


def degenerate_crystal(pump: PumpSpec, length: float = 5e-3,
                       ordinary: SellmeierSet = BBO_ORDINARY,
                       extraordinary: SellmeierSet = BBO_EXTRAORDINARY,
                       name: str = 'BBO') -> CrystalSpec:
    """Crystal cut for collinear degenerate phase matching of `pump`"""
    provisional = CrystalSpec(length, math.pi / 6, ordinary, extraordinary, name)
    return provisional.with_cut_angle(degenerate_cut_angle(pump, provisional))


def internal_to_external(theta_int: float, wavelength: float, crystal: CrystalSpec) -> float:
    """Refraction of an o-wave through an exit face normal to the pump"""
    n = index_ordinary(wavelength, crystal.ordinary)
    sine = n * math.sin(abs(theta_int))
    if sine >= 1.0:
        raise DomainError(
            f"Internal angle {theta_int!r} rad exceeds the critical angle {math.asin(1.0 / n)!r} rad"
        )
    return math.copysign(math.asin(sine), theta_int)


def external_to_internal(theta_ext: float, wavelength: float, crystal: CrystalSpec) -> float:
    if not abs(theta_ext) < math.pi / 2:
        raise DomainError(f"External angle {theta_ext!r} rad is not a forward direction")
    n = index_ordinary(wavelength, crystal.ordinary)
    return math.copysign(math.asin(math.sin(abs(theta_ext)) / n), theta_ext)


def k_vector_mismatch(lambda_s: float, lambda_i: float, theta_s: float, theta_i: float,
                      pump: PumpSpec, crystal: CrystalSpec) -> float:
    """Norm of k_s + k_i - k_p for signed internal angles"""
    k_s = 2.0 * math.pi * index_ordinary(lambda_s, crystal.ordinary) / lambda_s
    k_i = 2.0 * math.pi * index_ordinary(lambda_i, crystal.ordinary) / lambda_i
    k_p = pump_wavenumber(pump, crystal)
    transverse = k_s * math.sin(theta_s) + k_i * math.sin(theta_i)
    longitudinal = k_s * math.cos(theta_s) + k_i * math.cos(theta_i) - k_p
    return math.hypot(transverse, longitudinal)


def solve_emission_angles(lambda_s: float, pump: PumpSpec, crystal: CrystalSpec) -> PhaseMatchPoint:
    """
    Solve the phase-matching conditions for the signal wavelength `lambda_s`.

    The transverse balance fixes theta_i as a function of theta_s, which
    leaves a one-dimensional longitudinal equation bisected on
    [0, SEARCH_MAX_ANGLE].
    """
    lambda_i = conjugate_wavelength(lambda_s, pump)
    n_s = index_ordinary(lambda_s, crystal.ordinary)
    n_i = index_ordinary(lambda_i, crystal.ordinary)
    k_s = 2.0 * math.pi * n_s / lambda_s
    k_i = 2.0 * math.pi * n_i / lambda_i
    k_p = pump_wavenumber(pump, crystal)

    def idler_angle(theta_s: float) -> float:
        return math.asin(k_s * math.sin(theta_s) / k_i)

    def longitudinal(theta_s: float) -> float:
        return k_s * math.cos(theta_s) + k_i * math.cos(idler_angle(theta_s)) - k_p

    def longitudinal_slope(theta_s: float) -> float:
        theta_i = idler_angle(theta_s)
        d_theta_i = k_s * math.cos(theta_s) / (k_i * math.cos(theta_i))
        return -k_s * math.sin(theta_s) - k_i * math.sin(theta_i) * d_theta_i

    on_axis = longitudinal(0.0)
    if abs(on_axis) <= COLLINEAR_TOLERANCE * k_p:
        theta_s = 0.0
    elif on_axis < 0.0:
        raise NoSolutionError(
            f"No phase-matched pair at {lambda_s * 1e9:.3f} nm: collinear mismatch "
            f"{on_axis:.6g} 1/m is negative for cut angle {math.degrees(crystal.cut_angle_alpha):.6f} deg"
        )
    else:
        try:
            theta_s = bracketed_root(longitudinal, 0.0, SEARCH_MAX_ANGLE, fprime=longitudinal_slope)
        except NoSolutionError as exc:
            raise NoSolutionError(
                f"No phase-matched pair at {lambda_s * 1e9:.3f} nm within "
                f"{SEARCH_MAX_ANGLE} rad of the pump axis"
            ) from exc

    theta_i = -idler_angle(theta_s)
    residual = k_vector_mismatch(lambda_s, lambda_i, theta_s, theta_i, pump, crystal)
    return PhaseMatchPoint(
        lambda_s=lambda_s,
        lambda_i=lambda_i,
        theta_s_int=theta_s,
        theta_i_int=theta_i,
        theta_s_ext=internal_to_external(theta_s, lambda_s, crystal),
        theta_i_ext=internal_to_external(theta_i, lambda_i, crystal),
        residual=residual,
        n_s=n_s,
        n_i=n_i,
    )


def tuning_curve(wavelengths: Iterable[float], pump: PumpSpec, crystal: CrystalSpec) -> pd.DataFrame:
    rows = []
    for lambda_s in wavelengths:
        point = solve_emission_angles(float(lambda_s), pump, crystal)
        rows.append({
            'lambda_s_nm': point.lambda_s * 1e9,
            'lambda_i_nm': point.lambda_i * 1e9,
            'theta_ext_s_deg': math.degrees(point.theta_s_ext),
            'theta_ext_i_deg': math.degrees(point.theta_i_ext),
            'residual': point.residual,
        })
    logger.info("tuning_curve", points=len(rows), crystal=crystal.name)
    return pd.DataFrame(rows, columns=['lambda_s_nm', 'lambda_i_nm', 'theta_ext_s_deg',
                                       'theta_ext_i_deg', 'residual'])


def _external_angle(point: PhaseMatchPoint, which: Photon) -> float:
    if which == 'signal':
        return point.theta_s_ext
    if which == 'idler':
        return point.theta_i_ext
    raise ValidationError(f"Photon must be 'signal' or 'idler', got {which!r}")


def cut_angle_difference(lambda_s: float, pump: PumpSpec, crystal: CrystalSpec,
                         which: Photon, step: float = CUT_ANGLE_STEP) -> float:
    """Central difference d theta_ext / d alpha of the signed external angle at one step"""
    alpha = crystal.cut_angle_alpha
    try:
        upper = solve_emission_angles(lambda_s, pump, crystal.with_cut_angle(alpha + step))
        lower = solve_emission_angles(lambda_s, pump, crystal.with_cut_angle(alpha - step))
    except NoSolutionError as exc:
        raise DerivativeUndefinedError(
            f"d theta/d alpha undefined at {lambda_s * 1e9:.3f} nm with step {step:g} rad: "
            f"tuning-curve edge inside the difference stencil"
        ) from exc
    return (_external_angle(upper, which) - _external_angle(lower, which)) / (2.0 * step)


def angle_derivative_wrt_cut(lambda_s: float, pump: PumpSpec, crystal: CrystalSpec,
                             which: Photon, step: float = CUT_ANGLE_STEP,
                             min_step: float = 1e-9, rtol: float = 1e-3) -> float:
    """
    d theta_ext / d alpha with step-halving validation.

    Starting from `step`, halves while the stencil crosses the tuning-curve
    edge, then until two successive estimates agree to `rtol`. Near
    degeneracy the edge moves by dk_p/d alpha * step, so admissible steps
    shrink with the distance to the branch point.
    """
    previous = None
    h = step
    while h >= min_step:
        try:
            estimate = cut_angle_difference(lambda_s, pump, crystal, which, step=h)
        except DerivativeUndefinedError:
            previous = None
            h /= 2.0
            continue
        if previous is not None and abs(estimate - previous) <= rtol * abs(estimate):
            return estimate
        previous = estimate
        h /= 2.0
    raise DerivativeUndefinedError(
        f"d theta/d alpha did not settle at {lambda_s * 1e9:.3f} nm down to step {min_step:g} rad"
    )


def sweep_wavelengths(lambda_min: float, lambda_max: float, samples: int) -> np.ndarray:
    if not 0 < lambda_min < lambda_max:
        raise ValidationError(
            f"Wavelength range must satisfy 0 < min < max, got [{lambda_min!r}, {lambda_max!r}]"
        )
    if samples < 2:
        raise ValidationError(f"Need at least 2 samples, got {samples}")
    return np.linspace(lambda_min, lambda_max, samples)
