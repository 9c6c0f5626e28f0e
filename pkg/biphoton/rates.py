"""
Mode counting and two-photon detection rates for coherent and biphoton
light, the enhancement factor xi, and the up-conversion rate estimate.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Literal, Optional

from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK
from scipy.constants import hbar as HBAR

from .errors import PreconditionError, ValidationError, WeakFieldWarning
from .utils import ValidationHelper, logger

WEAK_FIELD_LIMIT = 0.1
EQUAL_INTENSITY_RTOL = 1e-9

FieldKind = Literal['coherent', 'biphoton']

PHYSICAL_CONSTANTS = {
    'hbar_J_s': HBAR,
    'h_J_s': PLANCK,
    'c_m_s': SPEED_OF_LIGHT,
}


@dataclass(frozen=True)
class RadiationField:
    intensity_I: float
    wavelength: float
    solid_angle: float
    bandwidth: float
    kind: FieldKind = 'coherent'

    def __post_init__(self):
        ValidationHelper.require_nonnegative('intensity_I', self.intensity_I)
        ValidationHelper.require_positive('wavelength', self.wavelength)
        ValidationHelper.require_positive('solid_angle', self.solid_angle)
        ValidationHelper.require_positive('bandwidth', self.bandwidth)
        if self.kind not in ('coherent', 'biphoton'):
            raise ValidationError(f"Field kind must be 'coherent' or 'biphoton', got {self.kind!r}")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength


@dataclass(frozen=True)
class DetectionVolume:
    cross_section_A: float
    length_L: float
    solid_angle: float
    bandwidth: float
    wavenumber_k: float

    def __post_init__(self):
        for name in ('cross_section_A', 'length_L', 'solid_angle', 'bandwidth', 'wavenumber_k'):
            ValidationHelper.require_positive(name, getattr(self, name))

    @classmethod
    def for_field(cls, field: RadiationField, cross_section: float, length: float) -> 'DetectionVolume':
        """Volume whose k-space acceptance is the field's own angular and spectral spread"""
        return cls(cross_section, length, field.solid_angle, field.bandwidth, field.wavenumber)


@dataclass(frozen=True)
class DetectionProcess:
    # absorbs up-conversion and photodetection efficiencies
    eta2: float = 1.0

    def __post_init__(self):
        ValidationHelper.require_range('eta2', self.eta2, 0.0, 1.0)


@dataclass(frozen=True)
class Enhancement:
    ratio: float
    closed_form: Optional[float]

    @property
    def xi(self) -> float:
        return self.closed_form if self.closed_form is not None else self.ratio


@dataclass(frozen=True)
class UpconversionEstimate:
    power_w: float
    photon_rate: float
    enhanced_rate: float
    photon_energy_j: float
    reduced_rate: float


def solid_angle_from_divergence(theta_d: float) -> float:
    """Solid angle 2*pi*theta_d^2 of a beam with divergence theta_d"""
    return 2.0 * math.pi * theta_d ** 2


def intensity_from_power(power: float, diameter: float) -> float:
    return power / (math.pi * (diameter / 2.0) ** 2)


def mode_count(vol: DetectionVolume) -> float:
    """M = A L / (2 pi)^3 * k^2 / c * dOmega * domega"""
    return (vol.cross_section_A * vol.length_L / (2.0 * math.pi) ** 3
            * vol.wavenumber_k ** 2 / SPEED_OF_LIGHT * vol.solid_angle * vol.bandwidth)


def photons_per_mode(field: RadiationField) -> float:
    """<n> = I lambda^3 / (hbar c) / (dOmega domega)"""
    return (field.intensity_I * field.wavelength ** 3 / (HBAR * SPEED_OF_LIGHT)
            / (field.solid_angle * field.bandwidth))


def total_photons(field: RadiationField, cross_section: float, length: float) -> float:
    """I A L / (c hbar omega), the mean photon number in the volume"""
    omega = SPEED_OF_LIGHT * field.wavenumber
    return field.intensity_I * cross_section * length / (SPEED_OF_LIGHT * HBAR * omega)


def _warn_if_strong(n: float) -> None:
    if n > WEAK_FIELD_LIMIT:
        logger.warning("weak_field_limit_exceeded", occupation=n, limit=WEAK_FIELD_LIMIT)
        warnings.warn(
            f"<n>={n:g} exceeds {WEAK_FIELD_LIMIT}: rate formulas assume <n> << 1",
            WeakFieldWarning,
            stacklevel=3,
        )


def rate_coherent(proc: DetectionProcess, m: float, n: float) -> float:
    """R_coh = eta2 M <n>^2"""
    _warn_if_strong(n)
    return proc.eta2 * m * n * n


def rate_biphoton(proc: DetectionProcess, m_spdc: float, n: float) -> float:
    """R_spdc = eta2 M_spdc <n>"""
    _warn_if_strong(n)
    return proc.eta2 * m_spdc * n


def enhancement_xi(coh: RadiationField, spdc: RadiationField, m_coh: float, m_spdc: float,
                   n_coh: float, n_spdc: float, closed_form: bool = True) -> Enhancement:
    """
    Ratio R_spdc / R_coh = M_spdc <n>_spdc / (M_coh <n>_coh^2) and, for equal
    intensities, the closed form hbar c dOmega_coh domega_coh / (I lambda^3).
    """
    ratio = m_spdc * n_spdc / (m_coh * n_coh ** 2)
    closed = None
    if closed_form:
        scale = max(abs(coh.intensity_I), abs(spdc.intensity_I))
        if abs(coh.intensity_I - spdc.intensity_I) > EQUAL_INTENSITY_RTOL * scale:
            raise PreconditionError(
                f"Closed-form xi needs equal intensities, got {coh.intensity_I!r} and {spdc.intensity_I!r} W/m^2"
            )
        closed = (HBAR * SPEED_OF_LIGHT * coh.solid_angle * coh.bandwidth
                  / (coh.intensity_I * coh.wavelength ** 3))
    return Enhancement(ratio, closed)


def enhancement_for_fields(coh: RadiationField, spdc: RadiationField, cross_section: float,
                           length: float) -> Enhancement:
    """Both forms of xi with M and <n> derived for a shared detector volume"""
    m_coh = mode_count(DetectionVolume.for_field(coh, cross_section, length))
    m_spdc = mode_count(DetectionVolume.for_field(spdc, cross_section, length))
    return enhancement_xi(coh, spdc, m_coh, m_spdc, photons_per_mode(coh), photons_per_mode(spdc))


def enhancement_equal_occupation(m_coh: float, m_spdc: float, n: float) -> float:
    """xi when both fields have the same <n>: M_spdc / (M_coh <n>)"""
    return m_spdc / (m_coh * n)


def photon_energy(wavelength: float) -> float:
    return PLANCK * SPEED_OF_LIGHT / wavelength


def upconversion_estimate(laser_power: float, sh_power: float, target_power: float,
                          duty_cycle: float, photon_wavelength: float, xi: float,
                          overlap_efficiency: float = 1.0) -> UpconversionEstimate:
    """
    Scale a measured second-harmonic yield quadratically to the biphoton
    power, multiply by the duty cycle for a CW figure, convert to photons/s
    and apply the biphoton enhancement (and optionally the spectral overlap).
    """
    for name, value in (('laser_power', laser_power), ('photon_wavelength', photon_wavelength)):
        ValidationHelper.require_positive(name, value)
    for name, value in (('sh_power', sh_power), ('target_power', target_power),
                        ('duty_cycle', duty_cycle), ('xi', xi)):
        ValidationHelper.require_nonnegative(name, value)
    ValidationHelper.require_range('overlap_efficiency', overlap_efficiency, 0.0, 1.0)

    power = sh_power * (target_power / laser_power) ** 2 * duty_cycle
    energy = photon_energy(photon_wavelength)
    rate = power / energy
    logger.info("upconversion_estimate", power_w=power, photon_rate=rate, xi=xi)
    return UpconversionEstimate(
        power_w=power,
        photon_rate=rate,
        enhanced_rate=rate * xi,
        photon_energy_j=energy,
        reduced_rate=rate * xi * overlap_efficiency,
    )
