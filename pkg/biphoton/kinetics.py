"""
Photocathode kinetics: two-trap self-sensitization under illumination,
bi-exponential dark relaxation fitting and the position-scan response of a
slow quadratic detector.

The trap picture: each trap j fills at a rate proportional to intensity
and empties with lifetime tau_j,
    dN_j/dt = c_j I (N_max_j - N_j) - N_j / tau_j,
and the two-photon sensitivity is s = s0 (1 + beta_1 N_1 + beta_2 N_2).
In the dark the response relaxes exactly bi-exponentially.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import RankDeficiencyError, StabilityError, ValidationError
from .numerics import damped_gauss_newton, rk4_integrate
from .utils import ValidationHelper, logger

# 1.4 nW focused into a 35 um spot, the brightest illumination used for calibration
CALIBRATION_POWER = 1.4e-9
CALIBRATION_SPOT_DIAMETER = 35e-6
CALIBRATION_INTENSITY = CALIBRATION_POWER / (math.pi * (CALIBRATION_SPOT_DIAMETER / 2.0) ** 2)

MIN_FIT_POINTS = 5
MAX_FIT_ITERATIONS = 200
FIT_RTOL = 1e-10


@dataclass(frozen=True)
class TrapModel:
    capacity: Tuple[float, float] = (1.0, 1.0)
    fill_coefficient: Tuple[float, float] = (0.03 / CALIBRATION_INTENSITY, 0.2 / CALIBRATION_INTENSITY)
    lifetime: Tuple[float, float] = (100.0, 5.0)
    base_sensitivity: float = 1.0
    gain: Tuple[float, float] = (16.0, 4.0)

    def __post_init__(self):
        tau_1, tau_2 = self.lifetime
        if not tau_1 > tau_2 > 0:
            raise ValidationError(f"Lifetimes must satisfy tau_1 > tau_2 > 0, got {self.lifetime!r}")
        for name in ('capacity', 'fill_coefficient', 'gain'):
            values = getattr(self, name)
            if len(values) != 2 or min(values) < 0:
                raise ValidationError(f"{name} must be two nonnegative numbers, got {values!r}")
        ValidationHelper.require_nonnegative('base_sensitivity', self.base_sensitivity)

    def sensitivity(self, populations: np.ndarray) -> np.ndarray:
        populations = np.asarray(populations, dtype=float)
        return self.base_sensitivity * (1.0 + populations @ np.asarray(self.gain, dtype=float))

    def rates(self, intensity: float) -> np.ndarray:
        """Total relaxation rate of each trap at `intensity`"""
        return np.asarray(self.fill_coefficient) * intensity + 1.0 / np.asarray(self.lifetime)


@dataclass(frozen=True)
class IntensitySchedule:
    """Piecewise-constant intensity; segment k holds from starts[k] to starts[k+1]"""
    starts: Tuple[float, ...]
    intensities: Tuple[float, ...]

    def __post_init__(self):
        if len(self.starts) == 0 or len(self.starts) != len(self.intensities):
            raise ValidationError("Schedule needs matching, nonempty starts and intensities")
        if self.starts[0] != 0.0:
            raise ValidationError(f"Schedule must start at t=0, got {self.starts[0]!r}")
        if any(b <= a for a, b in zip(self.starts, self.starts[1:])):
            raise ValidationError("Schedule start times must be strictly increasing")
        if min(self.intensities) < 0:
            raise ValidationError("Schedule intensities must be nonnegative")

    @classmethod
    def constant(cls, intensity: float) -> 'IntensitySchedule':
        return cls((0.0,), (float(intensity),))

    @classmethod
    def exposure_then_dark(cls, intensity: float, exposure: float) -> 'IntensitySchedule':
        return cls((0.0, float(exposure)), (float(intensity), 0.0))

    @classmethod
    def exposure_within(cls, intensity: float, exposure: float, horizon: float) -> 'IntensitySchedule':
        """Illuminated for `exposure` seconds, then dark; constant if the exposure outlasts `horizon`"""
        if exposure >= horizon:
            return cls.constant(intensity)
        return cls.exposure_then_dark(intensity, exposure)

    def segments(self, horizon: float):
        ends = list(self.starts[1:]) + [math.inf]
        for start, end, intensity in zip(self.starts, ends, self.intensities):
            if start >= horizon:
                break
            yield start, min(end, horizon), intensity

    def scaled(self, factor: float) -> 'IntensitySchedule':
        return IntensitySchedule(self.starts, tuple(factor * i for i in self.intensities))


@dataclass(frozen=True)
class Trace:
    times: np.ndarray
    values: np.ndarray
    sigmas: Optional[np.ndarray] = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ValidationError("Trace times and values must be 1-D arrays of equal length")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValidationError("Trace times must be strictly increasing")
        if self.sigmas is not None:
            sigmas = np.asarray(self.sigmas, dtype=float)
            if sigmas.shape != times.shape or np.any(sigmas <= 0):
                raise ValidationError("Trace sigmas must be positive and match the times")
            object.__setattr__(self, 'sigmas', sigmas)
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)


@dataclass(frozen=True)
class PopulationRun:
    times: np.ndarray
    intensity: np.ndarray
    populations: np.ndarray
    sensitivity: np.ndarray


@dataclass(frozen=True)
class DecayFit:
    a1: float
    tau1: float
    a2: float
    tau2: float
    offset: float
    rms_residual: float
    iterations: int
    converged: bool
    rank_deficient: bool = False

    @property
    def reliable(self) -> bool:
        return self.converged and not self.rank_deficient

    def model(self, times) -> np.ndarray:
        t = np.asarray(times, dtype=float)
        return self.a1 * np.exp(-t / self.tau1) + self.a2 * np.exp(-t / self.tau2) + self.offset


@dataclass(frozen=True)
class ExponentialFit:
    amplitude: float
    tau: float
    offset: float
    rms_residual: float
    iterations: int
    converged: bool


def stability_limit(model: TrapModel, intensity: float) -> float:
    """Largest admissible step: a tenth of the fastest time scale"""
    scales = [model.lifetime[1]]
    scales += [1.0 / (c * intensity) for c in model.fill_coefficient if c * intensity > 0]
    return min(scales) / 10.0


def equilibrium_populations(model: TrapModel, intensity: float) -> np.ndarray:
    fill = np.asarray(model.fill_coefficient) * intensity
    return np.asarray(model.capacity) * fill / model.rates(intensity)


def closed_form_populations(model: TrapModel, intensity: float, initial: Sequence[float],
                            times: np.ndarray) -> np.ndarray:
    """N_eq + (N_0 - N_eq) exp(-t / tau_eff) on a constant-intensity segment"""
    n_eq = equilibrium_populations(model, intensity)
    t = np.asarray(times, dtype=float)[:, None]
    return n_eq + (np.asarray(initial, dtype=float) - n_eq) * np.exp(-t * model.rates(intensity))


def simulate_populations(model: TrapModel, schedule: IntensitySchedule, horizon: float,
                         step: float, initial: Sequence[float] = (0.0, 0.0)) -> PopulationRun:
    ValidationHelper.require_positive('step', step)
    ValidationHelper.require_positive('horizon', horizon)
    capacity = np.asarray(model.capacity, dtype=float)
    fill = np.asarray(model.fill_coefficient, dtype=float)
    decay = 1.0 / np.asarray(model.lifetime, dtype=float)

    all_times = [np.array([0.0])]
    all_states = [np.asarray(initial, dtype=float)[None, :]]
    all_intensity = []
    state = np.asarray(initial, dtype=float)
    for start, end, intensity in schedule.segments(horizon):
        limit = stability_limit(model, intensity)
        if step > limit:
            raise StabilityError(step, limit)

        def rhs(_t, n, intensity=intensity):
            return fill * intensity * (capacity - n) - n * decay

        times, states = rk4_integrate(rhs, state, start, end, step)
        all_times.append(times[1:])
        all_states.append(states[1:])
        all_intensity.append(np.full(times.size - 1, intensity))
        state = states[-1]

    first_intensity = schedule.intensities[0]
    times = np.concatenate(all_times)
    populations = np.concatenate(all_states)
    intensity = np.concatenate([[first_intensity]] + all_intensity)
    return PopulationRun(times, intensity, populations, model.sensitivity(populations))


def simulate_sensitization(model: TrapModel, schedule: IntensitySchedule, horizon: float,
                           step: float, initial: Sequence[float] = (0.0, 0.0)) -> Trace:
    """Sensitivity trace s(t) under a piecewise-constant intensity schedule"""
    run = simulate_populations(model, schedule, horizon, step, initial)
    logger.info("simulate_sensitization", horizon_s=horizon, step_s=step,
                final_sensitivity=float(run.sensitivity[-1]))
    return Trace(run.times, run.sensitivity)


def dark_relaxation(model: TrapModel, initial: Sequence[float], horizon: float, step: float) -> Trace:
    return simulate_sensitization(model, IntensitySchedule.constant(0.0), horizon, step, initial)


def add_multiplicative_noise(trace: Trace, fraction: float, rng: np.random.Generator) -> Trace:
    noisy = trace.values * (1.0 + fraction * rng.standard_normal(trace.values.size))
    return Trace(trace.times, noisy, trace.sigmas)


def _weights(trace: Trace) -> np.ndarray:
    if trace.sigmas is None:
        return np.ones_like(trace.values)
    return 1.0 / trace.sigmas ** 2


def _block_offset(y: np.ndarray) -> Optional[float]:
    """
    Asymptote C of an exponential-plus-constant from the means of three equal
    consecutive blocks, which form a geometric sequence about C.
    """
    m = y.size // 3
    if m < 1:
        return None
    m0, m1, m2 = (float(np.mean(y[k * m:(k + 1) * m])) for k in range(3))
    upper, lower = m0 - m1, m1 - m2
    if lower == 0.0 or upper / lower <= 1.0:
        return None
    return (m0 * m2 - m1 * m1) / (upper - lower)


def _log_linear_time_constant(t: np.ndarray, y: np.ndarray) -> Optional[float]:
    """Time constant from the least-squares slope of log|y - C| against t"""
    offset = _block_offset(y)
    if offset is None:
        return None
    lifted = (y - offset) * math.copysign(1.0, y[0] - y[-1])
    keep = lifted > 0
    if np.count_nonzero(keep) < 2:
        return None
    slope, _ = np.polyfit(t[keep], np.log(lifted[keep]), 1)
    if not slope < 0:
        return None
    tau = -1.0 / slope
    return tau if math.isfinite(tau) else None


def _initial_guess(trace: Trace) -> np.ndarray:
    t, y = trace.times, trace.values
    span = t[-1] - t[0]
    tail = slice(2 * t.size // 3, t.size)
    tau1 = _log_linear_time_constant(t[tail], y[tail]) or span / 3.0

    design = np.column_stack([np.exp(-t[tail] / tau1), np.ones(t[tail].size)])
    (a1, offset), *_ = np.linalg.lstsq(design, y[tail], rcond=None)

    head = slice(0, max(t.size // 3, 3))
    early = y[head] - a1 * np.exp(-t[head] / tau1) - offset
    tau2, a2 = tau1 / 20.0, float(early[0])
    if early.size and early.max() > 0:
        run = np.argmax(early < 0.05 * early.max()) if np.any(early < 0.05 * early.max()) else early.size
        if run >= 2:
            slope, intercept = np.polyfit(t[head][:run], np.log(early[:run]), 1)
            if slope < 0:
                tau2, a2 = -1.0 / slope, math.exp(intercept)
    if tau2 >= tau1:
        tau2 = tau1 / 10.0
    return np.array([a1, tau1, a2, tau2, offset], dtype=float)


def _biexponential_residual(t, y):
    def residual(p):
        a1, tau1, a2, tau2, c = p
        if tau1 <= 0 or tau2 <= 0:
            return np.full(t.size, np.inf)
        return a1 * np.exp(-t / tau1) + a2 * np.exp(-t / tau2) + c - y
    return residual


def _biexponential_jacobian(t):
    def jacobian(p):
        a1, tau1, a2, tau2, _c = p
        e1, e2 = np.exp(-t / tau1), np.exp(-t / tau2)
        return np.column_stack([e1, a1 * e1 * t / tau1 ** 2, e2, a2 * e2 * t / tau2 ** 2, np.ones(t.size)])
    return jacobian


def _check_fit_input(trace: Trace, parameters: int) -> None:
    if trace.times.size < max(MIN_FIT_POINTS, parameters):
        raise ValidationError(f"Fitting needs at least {max(MIN_FIT_POINTS, parameters)} points, "
                              f"got {trace.times.size}")


def fit_biexponential(trace: Trace) -> DecayFit:
    """
    Least-squares fit of A1 exp(-t/tau1) + A2 exp(-t/tau2) + C by damped
    Gauss-Newton, returned with tau1 > tau2.
    """
    _check_fit_input(trace, 5)
    t, y = trace.times, trace.values
    mean = float(np.mean(y))
    if np.ptp(y) <= 1e-9 * max(1.0, abs(mean)):
        fallback = DecayFit(0.0, math.nan, 0.0, math.nan, mean, float(np.std(y)), 0, False, True)
        raise RankDeficiencyError("Trace is flat: exponential terms are not identifiable; "
                                  "refit with fit_single_exponential or report the mean", fallback)

    weights = _weights(trace)
    p0 = _initial_guess(trace)
    try:
        result = damped_gauss_newton(_biexponential_residual(t, y), _biexponential_jacobian(t), p0,
                                     weights=weights, max_iter=MAX_FIT_ITERATIONS, rtol=FIT_RTOL,
                                     cost_floor=1e-26 * float(np.sum(weights * y * y)))
    except RankDeficiencyError as exc:
        raise RankDeficiencyError(f"{exc}; try fit_single_exponential") from exc

    a1, tau1, a2, tau2, offset = result.params
    if tau1 < tau2:
        a1, tau1, a2, tau2 = a2, tau2, a1, tau1
    residual = _biexponential_residual(t, y)(result.params)
    fit = DecayFit(float(a1), float(tau1), float(a2), float(tau2), float(offset),
                   float(np.sqrt(np.mean(residual ** 2))), result.iterations, result.converged)
    if not fit.converged:
        logger.warning("fit_biexponential_not_converged", iterations=fit.iterations)
    logger.info("fit_biexponential", tau1_s=fit.tau1, tau2_s=fit.tau2, rms=fit.rms_residual,
                iterations=fit.iterations)
    return fit


def fit_single_exponential(trace: Trace) -> ExponentialFit:
    """A exp(-t/tau) + C, the fallback when two time constants are not resolvable"""
    _check_fit_input(trace, 3)
    t, y = trace.times, trace.values
    tau = _log_linear_time_constant(t, y) or (t[-1] - t[0]) / 3.0
    design = np.column_stack([np.exp(-t / tau), np.ones(t.size)])
    (amplitude, offset), *_ = np.linalg.lstsq(design, y, rcond=None)

    def residual(p):
        a, tau_, c = p
        if tau_ <= 0:
            return np.full(t.size, np.inf)
        return a * np.exp(-t / tau_) + c - y

    def jacobian(p):
        a, tau_, _c = p
        e = np.exp(-t / tau_)
        return np.column_stack([e, a * e * t / tau_ ** 2, np.ones(t.size)])

    weights = _weights(trace)
    result = damped_gauss_newton(residual, jacobian, np.array([amplitude, tau, offset]),
                                 weights=weights, max_iter=MAX_FIT_ITERATIONS, rtol=FIT_RTOL,
                                 cost_floor=1e-26 * float(np.sum(weights * y * y)))
    a, tau, c = result.params
    return ExponentialFit(float(a), float(tau), float(c),
                          float(np.sqrt(np.mean(residual(result.params) ** 2))),
                          result.iterations, result.converged)


@dataclass(frozen=True)
class GaussianSpot:
    waist_area: float
    rayleigh_length: float

    def __post_init__(self):
        ValidationHelper.require_positive('waist_area', self.waist_area)
        ValidationHelper.require_positive('rayleigh_length', self.rayleigh_length)

    @classmethod
    def from_diameter(cls, diameter: float, wavelength: float) -> 'GaussianSpot':
        waist = diameter / 2.0
        return cls(math.pi * waist ** 2, math.pi * waist ** 2 / wavelength)

    def area(self, z):
        return self.waist_area * (1.0 + (np.asarray(z, dtype=float) / self.rayleigh_length) ** 2)


def response_vs_position(z, beam: GaussianSpot, power: float, gain: float):
    """Count rate gain * P^2 / A(z) of a slow quadratic detector at offset z"""
    ValidationHelper.require_positive('power', power)
    ValidationHelper.require_positive('gain', gain)
    rate = gain * power ** 2 / beam.area(z)
    return float(rate) if np.ndim(rate) == 0 else rate
