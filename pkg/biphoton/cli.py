"""
Command-line interface for the biphoton toolkit.

Every subcommand writes one comma-separated table preceded by `# key=value`
comment lines (tool version, scenario hash, physical constants, command
metadata). Exit status: 0 on success, 1 on invalid input or usage, 2 when
a computation has no solution or does not converge.
"""

import functools
import io
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import click
import numpy as np
import pandas as pd

from . import __version__
from .amplitude import GridSpec, correlation_map, fz_half_width
from .errors import ConvergenceError, NumericError, ValidationError
from .kinetics import (
    IntensitySchedule,
    Trace,
    add_multiplicative_noise,
    fit_biexponential,
    response_vs_position,
    simulate_populations,
)
from .overlap import (
    ImagingSystem,
    band_efficiency,
    misalignment_half_width,
    overlap_vs_displacement,
    overlap_vs_misalignment,
    spectral_overlap,
)
from .phasematch import PumpSpec, solve_emission_angles, sweep_wavelengths, tuning_curve
from .plotting import heatmap, line_plot
from .rates import (
    PHYSICAL_CONSTANTS,
    DetectionVolume,
    enhancement_equal_occupation,
    enhancement_for_fields,
    mode_count,
    photons_per_mode,
    rate_biphoton,
    rate_coherent,
    total_photons,
    upconversion_estimate,
)
from .scenario import ScenarioConfig
from .utils import ConfigHelper, ValidationHelper, logger

TOOL_NAME = 'biphoton'
MAX_SEED = 2 ** 64 - 1


@dataclass
class Invocation:
    """Resolved common options of one subcommand run"""
    command: str
    scenario: ScenarioConfig
    out: Optional[str]
    svg: bool
    seed: int

    def header(self, metadata: Dict[str, Any]) -> Dict[str, Any]:
        header = {
            'tool': TOOL_NAME,
            'version': __version__,
            'command': self.command,
            'scenario': self.scenario.name,
            'scenario_hash': self.scenario.digest(),
            'seed': self.seed,
        }
        header.update(PHYSICAL_CONSTANTS)
        header.update(metadata)
        return header

    def svg_path(self) -> Path:
        if self.out is None:
            return Path(f'{self.command}.svg')
        return Path(self.out).with_suffix('.svg')

    def emit(self, table: pd.DataFrame, metadata: Dict[str, Any],
             plot: Optional[Callable[[Path], Any]] = None) -> None:
        write_table(table, self.header(metadata), self.out)
        if self.svg and plot is not None:
            plot(self.svg_path())
        logger.info("command_finished", command=self.command, rows=len(table),
                    out=self.out or '<stdout>')


def _format_value(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render_table(table: pd.DataFrame, header: Dict[str, Any]) -> str:
    buffer = io.StringIO()
    for key, value in header.items():
        buffer.write(f'# {key}={_format_value(value)}\n')
    table.to_csv(buffer, index=False, float_format=ConfigHelper.get_config()['float_format'],
                 lineterminator='\n')
    return buffer.getvalue()


def write_table(table: pd.DataFrame, header: Dict[str, Any], out: Optional[str]) -> None:
    text = render_table(table, header)
    if out is None:
        click.echo(text, nl=False)
        return
    with open(out, 'w', encoding='utf-8', newline='') as handle:
        handle.write(text)


COMMON_OPTIONS = [
    click.option('--scenario', default='default', show_default=True,
                 help='Preset name or path of a scenario INI file.'),
    click.option('--out', type=click.Path(dir_okay=False, writable=True), default=None,
                 help='Output file (default: standard output).'),
    click.option('--svg', is_flag=True, help='Also write an SVG plot next to the output.'),
    click.option('--seed', type=click.IntRange(0, MAX_SEED), default=0, show_default=True,
                 help='Seed for noisy simulations.'),
]


def scenario_command(name: str):
    """Attach the common options and hand the wrapped command an Invocation"""
    def decorator(func):
        @functools.wraps(func)
        def wrapper(scenario, out, svg, seed, **kwargs):
            invocation = Invocation(name, ScenarioConfig.load(scenario), out, svg, seed)
            logger.info("command_started", command=name, scenario=scenario)
            return func(invocation, **kwargs)

        for option in reversed(COMMON_OPTIONS):
            wrapper = option(wrapper)
        return cli.command(name)(wrapper)
    return decorator


def _pick(flag: Optional[Any], invocation: Invocation, key: str, default: Any) -> Any:
    if flag is not None:
        return flag
    return invocation.scenario.sweep(key, default)


def _pump(invocation: Invocation, pump_nm: Optional[float]) -> PumpSpec:
    pump = invocation.scenario.pump()
    if pump_nm is not None:
        pump = replace(pump, wavelength_p=pump_nm * 1e-9)
    return pump


def _crystal_metadata(crystal, pump: PumpSpec) -> Dict[str, Any]:
    return {
        'crystal': crystal.name,
        'crystal_length_mm': crystal.length_l * 1e3,
        'cut_angle_deg': math.degrees(crystal.cut_angle_alpha),
        'pump_nm': pump.wavelength_p * 1e9,
        'pump_diameter_um': pump.beam_diameter_a * 1e6,
        'pump_power_w': pump.power,
    }


def _signal_wavelengths(invocation: Invocation, flags: Sequence[float]) -> List[float]:
    values = list(flags) if flags else invocation.scenario.sweep('lambda_s_nm', [650.0])
    if not values:
        raise ValidationError("No signal wavelength given")
    return values


@click.group(name=TOOL_NAME, no_args_is_help=False)
@click.version_option(__version__, prog_name=TOOL_NAME)
def cli():
    """Biphoton phase matching, overlap, detection-rate and detector-kinetics calculations."""
    settings = ConfigHelper.validate_config()
    if not settings['valid']:
        raise ValidationError('; '.join(settings['errors']))


@scenario_command('tuning-curve')
@click.option('--pump-nm', type=float, default=None, help='Pump wavelength override (nm).')
@click.option('--crystal', 'crystal_preset', default=None, help='Crystal preset name.')
@click.option('--lambda-min', type=float, default=None, help='Smallest signal wavelength (nm).')
@click.option('--lambda-max', type=float, default=None, help='Largest signal wavelength (nm).')
@click.option('--samples', type=int, default=None, help='Number of wavelengths.')
def tuning_curve_command(invocation: Invocation, pump_nm, crystal_preset, lambda_min, lambda_max, samples):
    """External emission angles versus signal wavelength."""
    pump = _pump(invocation, pump_nm)
    crystal = invocation.scenario.crystal(pump=pump, preset=crystal_preset)
    lambdas = sweep_wavelengths(_pick(lambda_min, invocation, 'lambda_min_nm', 640.0) * 1e-9,
                                _pick(lambda_max, invocation, 'lambda_max_nm', 765.0) * 1e-9,
                                _pick(samples, invocation, 'samples', 126))
    table = tuning_curve(lambdas, pump, crystal)
    invocation.emit(
        table, _crystal_metadata(crystal, pump),
        lambda path: line_plot(table, 'lambda_s_nm', ['theta_ext_s_deg', 'theta_ext_i_deg'],
                               path, 'External emission angles'),
    )


@scenario_command('amplitude-map')
@click.option('--lambda-s', type=float, default=None, help='Signal wavelength (nm).')
@click.option('--half-width', type=float, default=None, help='Grid half-width (mrad).')
@click.option('--points', type=int, default=None, help='Grid points per axis.')
@click.option('--frame', type=click.Choice(['internal', 'external']), default=None)
def amplitude_map_command(invocation: Invocation, lambda_s, half_width, points, frame):
    """Transverse correlation amplitudes F_x, F_z on a deviation grid."""
    pump = invocation.scenario.pump()
    crystal = invocation.scenario.crystal(pump=pump)
    if lambda_s is None:
        lambda_s = _signal_wavelengths(invocation, [])[0]
    frame = _pick(frame, invocation, 'frame', 'external')
    width = _pick(half_width, invocation, 'half_width_mrad', 5.0) * 1e-3
    count = _pick(points, invocation, 'grid_points', 201)

    base = solve_emission_angles(lambda_s * 1e-9, pump, crystal)
    amplitude = correlation_map(base, pump, crystal, GridSpec(width, width, count, count, frame))
    table = amplitude.to_frame()
    metadata = _crystal_metadata(crystal, pump)
    metadata.update({
        'frame': frame,
        'lambda_s_nm': base.lambda_s * 1e9,
        'lambda_i_nm': base.lambda_i * 1e9,
        'theta_s_int_deg': math.degrees(base.theta_s_int),
        'theta_i_int_deg': math.degrees(base.theta_i_int),
        'theta_s_ext_deg': math.degrees(base.theta_s_ext),
        'theta_i_ext_deg': math.degrees(base.theta_i_ext),
        'fz_half_width_mrad': fz_half_width(base, crystal, frame) * 1e3,
    })
    invocation.emit(
        table, metadata,
        lambda path: heatmap(table, 'd_theta_s', 'd_theta_i', 'f_sq', path,
                             f'F^2 at {base.lambda_s * 1e9:.1f} nm'),
    )


@scenario_command('overlap-alpha')
@click.option('--lambda-s', multiple=True, type=float, help='Signal wavelength (nm), repeatable.')
@click.option('--alpha-max', type=float, default=None, help='Largest misalignment (deg).')
@click.option('--samples', type=int, default=None)
def overlap_alpha_command(invocation: Invocation, lambda_s, alpha_max, samples):
    """Overlap versus optic-axis misalignment."""
    pump = invocation.scenario.pump()
    crystal = invocation.scenario.crystal(pump=pump)
    alpha_max = ValidationHelper.require_positive(
        'alpha_max', _pick(alpha_max, invocation, 'alpha_max_deg', 0.05))
    count = ValidationHelper.require_count('samples', _pick(samples, invocation, 'samples', 201), 2)
    alphas = np.radians(np.linspace(-alpha_max, alpha_max, count))

    metadata = _crystal_metadata(crystal, pump)
    parts = []
    for wavelength in _signal_wavelengths(invocation, lambda_s):
        curve = overlap_vs_misalignment(wavelength * 1e-9, alphas, pump, crystal)
        part = curve.to_frame()
        part.insert(0, 'lambda_s_nm', wavelength)
        parts.append(part)
        try:
            metadata[f'half_width_deg_{wavelength:g}nm'] = misalignment_half_width(curve)
        except ValidationError:
            metadata[f'half_width_deg_{wavelength:g}nm'] = math.nan
    table = pd.concat(parts, ignore_index=True)
    invocation.emit(
        table, metadata,
        lambda path: line_plot(table, 'misalignment_deg', ['overlap'], path,
                               'Overlap vs misalignment', group='lambda_s_nm'),
    )


@scenario_command('overlap-z')
@click.option('--lambda-s', multiple=True, type=float, help='Signal wavelength (nm), repeatable.')
@click.option('--z-max', type=float, default=None, help='Largest displacement (mm).')
@click.option('--samples', type=int, default=None)
@click.option('--focal-length', type=float, default=None, help='Lens focal length (mm).')
def overlap_z_command(invocation: Invocation, lambda_s, z_max, samples, focal_length):
    """Overlap versus displacement from the 1:1 imaging plane."""
    pump = invocation.scenario.pump()
    crystal = invocation.scenario.crystal(pump=pump)
    imaging = invocation.scenario.imaging()
    if focal_length is not None:
        imaging = ImagingSystem(focal_length * 1e-3)
    z_max = ValidationHelper.require_positive(
        'z_max', _pick(z_max, invocation, 'z_max_mm', crystal.length_l * 1e3 / 2.0))
    count = ValidationHelper.require_count('samples', _pick(samples, invocation, 'samples', 101), 2)
    zs = np.linspace(-z_max, z_max, count) * 1e-3

    parts = []
    for wavelength in _signal_wavelengths(invocation, lambda_s):
        part = overlap_vs_displacement(wavelength * 1e-9, zs, pump, crystal, imaging).to_frame()
        part.insert(0, 'lambda_s_nm', wavelength)
        parts.append(part)
    table = pd.concat(parts, ignore_index=True)
    metadata = _crystal_metadata(crystal, pump)
    metadata['focal_length_mm'] = imaging.focal_length_f * 1e3
    metadata['magnification'] = imaging.magnification
    invocation.emit(
        table, metadata,
        lambda path: line_plot(table, 'displacement_m', ['overlap'], path,
                               'Overlap vs displacement', group='lambda_s_nm'),
    )


@scenario_command('spectral-overlap')
@click.option('--lambda-min', type=float, default=None, help='Smallest signal wavelength (nm).')
@click.option('--lambda-max', type=float, default=None, help='Largest signal wavelength (nm).')
@click.option('--samples', type=int, default=None)
@click.option('--nodes', type=int, default=None, help='Quadrature nodes across the crystal.')
@click.option('--focal-length', type=float, default=None, help='Lens focal length (mm).')
def spectral_overlap_command(invocation: Invocation, lambda_min, lambda_max, samples, nodes, focal_length):
    """Displacement-averaged overlap S(lambda) of a finite crystal."""
    pump = invocation.scenario.pump()
    crystal = invocation.scenario.crystal(pump=pump)
    imaging = invocation.scenario.imaging()
    if focal_length is not None:
        imaging = ImagingSystem(focal_length * 1e-3)
    lambdas = sweep_wavelengths(_pick(lambda_min, invocation, 'lambda_min_nm', 640.0) * 1e-9,
                                _pick(lambda_max, invocation, 'lambda_max_nm', 765.0) * 1e-9,
                                _pick(samples, invocation, 'samples', 126))
    node_count = _pick(nodes, invocation, 'nodes', 129)
    curve = spectral_overlap(lambdas, crystal, pump, imaging, nodes=node_count)
    table = curve.to_frame()
    metadata = _crystal_metadata(crystal, pump)
    metadata.update({
        'focal_length_mm': imaging.focal_length_f * 1e3,
        'magnification': imaging.magnification,
        'nodes': node_count,
        'band_efficiency': band_efficiency(curve),
    })
    invocation.emit(
        table, metadata,
        lambda path: line_plot(table, 'wavelength_nm', ['overlap'], path, 'Spectral overlap'),
    )


@scenario_command('rates')
def rates_command(invocation: Invocation):
    """Mode counts, occupations and two-photon rates of the scenario fields."""
    process = invocation.scenario.detection()
    area, length = invocation.scenario.volume()
    rows = []
    for kind in ('coherent', 'spdc'):
        field = invocation.scenario.field(kind)
        m = mode_count(DetectionVolume.for_field(field, area, length))
        n = photons_per_mode(field)
        rate = rate_coherent(process, m, n) if kind == 'coherent' else rate_biphoton(process, m, n)
        rows.append({
            'field': field.kind,
            'wavelength_nm': field.wavelength * 1e9,
            'intensity_w_m2': field.intensity_I,
            'solid_angle_sr': field.solid_angle,
            'bandwidth_rad_s': field.bandwidth,
            'mode_count': m,
            'photons_per_mode': n,
            'total_photons': total_photons(field, area, length),
            'rate': rate,
        })
    metadata = {'eta2': process.eta2, 'cross_section_m2': area, 'length_m': length}
    invocation.emit(pd.DataFrame(rows), metadata)


@scenario_command('enhancement')
def enhancement_command(invocation: Invocation):
    """Biphoton enhancement factor xi for the scenario fields."""
    area, length = invocation.scenario.volume()
    coherent = invocation.scenario.field('coherent')
    spdc = invocation.scenario.field('spdc')
    m_coh = mode_count(DetectionVolume.for_field(coherent, area, length))
    m_spdc = mode_count(DetectionVolume.for_field(spdc, area, length))
    n_coh = photons_per_mode(coherent)
    n_spdc = photons_per_mode(spdc)
    enhancement = enhancement_for_fields(coherent, spdc, area, length)
    table = pd.DataFrame([{
        'm_coh': m_coh,
        'n_coh': n_coh,
        'm_spdc': m_spdc,
        'n_spdc': n_spdc,
        'xi_ratio': enhancement.ratio,
        'xi': enhancement.xi,
        'xi_equal_occupation': enhancement_equal_occupation(m_coh, m_spdc, n_coh),
    }])
    metadata = {'intensity_w_m2': coherent.intensity_I, 'cross_section_m2': area, 'length_m': length}
    invocation.emit(table, metadata)


@scenario_command('upconversion-estimate')
@click.option('--xi', type=float, default=None, help='Enhancement factor (default: from the scenario fields).')
@click.option('--overlap-efficiency', type=float, default=None, help='Spectral overlap reduction factor.')
def upconversion_command(invocation: Invocation, xi, overlap_efficiency):
    """Expected up-converted photon rate from a scaled second-harmonic measurement."""
    settings = invocation.scenario.upconversion()
    if xi is None:
        area, length = invocation.scenario.volume()
        xi = enhancement_for_fields(invocation.scenario.field('coherent'),
                                    invocation.scenario.field('spdc'), area, length).xi
    efficiency = settings['overlap_efficiency'] if overlap_efficiency is None else overlap_efficiency
    estimate = upconversion_estimate(settings['laser_power'], settings['sh_power'], settings['target_power'],
                                     settings['duty_cycle'], settings['photon_wavelength'], xi, efficiency)
    stated = settings['stated_photon_rate']
    table = pd.DataFrame([{
        'up_power_w': estimate.power_w,
        'photon_energy_j': estimate.photon_energy_j,
        'photon_rate_per_s': estimate.photon_rate,
        'xi': xi,
        'enhanced_rate_per_s': estimate.enhanced_rate,
        'overlap_efficiency': efficiency,
        'reduced_rate_per_s': estimate.reduced_rate,
        'stated_photon_rate_per_s': stated,
        'stated_enhanced_rate_per_s': stated * xi,
    }])
    metadata = {
        'laser_power_w': settings['laser_power'],
        'sh_power_w': settings['sh_power'],
        'target_power_w': settings['target_power'],
        'duty_cycle': settings['duty_cycle'],
        'photon_wavelength_nm': settings['photon_wavelength'] * 1e9,
        'note': 'photon_rate_per_s follows from the stated powers; stated_photon_rate_per_s is the quoted figure',
    }
    invocation.emit(table, metadata)


@scenario_command('simulate-sensitization')
@click.option('--scale', 'scales', multiple=True, type=float, help='Intensity scale factor, repeatable.')
@click.option('--horizon', type=float, default=None, help='Simulated time (s).')
@click.option('--step', type=float, default=None, help='Integration step (s).')
@click.option('--exposure', type=float, default=None, help='Illuminated time before darkness (s).')
@click.option('--noise', type=float, default=0.0, show_default=True,
              help='Multiplicative Gaussian noise fraction on the sensitivity.')
@click.option('--stride', type=int, default=10, show_default=True, help='Write every n-th time step.')
def sensitization_command(invocation: Invocation, scales, horizon, step, exposure, noise, stride):
    """Trap populations and sensitivity under illumination and in the dark."""
    model = invocation.scenario.trap_model()
    illumination = invocation.scenario.illumination()
    horizon = illumination['horizon'] if horizon is None else horizon
    step = illumination['step'] if step is None else step
    if exposure is None:
        exposure, schedule = illumination['exposure'], illumination['schedule']
    else:
        schedule = IntensitySchedule.exposure_within(illumination['intensity'], exposure, horizon)
    ValidationHelper.require_nonnegative('noise', noise)
    stride = ValidationHelper.require_count('stride', stride, 1)

    rng = np.random.default_rng(invocation.seed)
    metadata = {'intensity_w_m2': illumination['intensity'], 'exposure_s': exposure,
                'horizon_s': horizon, 'step_s': step, 'noise_fraction': noise}
    parts = []
    for scale in (scales or illumination['scales']):
        run = simulate_populations(model, schedule.scaled(scale), horizon, step)
        sensitivity = run.sensitivity
        if noise > 0:
            sensitivity = add_multiplicative_noise(Trace(run.times, sensitivity), noise, rng).values
        parts.append(pd.DataFrame({
            'scale': scale,
            'time_s': run.times,
            'intensity_w_m2': run.intensity,
            'n1': run.populations[:, 0],
            'n2': run.populations[:, 1],
            'sensitivity': sensitivity,
        }).iloc[::stride])
        metadata[f'peak_rise_x{scale:g}'] = float(np.max(run.sensitivity) / model.base_sensitivity)
    table = pd.concat(parts, ignore_index=True)
    invocation.emit(
        table, metadata,
        lambda path: line_plot(table, 'time_s', ['sensitivity'], path, 'Sensitization', group='scale'),
    )


def read_trace(path: str) -> Trace:
    """(time_s, value[, sigma]) columns under a one-line header; '#' lines skipped"""
    data = pd.read_csv(path, comment='#')
    if data.shape[1] not in (2, 3):
        raise ValidationError(f"{path}: expected 2 or 3 columns, found {data.shape[1]}")
    try:
        columns = [data.iloc[:, k].to_numpy(dtype=float) for k in range(data.shape[1])]
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric data ({exc})") from exc
    return Trace(columns[0], columns[1], columns[2] if len(columns) == 3 else None)


@scenario_command('fit-decay')
@click.option('--input', 'input_path', type=click.Path(exists=True, dir_okay=False), required=True,
              help='Comma-separated trace (time_s, value[, sigma]).')
def fit_decay_command(invocation: Invocation, input_path):
    """Fit a1 exp(-t/tau1) + a2 exp(-t/tau2) + c to a relaxation trace."""
    trace = read_trace(input_path)
    fit = fit_biexponential(trace)
    model = fit.model(trace.times)
    table = pd.DataFrame({
        'time_s': trace.times,
        'value': trace.values,
        'model': model,
        'residual': trace.values - model,
    })
    metadata = {
        'input': Path(input_path).name,
        'a1': fit.a1,
        'tau1_s': fit.tau1,
        'a2': fit.a2,
        'tau2_s': fit.tau2,
        'offset': fit.offset,
        'rms_residual': fit.rms_residual,
        'iterations': fit.iterations,
        'converged': fit.converged,
    }
    invocation.emit(
        table, metadata,
        lambda path: line_plot(table, 'time_s', ['value', 'model'], path, 'Relaxation fit'),
    )
    if not fit.converged:
        raise ConvergenceError(f"Bi-exponential fit did not converge in {fit.iterations} iterations")


@scenario_command('response-scan')
@click.option('--z-max', type=float, default=None, help='Largest detector offset (mm).')
@click.option('--samples', type=int, default=None)
@click.option('--power', type=float, default=None, help='Beam power (W).')
@click.option('--gain', type=float, default=None, help='Detector gain (counts m^2 / (W^2 s)).')
def response_scan_command(invocation: Invocation, z_max, samples, power, gain):
    """Quadratic detector count rate versus position through the focus."""
    scan = invocation.scenario.detector_scan()
    z_limit = scan['z_max'] if z_max is None else z_max * 1e-3
    ValidationHelper.require_positive('z_max', z_limit)
    count = ValidationHelper.require_count('samples', scan['samples'] if samples is None else samples, 2)
    power = scan['power'] if power is None else power
    gain = scan['gain'] if gain is None else gain
    spot = scan['spot']
    zs = np.linspace(-z_limit, z_limit, count)
    table = pd.DataFrame({
        'z_mm': zs * 1e3,
        'spot_area_m2': spot.area(zs),
        'rate_counts_s': response_vs_position(zs, spot, power, gain),
    })
    metadata = {'power_w': power, 'gain': gain, 'waist_area_m2': spot.waist_area,
                'rayleigh_length_mm': spot.rayleigh_length * 1e3}
    invocation.emit(
        table, metadata,
        lambda path: line_plot(table, 'z_mm', ['rate_counts_s'], path, 'Detector response scan'),
    )


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return the process exit status"""
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        status = cli.main(args=args, prog_name=TOOL_NAME, standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        logger.error("usage_error", error=exc.format_message())
        return 1
    except click.Abort:
        click.echo('Aborted!', err=True)
        return 1
    except ValidationError as exc:
        logger.error("validation_error", error=str(exc), kind=type(exc).__name__)
        click.echo(f'Error: {exc}', err=True)
        return 1
    except NumericError as exc:
        logger.error("numeric_error", error=str(exc), kind=type(exc).__name__)
        click.echo(f'Error: {exc}', err=True)
        return 2
    return status if isinstance(status, int) else 0
