"""
Scenario files: INI sections describing crystal, pump, imaging, detection,
radiation fields and trap model, with units suffixed in key names.
"""

import configparser
import hashlib
import math
import os
from pathlib import Path
from typing import Dict, Iterable, List, Optional

from .dispersion import PRESET_DIR, CrystalSpec, SellmeierSet, read_crystal_presets
from .errors import ValidationError
from .kinetics import GaussianSpot, IntensitySchedule, TrapModel
from .overlap import ImagingSystem
from .phasematch import PumpSpec, degenerate_cut_angle
from .rates import (
    DetectionProcess,
    RadiationField,
    intensity_from_power,
    solid_angle_from_divergence,
)
from .utils import ConfigHelper, logger

SCENARIO_DIR = PRESET_DIR / 'scenarios'

_SELLMEIER_KEYS = ('b0', 'b1_um2', 'b2_um2', 'b3_per_um2')
_FIELD_KEYS = {'intensity_w_m2', 'power_w', 'spot_diameter_um', 'wavelength_nm',
               'solid_angle_sr', 'divergence_rad', 'bandwidth_rad_s'}

SECTION_KEYS: Dict[str, set] = {
    'crystal': {'preset', 'name', 'length_mm', 'cut_angle_deg'}
               | {f'{axis}_{key}' for axis in ('ordinary', 'extraordinary') for key in _SELLMEIER_KEYS},
    'pump': {'wavelength_nm', 'beam_diameter_um', 'power_w'},
    'imaging': {'focal_length_mm'},
    'detection': {'eta2'},
    'volume': {'spot_diameter_um', 'cross_section_m2', 'length_mm'},
    'coherent_field': _FIELD_KEYS,
    'spdc_field': _FIELD_KEYS,
    'upconversion': {'laser_power_w', 'sh_power_w', 'target_power_w', 'duty_cycle',
                     'photon_wavelength_nm', 'stated_photon_rate_per_s', 'overlap_efficiency'},
    'trap_model': {'capacity_1', 'capacity_2', 'fill_coeff_1_m2_per_ws', 'fill_coeff_2_m2_per_ws',
                   'lifetime_1_s', 'lifetime_2_s', 'base_sensitivity', 'gain_1', 'gain_2'},
    'illumination': {'intensity_w_m2', 'power_nw', 'spot_diameter_um', 'exposure_s',
                     'horizon_s', 'step_s', 'intensity_scales'},
    'detector_scan': {'power_w', 'spot_diameter_um', 'wavelength_nm', 'gain', 'z_max_mm', 'samples'},
    'sweep': {'lambda_min_nm', 'lambda_max_nm', 'samples', 'lambda_s_nm', 'frame', 'half_width_mrad',
              'grid_points', 'alpha_max_deg', 'z_max_mm', 'nodes'},
}

_MISSING = object()


def resolve_scenario_path(name_or_path: str) -> Path:
    """Existing path, then $BIPHOTON_SCENARIO_DIR/<name>.ini, then packaged presets"""
    candidate = Path(name_or_path)
    if candidate.is_file():
        return candidate
    search = []
    scenario_dir = ConfigHelper.get_config()['scenario_dir']
    if scenario_dir:
        search.append(Path(scenario_dir))
    search.append(SCENARIO_DIR)
    for directory in search:
        path = directory / f'{name_or_path}.ini'
        if path.is_file():
            return path
    raise ValidationError(
        f"Scenario {name_or_path!r} not found (searched {', '.join(str(d) for d in search)}; "
        f"available: {', '.join(available_scenarios(search)) or 'none'})"
    )


class ScenarioConfig:
    """Parsed scenario; each subcommand validates only the sections it reads"""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        unknown = [s for s in parser.sections() if s not in SECTION_KEYS]
        if unknown:
            raise ValidationError(f"Scenario {name!r} has unknown sections: {', '.join(sorted(unknown))}")
        self._parser = parser
        self.name = name

    @classmethod
    def from_string(cls, text: str, name: str = '<string>') -> 'ScenarioConfig':
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            parser.read_string(text, source=name)
        except configparser.Error as exc:
            raise ValidationError(f"Malformed scenario {name!r}: {exc}") from exc
        return cls(parser, name)

    @classmethod
    def load(cls, name_or_path: str) -> 'ScenarioConfig':
        path = resolve_scenario_path(name_or_path)
        logger.debug("scenario_loaded", scenario=name_or_path, path=str(path))
        return cls.from_string(path.read_text(encoding='utf-8'), name_or_path)

    def digest(self) -> str:
        lines = []
        for section in sorted(self._parser.sections()):
            lines.append(f'[{section}]')
            for key in sorted(self._parser[section]):
                lines.append(f'{key}={self._parser[section][key].strip()}')
        return hashlib.sha256('\n'.join(lines).encode('utf-8')).hexdigest()

    def section(self, name: str) -> Dict[str, str]:
        if name not in SECTION_KEYS:
            raise ValidationError(f"Unknown scenario section {name!r}")
        if not self._parser.has_section(name):
            return {}
        values = dict(self._parser[name])
        unknown = sorted(set(values) - SECTION_KEYS[name])
        if unknown:
            raise ValidationError(f"[{name}] has unknown keys: {', '.join(unknown)}")
        return values

    def _number(self, values: Dict[str, str], section: str, key: str, default=_MISSING) -> float:
        if key not in values:
            if default is _MISSING:
                raise ValidationError(f"[{section}] is missing required key {key!r}")
            return default
        try:
            return float(values[key])
        except ValueError as exc:
            raise ValidationError(f"[{section}] {key}={values[key]!r} is not a number") from exc

    def sweep(self, key: str, default=None):
        values = self.section('sweep')
        if key not in values:
            return default
        if key == 'frame':
            return values[key].strip()
        if key == 'lambda_s_nm':
            return [float(v) for v in values[key].split()]
        number = self._number(values, 'sweep', key)
        return int(number) if key in ('samples', 'grid_points', 'nodes') else number

    def pump(self) -> PumpSpec:
        values = self.section('pump')
        return PumpSpec(
            wavelength_p=self._number(values, 'pump', 'wavelength_nm', 351.1) * 1e-9,
            beam_diameter_a=self._number(values, 'pump', 'beam_diameter_um', 100.0) * 1e-6,
            power=self._number(values, 'pump', 'power_w', 0.0),
        )

    def crystal(self, pump: Optional[PumpSpec] = None, preset: Optional[str] = None) -> CrystalSpec:
        values = self.section('crystal')
        preset_name = preset or values.get('preset', 'bbo')
        presets = read_crystal_presets()
        if preset_name not in presets:
            raise ValidationError(f"Unknown crystal preset {preset_name!r}; known: {', '.join(sorted(presets))}")
        merged = dict(presets[preset_name])
        merged.update({k: v for k, v in values.items() if k != 'preset'})

        def sellmeier(axis: str) -> SellmeierSet:
            return SellmeierSet(*(self._number(merged, 'crystal', f'{axis}_{key}') for key in _SELLMEIER_KEYS))

        length = self._number(merged, 'crystal', 'length_mm') * 1e-3
        ordinary, extraordinary = sellmeier('ordinary'), sellmeier('extraordinary')
        name = merged.get('name', preset_name)
        cut = merged.get('cut_angle_deg', 'degenerate').strip()
        if cut == 'degenerate':
            provisional = CrystalSpec(length, math.pi / 6, ordinary, extraordinary, name)
            return provisional.with_cut_angle(degenerate_cut_angle(pump or self.pump(), provisional))
        alpha = math.radians(self._number(merged, 'crystal', 'cut_angle_deg'))
        return CrystalSpec(length, alpha, ordinary, extraordinary, name)

    def imaging(self) -> ImagingSystem:
        values = self.section('imaging')
        return ImagingSystem(self._number(values, 'imaging', 'focal_length_mm', 50.0) * 1e-3)

    def detection(self) -> DetectionProcess:
        return DetectionProcess(self._number(self.section('detection'), 'detection', 'eta2', 1.0))

    def volume(self):
        """(cross_section_A m^2, length_L m) of the detector"""
        values = self.section('volume')
        if 'cross_section_m2' in values:
            area = self._number(values, 'volume', 'cross_section_m2')
        else:
            diameter = self._number(values, 'volume', 'spot_diameter_um') * 1e-6
            area = math.pi * (diameter / 2.0) ** 2
        return area, self._number(values, 'volume', 'length_mm') * 1e-3

    def field(self, kind: str) -> RadiationField:
        section = 'coherent_field' if kind == 'coherent' else 'spdc_field'
        values = self.section(section)
        if not values:
            raise ValidationError(f"Scenario {self.name!r} has no [{section}] section")
        if 'intensity_w_m2' in values:
            intensity = self._number(values, section, 'intensity_w_m2')
        else:
            intensity = intensity_from_power(self._number(values, section, 'power_w'),
                                             self._number(values, section, 'spot_diameter_um') * 1e-6)
        if 'solid_angle_sr' in values:
            solid_angle = self._number(values, section, 'solid_angle_sr')
        else:
            solid_angle = solid_angle_from_divergence(self._number(values, section, 'divergence_rad'))
        return RadiationField(
            intensity_I=intensity,
            wavelength=self._number(values, section, 'wavelength_nm') * 1e-9,
            solid_angle=solid_angle,
            bandwidth=self._number(values, section, 'bandwidth_rad_s'),
            kind='coherent' if kind == 'coherent' else 'biphoton',
        )

    def upconversion(self) -> Dict[str, float]:
        values = self.section('upconversion')
        section = 'upconversion'
        return {
            'laser_power': self._number(values, section, 'laser_power_w'),
            'sh_power': self._number(values, section, 'sh_power_w'),
            'target_power': self._number(values, section, 'target_power_w'),
            'duty_cycle': self._number(values, section, 'duty_cycle'),
            'photon_wavelength': self._number(values, section, 'photon_wavelength_nm') * 1e-9,
            'stated_photon_rate': self._number(values, section, 'stated_photon_rate_per_s', math.nan),
            'overlap_efficiency': self._number(values, section, 'overlap_efficiency', 1.0),
        }

    def trap_model(self) -> TrapModel:
        values = self.section('trap_model')
        default = TrapModel()

        def pair(prefix: str, suffix: str, fallback) -> tuple:
            return tuple(self._number(values, 'trap_model', f'{prefix}_{j}{suffix}', fallback[j - 1])
                         for j in (1, 2))

        return TrapModel(
            capacity=pair('capacity', '', default.capacity),
            fill_coefficient=pair('fill_coeff', '_m2_per_ws', default.fill_coefficient),
            lifetime=pair('lifetime', '_s', default.lifetime),
            base_sensitivity=self._number(values, 'trap_model', 'base_sensitivity', default.base_sensitivity),
            gain=pair('gain', '', default.gain),
        )

    def illumination(self) -> Dict[str, object]:
        values = self.section('illumination')
        section = 'illumination'
        if 'intensity_w_m2' in values:
            intensity = self._number(values, section, 'intensity_w_m2')
        else:
            intensity = intensity_from_power(self._number(values, section, 'power_nw', 1.4) * 1e-9,
                                             self._number(values, section, 'spot_diameter_um', 35.0) * 1e-6)
        horizon = self._number(values, section, 'horizon_s', 300.0)
        exposure = self._number(values, section, 'exposure_s', horizon)
        schedule = IntensitySchedule.exposure_within(intensity, exposure, horizon)
        scales = [float(v) for v in values.get('intensity_scales', '1.0').split()]
        return {
            'schedule': schedule,
            'intensity': intensity,
            'horizon': horizon,
            'exposure': exposure,
            'step': self._number(values, section, 'step_s', 0.05),
            'scales': scales,
        }

    def detector_scan(self) -> Dict[str, object]:
        values = self.section('detector_scan')
        section = 'detector_scan'
        spot = GaussianSpot.from_diameter(
            self._number(values, section, 'spot_diameter_um', 35.0) * 1e-6,
            self._number(values, section, 'wavelength_nm', 650.0) * 1e-9,
        )
        return {
            'spot': spot,
            'power': self._number(values, section, 'power_w', 1.4e-9),
            'gain': self._number(values, section, 'gain', 5e10),
            'z_max': self._number(values, section, 'z_max_mm', 5.0) * 1e-3,
            'samples': int(self._number(values, section, 'samples', 101)),
        }


def available_scenarios(directories: Optional[Iterable[Path]] = None) -> List[str]:
    directories = list(directories) if directories else [SCENARIO_DIR]
    names = set()
    for directory in directories:
        if os.path.isdir(directory):
            names.update(p.stem for p in Path(directory).glob('*.ini'))
    return sorted(names)
