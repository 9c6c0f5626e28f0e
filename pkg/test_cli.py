#!/usr/bin/env python3
"""
Test script for the command-line interface: table schemas, golden tables,
reproducible output, exit codes and the SVG side output
"""

import subprocess
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from biphoton import __version__
from biphoton.cli import run
from biphoton.kinetics import IntensitySchedule
from biphoton.scenario import ScenarioConfig

FIXTURE = Path(__file__).parent / 'fixtures' / 'decay_relaxation.csv'

COMMANDS = {
    'tuning-curve': (['--samples', '11'],
                     ['lambda_s_nm', 'lambda_i_nm', 'theta_ext_s_deg', 'theta_ext_i_deg', 'residual']),
    'amplitude-map': (['--lambda-s', '690', '--points', '21'],
                      ['d_theta_s', 'd_theta_i', 'f_x', 'f_z', 'f_sq']),
    'overlap-alpha': (['--lambda-s', '650', '--samples', '21'],
                      ['lambda_s_nm', 'misalignment_deg', 'overlap']),
    'overlap-z': (['--lambda-s', '650', '--samples', '11'],
                  ['lambda_s_nm', 'displacement_m', 'overlap']),
    'spectral-overlap': (['--samples', '5', '--nodes', '33'],
                         ['wavelength_nm', 'overlap']),
    'rates': (['--scenario', 'paper-sec2'],
              ['field', 'wavelength_nm', 'intensity_w_m2', 'solid_angle_sr', 'bandwidth_rad_s',
               'mode_count', 'photons_per_mode', 'total_photons', 'rate']),
    'enhancement': (['--scenario', 'paper-sec2'],
                    ['m_coh', 'n_coh', 'm_spdc', 'n_spdc', 'xi_ratio', 'xi', 'xi_equal_occupation']),
    'upconversion-estimate': (['--scenario', 'paper-sec2'],
                              ['up_power_w', 'photon_energy_j', 'photon_rate_per_s', 'xi',
                               'enhanced_rate_per_s', 'overlap_efficiency', 'reduced_rate_per_s',
                               'stated_photon_rate_per_s', 'stated_enhanced_rate_per_s']),
    'simulate-sensitization': (['--scenario', 'paper-fig8', '--horizon', '20', '--step', '0.1',
                                '--scale', '1.0', '--noise', '0.01', '--seed', '7'],
                               ['scale', 'time_s', 'intensity_w_m2', 'n1', 'n2', 'sensitivity']),
    'fit-decay': (['--input', str(FIXTURE)],
                  ['time_s', 'value', 'model', 'residual']),
    'response-scan': (['--samples', '11'],
                      ['z_mm', 'spot_area_m2', 'rate_counts_s']),
}

GOLDEN_DIR = Path(__file__).parent / 'fixtures' / 'golden'

# args, key columns (None: the whole table is frozen), rtol, atol
GOLDEN = {
    'tuning-curve': ([], ['lambda_s_nm'], 1e-6, 1e-4),
    'amplitude-map': ([], ['d_theta_s', 'd_theta_i'], 1e-9, 1e-9),
    'overlap-alpha': (['--samples', '5'], ['lambda_s_nm', 'misalignment_deg'], 1e-9, 1e-9),
    'overlap-z': (['--samples', '5'], ['lambda_s_nm', 'displacement_m'], 1e-9, 1e-9),
    'spectral-overlap': ([], ['wavelength_nm'], 1e-9, 2e-3),
    'rates': (['--scenario', 'paper-sec2'], None, 1e-9, 0.0),
    'enhancement': (['--scenario', 'paper-sec2'], None, 1e-9, 0.0),
    'upconversion-estimate': (['--scenario', 'paper-sec2'], None, 1e-9, 0.0),
    'simulate-sensitization': (['--scenario', 'paper-fig8', '--horizon', '20', '--step', '0.1', '--stride', '50'],
                               None, 1e-9, 1e-12),
    'fit-decay': (['--input', str(FIXTURE)], None, 1e-6, 1e-8),
    'response-scan': ([], None, 1e-9, 0.0),
}


def read_output(path):
    """(header dict, table) of a command's output file"""
    header = {}
    for line in Path(path).read_text(encoding='utf-8').splitlines():
        if not line.startswith('# '):
            break
        key, _, value = line[2:].partition('=')
        header[key] = value
    return header, pd.read_csv(path, comment='#')


def invoke(command, args, out):
    return run([command, *args, '--out', str(out)])


@pytest.mark.parametrize('command', sorted(COMMANDS))
def test_schema_and_reproducibility(command, tmp_path):
    args, columns = COMMANDS[command]
    first, second = tmp_path / 'first.csv', tmp_path / 'second.csv'
    assert invoke(command, args, first) == 0
    assert invoke(command, args, second) == 0
    assert first.read_bytes() == second.read_bytes()

    header, table = read_output(first)
    assert list(table.columns) == columns
    assert len(table) > 0
    assert header['tool'] == 'biphoton'
    assert header['version'] == __version__
    assert header['command'] == command
    assert len(header['scenario_hash']) == 64
    assert 'hbar_J_s' in header


def header_value_matches(actual, expected, rtol, atol):
    try:
        return float(actual) == pytest.approx(float(expected), rel=rtol, abs=atol)
    except ValueError:
        return actual == expected


def pick_golden_rows(table, golden, keys):
    """Output rows whose key columns match each golden row, in golden order"""
    picked = []
    for _, row in golden.iterrows():
        hit = np.ones(len(table), dtype=bool)
        for key in keys:
            hit &= np.isclose(table[key].to_numpy(dtype=float), row[key], rtol=0.0, atol=1e-9)
        assert hit.sum() == 1, f'no unique row for {row[keys].to_dict()}'
        picked.append(int(np.flatnonzero(hit)[0]))
    return table.iloc[picked].reset_index(drop=True)


def test_every_command_has_a_golden_file():
    assert sorted(GOLDEN) == sorted(COMMANDS)
    for command in GOLDEN:
        assert (GOLDEN_DIR / f'{command}.csv').is_file()


@pytest.mark.parametrize('command', sorted(GOLDEN))
def test_matches_golden(command, tmp_path):
    args, keys, rtol, atol = GOLDEN[command]
    out = tmp_path / 'out.csv'
    assert invoke(command, args, out) == 0
    header, table = read_output(out)
    golden_header, golden = read_output(GOLDEN_DIR / f'{command}.csv')

    for key, value in golden_header.items():
        assert key in header, key
        assert header_value_matches(header[key], value, rtol, atol), (key, header[key], value)

    if keys is None:
        assert list(table.columns) == list(golden.columns)
        assert len(table) == len(golden)
        rows = table
    else:
        assert set(golden.columns) <= set(table.columns)
        rows = pick_golden_rows(table, golden, keys)
    for column in golden.columns:
        if golden[column].dtype == object:
            assert rows[column].tolist() == golden[column].tolist(), column
            continue
        known = golden[column].notna().to_numpy()
        np.testing.assert_allclose(rows[column].to_numpy(dtype=float)[known],
                                   golden[column].to_numpy(dtype=float)[known],
                                   rtol=rtol, atol=atol, err_msg=column)


def test_stdout_output(capsys):
    assert run(['tuning-curve', '--samples', '3']) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == '# tool=biphoton'
    assert lines[-4] == 'lambda_s_nm,lambda_i_nm,theta_ext_s_deg,theta_ext_i_deg,residual'


def test_amplitude_map_grid(tmp_path):
    out = tmp_path / 'map.csv'
    assert invoke('amplitude-map', ['--lambda-s', '690', '--points', '21', '--frame', 'internal'], out) == 0
    header, table = read_output(out)
    assert len(table) == 21 * 21
    assert header['frame'] == 'internal'
    assert table['f_sq'].max() == pytest.approx(1.0)
    assert table['f_sq'].min() >= 0.0


def test_enhancement_value(tmp_path):
    out = tmp_path / 'xi.csv'
    assert invoke('enhancement', ['--scenario', 'paper-sec2'], out) == 0
    _, table = read_output(out)
    assert table['xi'][0] == pytest.approx(219.3, abs=1.0)
    assert table['xi_ratio'][0] == pytest.approx(table['xi'][0], rel=1e-9)


def test_upconversion_with_explicit_xi(tmp_path):
    out = tmp_path / 'up.csv'
    assert invoke('upconversion-estimate', ['--scenario', 'paper-sec2', '--xi', '100',
                                            '--overlap-efficiency', '0.5'], out) == 0
    _, table = read_output(out)
    row = table.iloc[0]
    assert row['photon_rate_per_s'] == pytest.approx(0.0265122, rel=1e-5)
    assert row['enhanced_rate_per_s'] == pytest.approx(2.65122, rel=1e-5)
    assert row['reduced_rate_per_s'] == pytest.approx(1.32561, rel=1e-5)
    assert row['stated_enhanced_rate_per_s'] == pytest.approx(20.0)


def test_fit_decay_metadata(tmp_path):
    out = tmp_path / 'fit.csv'
    assert invoke('fit-decay', ['--input', str(FIXTURE)], out) == 0
    header, table = read_output(out)
    assert float(header['tau1_s']) == pytest.approx(100.0, rel=1e-4)
    assert float(header['tau2_s']) == pytest.approx(5.0, rel=1e-4)
    assert header['converged'] == 'True'
    assert len(table) == 201


def test_seed_changes_noise(tmp_path):
    args = ['--scenario', 'paper-fig8', '--horizon', '10', '--step', '0.1', '--scale', '1.0', '--noise', '0.01']
    first, second = tmp_path / 'a.csv', tmp_path / 'b.csv'
    assert invoke('simulate-sensitization', args + ['--seed', '1'], first) == 0
    assert invoke('simulate-sensitization', args + ['--seed', '2'], second) == 0
    header, table_a = read_output(first)
    _, table_b = read_output(second)
    assert header['seed'] == '1'
    assert not table_a['sensitivity'].equals(table_b['sensitivity'])
    assert table_a['n1'].equals(table_b['n1'])



def test_sensitization_follows_scenario_schedule(monkeypatch, tmp_path):
    loaded = ScenarioConfig.illumination

    def interrupted(self):
        settings = loaded(self)
        lit = settings['intensity']
        settings['schedule'] = IntensitySchedule((0.0, 2.0, 4.0), (lit, 0.0, lit))
        return settings

    monkeypatch.setattr(ScenarioConfig, 'illumination', interrupted)
    args = ['--scenario', 'paper-fig8', '--horizon', '6', '--step', '0.1', '--scale', '1.0', '--stride', '1']
    out = tmp_path / 's.csv'
    assert invoke('simulate-sensitization', args, out) == 0
    _, table = read_output(out)
    dark = table[(table['time_s'] > 2.05) & (table['time_s'] < 3.95)]
    assert len(dark) == 19
    assert (dark['intensity_w_m2'] == 0.0).all()
    assert table['intensity_w_m2'].iloc[-1] > 0.0

    assert invoke('simulate-sensitization', args + ['--exposure', '1'], out) == 0
    _, table = read_output(out)
    assert (table.loc[table['time_s'] > 1.05, 'intensity_w_m2'] == 0.0).all()


def test_overlap_alpha_half_width_metadata(tmp_path):
    out = tmp_path / 'alpha.csv'
    assert invoke('overlap-alpha', ['--lambda-s', '650', '--samples', '201', '--alpha-max', '0.03'], out) == 0
    header, _ = read_output(out)
    assert float(header['half_width_deg_650nm']) == pytest.approx(0.0145, rel=0.05)


def test_svg_written(tmp_path):
    out = tmp_path / 'curve.csv'
    assert run(['tuning-curve', '--samples', '5', '--svg', '--out', str(out)]) == 0
    svg = out.with_suffix('.svg')
    assert svg.is_file()
    assert svg.read_text(encoding='utf-8').lstrip().startswith('<?xml')


class TestExitCodes:

    def test_invalid_range(self, tmp_path):
        assert invoke('tuning-curve', ['--lambda-min', '0'], tmp_path / 'x.csv') == 1

    def test_unknown_command(self):
        assert run(['no-such-command']) == 1

    def test_missing_command_prints_usage_to_stderr(self, capsys):
        assert run([]) == 1
        captured = capsys.readouterr()
        assert 'Usage: biphoton' in captured.err
        assert 'Missing command' in captured.err
        assert captured.out == ''

    def test_unknown_flag(self):
        assert run(['tuning-curve', '--no-such-flag']) == 1

    def test_missing_scenario(self):
        assert run(['tuning-curve', '--scenario', 'no-such-scenario']) == 1

    def test_degenerate_misalignment_has_no_derivative(self, tmp_path):
        assert invoke('overlap-alpha', ['--lambda-s', '702.2', '--samples', '5'], tmp_path / 'x.csv') == 2

    def test_flat_trace_cannot_be_fitted(self, tmp_path):
        flat = tmp_path / 'flat.csv'
        flat.write_text('time_s,value\n' + ''.join(f'{t},2.0\n' for t in range(20)), encoding='utf-8')
        assert invoke('fit-decay', ['--input', str(flat)], tmp_path / 'x.csv') == 2

    def test_bad_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv('BIPHOTON_FLOAT_FORMAT', '%q')
        assert run(['tuning-curve', '--samples', '3']) == 1
        monkeypatch.delenv('BIPHOTON_FLOAT_FORMAT')
        monkeypatch.setenv('BIPHOTON_SCENARIO_DIR', str(tmp_path / 'missing'))
        assert run(['tuning-curve', '--samples', '3']) == 1

    def test_help_and_version(self, capsys):
        assert run(['--help']) == 0
        assert run(['--version']) == 0
        assert __version__ in capsys.readouterr().out


def test_module_entry_point():
    result = subprocess.run([sys.executable, '-m', 'biphoton', '--help'], capture_output=True, text=True,
                            cwd=Path(__file__).parent)
    assert result.returncode == 0
    assert 'tuning-curve' in result.stdout
