#!/usr/bin/env python3
"""
Test script for trap kinetics, decay fitting and the position-scan response
"""

import math
from pathlib import Path

import numpy as np
import pytest

from biphoton.cli import read_trace
from biphoton.errors import RankDeficiencyError, StabilityError, ValidationError
from biphoton.kinetics import (
    CALIBRATION_INTENSITY,
    GaussianSpot,
    IntensitySchedule,
    Trace,
    TrapModel,
    _initial_guess,
    add_multiplicative_noise,
    closed_form_populations,
    dark_relaxation,
    equilibrium_populations,
    fit_biexponential,
    fit_single_exponential,
    response_vs_position,
    simulate_populations,
    simulate_sensitization,
    stability_limit,
)
from biphoton.scenario import ScenarioConfig

FIXTURE = Path(__file__).parent / 'fixtures' / 'decay_relaxation.csv'


@pytest.fixture(scope='module')
def model():
    return TrapModel()


@pytest.fixture(scope='module')
def relaxation(model):
    """Dark relaxation from saturation, sampled every 0.5 s"""
    saturated = equilibrium_populations(model, CALIBRATION_INTENSITY)
    trace = dark_relaxation(model, saturated, 400.0, 0.05)
    return Trace(trace.times[::10], trace.values[::10])


class TestPopulations:

    def test_equilibrium_at_calibration_intensity(self, model):
        np.testing.assert_allclose(equilibrium_populations(model, CALIBRATION_INTENSITY), [0.75, 0.5], rtol=1e-12)
        assert float(model.sensitivity([0.75, 0.5])) == pytest.approx(15.0)

    def test_rk4_matches_closed_form(self, model):
        run = simulate_populations(model, IntensitySchedule.constant(CALIBRATION_INTENSITY), 100.0, 0.05)
        expected = closed_form_populations(model, CALIBRATION_INTENSITY, (0.0, 0.0), run.times)
        np.testing.assert_allclose(run.populations[1:], expected[1:], rtol=1e-6)

    def test_self_sensitization_saturates(self, model):
        trace = simulate_sensitization(model, IntensitySchedule.constant(CALIBRATION_INTENSITY), 300.0, 0.05)
        at_100 = trace.values[np.searchsorted(trace.times, 100.0)]
        assert trace.values[0] == pytest.approx(1.0)
        assert at_100 > 10.0 * trace.values[0]
        assert at_100 == pytest.approx(14.78, abs=0.05)
        assert np.all(np.diff(trace.values) >= 0)
        assert trace.values[-1] == pytest.approx(15.0, rel=1e-3)

    def test_weaker_illumination_rises_less(self, model):
        schedule = IntensitySchedule.constant(CALIBRATION_INTENSITY)
        high = simulate_populations(model, schedule, 50.0, 0.1)
        low = simulate_populations(model, schedule.scaled(0.5), 50.0, 0.1)
        np.testing.assert_array_equal(high.times, low.times)
        assert np.all(high.sensitivity >= low.sensitivity - 1e-12)
        assert low.sensitivity[-1] < high.sensitivity[-1]

    def test_dark_start_stays_at_base_sensitivity(self):
        model = TrapModel(base_sensitivity=2.5)
        run = simulate_populations(model, IntensitySchedule.constant(0.0), 30.0, 0.5)
        assert np.all(run.populations == 0.0)
        assert np.all(run.sensitivity == 2.5)

    def test_exposure_then_dark(self, model):
        schedule = IntensitySchedule.exposure_then_dark(CALIBRATION_INTENSITY, 150.0)
        trace = simulate_sensitization(model, schedule, 550.0, 0.25)
        peak = int(np.argmax(trace.values))
        assert trace.times[peak] == pytest.approx(150.0)
        assert trace.times[-1] == 550.0
        assert trace.values[-1] < trace.values[peak]

    def test_stability_limit(self, model):
        assert stability_limit(model, CALIBRATION_INTENSITY) == pytest.approx(0.5)
        with pytest.raises(StabilityError):
            simulate_populations(model, IntensitySchedule.constant(CALIBRATION_INTENSITY), 10.0, 0.6)

    def test_dark_relaxation_is_biexponential(self, model, relaxation):
        t = relaxation.times
        expected = 1.0 + 12.0 * np.exp(-t / 100.0) + 2.0 * np.exp(-t / 5.0)
        np.testing.assert_allclose(relaxation.values, expected, rtol=1e-6)


class TestSchedule:

    def test_rejects_malformed_schedules(self):
        with pytest.raises(ValidationError):
            IntensitySchedule((1.0,), (1.0,))
        with pytest.raises(ValidationError):
            IntensitySchedule((0.0, 5.0, 5.0), (1.0, 0.0, 1.0))
        with pytest.raises(ValidationError):
            IntensitySchedule((0.0,), (-1.0,))
        with pytest.raises(ValidationError):
            IntensitySchedule((0.0, 1.0), (1.0,))

    def test_exposure_within_horizon(self):
        assert IntensitySchedule.exposure_within(2.0, 150.0, 550.0) == IntensitySchedule((0.0, 150.0), (2.0, 0.0))
        assert IntensitySchedule.exposure_within(2.0, 550.0, 550.0) == IntensitySchedule.constant(2.0)

    def test_segments_clip_to_horizon(self):
        schedule = IntensitySchedule.exposure_then_dark(2.0, 150.0)
        assert list(schedule.segments(100.0)) == [(0.0, 100.0, 2.0)]
        assert list(schedule.segments(200.0)) == [(0.0, 150.0, 2.0), (150.0, 200.0, 0.0)]

    def test_trap_model_validation(self):
        with pytest.raises(ValidationError):
            TrapModel(lifetime=(5.0, 100.0))


class TestDecayFit:

    def test_fixture_fit(self):
        # the fixture is the dark phase after a 150 s exposure of paper-fig8
        scenario = ScenarioConfig.load('paper-fig8')
        model = scenario.trap_model()
        exposed = closed_form_populations(model, scenario.illumination()['intensity'], (0.0, 0.0), [150.0])[0]
        fit = fit_biexponential(read_trace(str(FIXTURE)))
        assert fit.converged and fit.reliable
        assert fit.tau1 == pytest.approx(100.0, rel=1e-6)
        assert fit.tau2 == pytest.approx(5.0, rel=1e-6)
        assert fit.a1 == pytest.approx(16.0 * exposed[0], rel=1e-6)
        assert fit.a2 == pytest.approx(4.0 * exposed[1], rel=1e-5)
        assert fit.offset == pytest.approx(1.0, abs=1e-6)

    def test_fixture_matches_simulated_dark_phase(self):
        scenario = ScenarioConfig.load('paper-fig8')
        schedule = IntensitySchedule.exposure_then_dark(scenario.illumination()['intensity'], 150.0)
        trace = simulate_sensitization(scenario.trap_model(), schedule, 550.0, 0.05)
        fixture = read_trace(str(FIXTURE))
        dark = trace.times >= 150.0
        times, values = trace.times[dark][::40], trace.values[dark][::40]
        np.testing.assert_allclose(times - 150.0, fixture.times, atol=1e-9)
        np.testing.assert_allclose(values, fixture.values, rtol=1e-10)

    def test_noiseless_round_trip(self, model):
        fit = fit_biexponential(dark_relaxation(model, [1.0, 1.0], 400.0, 0.5))
        assert fit.converged
        assert fit.a1 == pytest.approx(16.0, rel=1e-4)
        assert fit.tau1 == pytest.approx(100.0, rel=1e-4)
        assert fit.a2 == pytest.approx(4.0, rel=1e-4)
        assert fit.tau2 == pytest.approx(5.0, rel=1e-4)
        assert fit.offset == pytest.approx(1.0, rel=1e-4)

    def test_slow_seed_from_log_linear_tail(self, relaxation):
        a1, tau1, _a2, _tau2, offset = _initial_guess(relaxation)
        assert tau1 == pytest.approx(100.0, rel=1e-6)
        assert a1 == pytest.approx(12.0, rel=1e-6)
        assert offset == pytest.approx(1.0, rel=1e-6)

    def test_noisy_fits_recover_time_constants(self, relaxation):
        tau1, tau2 = [], []
        for seed in range(100):
            noisy = add_multiplicative_noise(relaxation, 0.01, np.random.default_rng(seed))
            fit = fit_biexponential(noisy)
            tau1.append(fit.tau1)
            tau2.append(fit.tau2)
        assert np.median(tau1) == pytest.approx(100.0, rel=0.05)
        assert np.median(tau2) == pytest.approx(5.0, rel=0.05)

    def test_flat_trace_is_rank_deficient(self):
        trace = Trace(np.linspace(0.0, 10.0, 20), np.full(20, 3.0))
        with pytest.raises(RankDeficiencyError) as info:
            fit_biexponential(trace)
        assert info.value.fallback.offset == 3.0
        assert info.value.fallback.rank_deficient

    def test_too_few_points(self):
        with pytest.raises(ValidationError):
            fit_biexponential(Trace(np.arange(4.0), np.arange(4.0)))

    def test_single_exponential(self):
        t = np.linspace(0.0, 100.0, 101)
        fit = fit_single_exponential(Trace(t, 3.0 * np.exp(-t / 20.0) + 0.5))
        assert fit.converged
        assert fit.tau == pytest.approx(20.0, rel=1e-6)
        assert fit.amplitude == pytest.approx(3.0, rel=1e-6)
        assert fit.offset == pytest.approx(0.5, abs=1e-6)

    def test_trace_validation(self):
        with pytest.raises(ValidationError):
            Trace(np.array([0.0, 1.0, 1.0]), np.ones(3))
        with pytest.raises(ValidationError):
            Trace(np.arange(3.0), np.ones(3), sigmas=np.zeros(3))


class TestResponseScan:

    def test_area_doubles_at_rayleigh_length(self):
        spot = GaussianSpot.from_diameter(35e-6, 702e-9)
        assert spot.waist_area == pytest.approx(math.pi * (17.5e-6) ** 2)
        assert spot.area(spot.rayleigh_length) == pytest.approx(2.0 * spot.waist_area)

    def test_quadratic_response_peaks_at_focus(self):
        spot = GaussianSpot.from_diameter(35e-6, 702e-9)
        z = np.linspace(-5e-3, 5e-3, 11)
        rate = response_vs_position(z, spot, 1e-9, 5e10)
        assert int(np.argmax(rate)) == 5
        np.testing.assert_allclose(rate, rate[::-1], rtol=1e-12)
        assert response_vs_position(0.0, spot, 2e-9, 5e10) == pytest.approx(4.0 * rate[5])

    def test_rejects_nonpositive_power(self):
        with pytest.raises(ValidationError):
            response_vs_position(0.0, GaussianSpot(1e-9, 1e-3), 0.0, 1.0)


def test_calibration_script_matches_preset(capsys):
    import calibrate_traps

    calibrate_traps.calibrate()
    out = capsys.readouterr().out
    assert 'fill_coeff_1_m2_per_ws = 0.0206167' in out
    assert 'fill_coeff_2_m2_per_ws = 0.137445' in out
