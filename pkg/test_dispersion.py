#!/usr/bin/env python3
"""
Test script for the Sellmeier refractive-index model
"""

import math

import numpy as np
import pytest

from biphoton.dispersion import (
    BBO_EXTRAORDINARY,
    BBO_ORDINARY,
    CrystalSpec,
    SellmeierSet,
    extraordinary_index_slope,
    index_extraordinary_at_angle,
    index_ordinary,
    read_crystal_presets,
)
from biphoton.errors import ValidationError, WavelengthRangeError


def polynomial_index(wavelength_um, b0, b1, b2, b3):
    return math.sqrt(b0 + b1 / (wavelength_um ** 2 - b2) - b3 * wavelength_um ** 2)


def test_ordinary_index_at_702nm():
    assert index_ordinary(702e-9, BBO_ORDINARY) == pytest.approx(1.6648, abs=1e-4)


def test_ordinary_index_at_pump_matches_direct_evaluation():
    expected = polynomial_index(0.3511, 2.7405, 0.0184, 0.0179, 0.0155)
    assert index_ordinary(351.1e-9, BBO_ORDINARY) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(1.70681, abs=1e-4)


def test_out_of_range_wavelength_names_interval():
    with pytest.raises(WavelengthRangeError, match="300 nm, 800 nm"):
        index_ordinary(250e-9, BBO_ORDINARY)
    with pytest.raises(ValidationError):
        index_ordinary(801e-9, BBO_ORDINARY)


def test_extraordinary_index_limits(crystal):
    for wavelength in (351.1e-9, 702e-9):
        assert index_extraordinary_at_angle(wavelength, 0.0, crystal) == index_ordinary(wavelength, BBO_ORDINARY)
        assert index_extraordinary_at_angle(wavelength, math.pi / 2, crystal) == pytest.approx(
            index_ordinary(wavelength, BBO_EXTRAORDINARY), rel=1e-14)


def test_extraordinary_index_decreases_with_angle(crystal):
    thetas = np.linspace(0.0, math.pi / 2, 91)
    values = np.array([index_extraordinary_at_angle(351.1e-9, t, crystal) for t in thetas])
    assert np.all(np.diff(values) < 0)
    assert values[0] > values[-1]


def test_extraordinary_slope_matches_finite_difference(crystal):
    theta, h = 0.6, 1e-6
    numeric = (index_extraordinary_at_angle(351.1e-9, theta + h, crystal)
               - index_extraordinary_at_angle(351.1e-9, theta - h, crystal)) / (2 * h)
    assert extraordinary_index_slope(351.1e-9, theta, crystal) == pytest.approx(numeric, rel=1e-6)


def test_ordinary_index_is_smooth_over_operating_range():
    wavelengths = np.linspace(300e-9, 800e-9, 501)
    values = np.array([index_ordinary(w, BBO_ORDINARY) for w in wavelengths])
    slopes = np.diff(values) / np.diff(wavelengths * 1e6)
    assert np.all(np.isfinite(slopes))
    assert np.max(np.abs(slopes)) < 2.0


def test_index_is_pure():
    assert index_ordinary(500e-9, BBO_ORDINARY) == index_ordinary(500e-9, BBO_ORDINARY)


def test_sellmeier_pole_must_lie_below_range():
    with pytest.raises(ValidationError):
        SellmeierSet(2.7405, 0.0184, 0.1, 0.0155)


def test_sellmeier_rejects_sub_unity_index():
    with pytest.raises(ValidationError):
        SellmeierSet(0.5, 0.0184, 0.0179, 0.0155)


@pytest.mark.parametrize('length, alpha', [(0.0, 0.5), (5e-3, 0.0), (5e-3, math.pi / 2)])
def test_crystal_spec_validation(length, alpha):
    with pytest.raises(ValidationError):
        CrystalSpec(length, alpha)


def test_crystal_helpers_return_modified_copies(crystal):
    rotated = crystal.with_cut_angle(0.5)
    shorter = crystal.with_length(1e-3)
    assert rotated.cut_angle_alpha == 0.5 and rotated.length_l == crystal.length_l
    assert shorter.length_l == 1e-3 and shorter.cut_angle_alpha == crystal.cut_angle_alpha


def test_packaged_crystal_presets():
    presets = read_crystal_presets()
    bbo = presets['bbo']
    assert bbo['name'] == 'BBO'
    assert float(bbo['length_mm']) == 5.0
    assert bbo['cut_angle_deg'] == 'degenerate'
    assert float(bbo['ordinary_b0']) == BBO_ORDINARY.b0
    assert float(bbo['extraordinary_b3_per_um2']) == BBO_EXTRAORDINARY.b3
