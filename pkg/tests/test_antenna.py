import math

import numpy as np
import pytest

from leoshare.antenna import (ElementPattern, UraGeometry, beamforming_gain, element_gain_db,
                              element_gain_grid_db, steering_matrix, steering_vector)
from leoshare.geometry import BsOrientation, Frame, SteeringDirection, global_to_local_angles


def test_element_gain_peak_and_floor():
    assert element_gain_db(SteeringDirection(0.0, 0.0, Frame.LOCAL)) == pytest.approx(8.0)
    # beyond both 3 dB widths the sum saturates at A_m
    assert element_gain_grid_db(80.0, 170.0) == pytest.approx(8.0 - 30.0)


def test_element_gain_half_power_points():
    # 12 (x / 65)^2 = 3 dB at x = 32.5 degrees
    assert element_gain_grid_db(32.5, 0.0) == pytest.approx(5.0)
    assert element_gain_grid_db(0.0, -32.5) == pytest.approx(5.0)


def test_element_gain_against_direct_formula():
    rng = np.random.default_rng(1)
    el = rng.uniform(-90, 90, 50)
    az = rng.uniform(-180, 180, 50)
    for e, a in zip(el, az):
        theta = 90.0 - e                      # 3GPP zenith angle
        a_v = -min(12.0 * ((theta - 90.0) / 65.0) ** 2, 30.0)
        a_h = -min(12.0 * (a / 65.0) ** 2, 30.0)
        expect = 8.0 - min(-(a_v + a_h), 30.0)
        assert element_gain_grid_db(e, a) == pytest.approx(expect, abs=1e-12)


def test_element_gain_requires_local_frame():
    with pytest.raises(ValueError):
        element_gain_db(SteeringDirection(0.0, 0.0, Frame.GLOBAL))


def test_pattern_validation():
    with pytest.raises(ValueError):
        ElementPattern(theta_3db_deg=0.0)


def test_element_gain_positive_below_forty_degrees():
    # 12 degree downtilt: sidelobe gain toward satellites along boresight stays positive only at low elevation
    o = BsOrientation(12.0, 0.0)
    el = np.arange(0.0, 91.0, 1.0)
    lel, laz = global_to_local_angles(el, np.zeros_like(el), o)
    g = element_gain_grid_db(lel, laz)
    assert np.all(g[el <= 40] > 0)
    assert np.all(g[el >= 42] < 0)


def test_steering_vector_brute_force():
    geom = UraGeometry(3, 4, 0.5)
    el, az = 23.0, -51.0
    u = math.cos(math.radians(el)) * math.sin(math.radians(az))
    v = math.sin(math.radians(el))
    expect = [complex(math.cos(math.pi * (m * v + n * u)), math.sin(math.pi * (m * v + n * u)))
              for m in range(3) for n in range(4)]
    got = steering_vector(SteeringDirection(el, az, Frame.LOCAL), geom)
    assert np.allclose(got, expect, atol=1e-14)


def test_steering_norm_and_shape():
    geom = UraGeometry(8, 8)
    e = steering_matrix(np.array([0.0, 30.0, -60.0]), np.array([0.0, 45.0, 10.0]), geom)
    assert e.shape == (3, 64)
    assert np.allclose(np.linalg.norm(e, axis=1) ** 2, 64.0)


def test_matched_filter_gain():
    geom = UraGeometry(8, 8)
    e = steering_vector(SteeringDirection(-20.0, 35.0, Frame.LOCAL), geom)
    g = beamforming_gain(e, e / np.linalg.norm(e))
    assert 10 * math.log10(g) == pytest.approx(18.061799739838871713, abs=1e-9)


def test_gain_dimension_mismatch():
    with pytest.raises(ValueError):
        beamforming_gain(np.ones(4), np.ones(5))


def test_geometry_validation():
    with pytest.raises(ValueError):
        UraGeometry(0, 4)
    with pytest.raises(ValueError):
        UraGeometry(2, 2, 0.0)
