import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leoshare.geometry import (BeamSpacePartition, BsOrientation, EarthParams, Frame, PartitionKind,
                               SteeringDirection, angular_separation_deg, global_to_local,
                               global_to_local_angles, in_partition, local_to_global, motion_angle_bound,
                               slant_distance, wrap_azimuth)

# mpmath, 40 digits, law-of-cosines form with R = 6371 km, h = 600 km
SLANT_REF = {0: 2829346.2142339526703, 10: 1931635.3589090176861, 25: 1213233.4721732088791,
             45: 814799.05514173618906, 90: 600000.0}


@pytest.mark.parametrize("el", sorted(SLANT_REF))
def test_slant_distance_matches_high_precision(el):
    assert slant_distance(el) == pytest.approx(SLANT_REF[el], rel=1e-12)


def test_slant_distance_zenith_is_altitude():
    assert slant_distance(90.0, EarthParams(sat_altitude_m=550e3)) == pytest.approx(550e3, rel=1e-12)


def test_slant_distance_decreases_with_elevation():
    d = slant_distance(np.linspace(0, 90, 181))
    assert np.all(np.diff(d) < 0)


@pytest.mark.parametrize("bad", [-0.1, 90.5, float("nan")])
def test_slant_distance_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        slant_distance(bad)


def test_earth_params_validation():
    with pytest.raises(ValueError):
        EarthParams(sat_altitude_m=0)


def test_wrap_azimuth():
    assert wrap_azimuth(180.0) == -180.0
    assert wrap_azimuth(-190.0) == 170.0
    assert np.allclose(wrap_azimuth(np.array([360.0, 540.0])), [0.0, -180.0])


def test_direction_validation():
    with pytest.raises(ValueError):
        SteeringDirection(91.0, 0.0)
    with pytest.raises(ValueError):
        SteeringDirection(0.0, 200.0)


def test_boresight_maps_to_local_origin():
    o = BsOrientation(downtilt_deg=12.0, sector_bearing_deg=120.0)
    loc = global_to_local(SteeringDirection(-12.0, 120.0), o)
    assert loc.elevation_deg == pytest.approx(0.0, abs=1e-12)
    assert loc.azimuth_deg == pytest.approx(0.0, abs=1e-12)
    assert loc.frame is Frame.LOCAL


@pytest.mark.parametrize("el", [-40.0, 0.0, 25.0, 70.0])
def test_local_elevation_adds_downtilt_in_vertical_plane(el):
    o = BsOrientation(downtilt_deg=12.0, sector_bearing_deg=240.0)
    lel, laz = global_to_local_angles(el, -120.0, o)
    assert lel == pytest.approx(el + 12.0, abs=1e-9)
    assert laz == pytest.approx(0.0, abs=1e-9)


def test_frame_checks():
    o = BsOrientation()
    with pytest.raises(ValueError):
        global_to_local(SteeringDirection(10, 10, Frame.LOCAL), o)
    with pytest.raises(ValueError):
        local_to_global(SteeringDirection(10, 10, Frame.GLOBAL), o)


@settings(max_examples=200, deadline=None)
@given(el=st.floats(-89.0, 89.0), az=st.floats(-179.0, 179.0),
       tilt=st.floats(0.0, 30.0), bearing=st.floats(-180.0, 180.0))
def test_global_local_round_trip(el, az, tilt, bearing):
    o = BsOrientation(tilt, bearing)
    back = local_to_global(global_to_local(SteeringDirection(el, az), o), o)
    assert angular_separation_deg(back, SteeringDirection(el, az)) < 1e-9


def test_rotation_preserves_angles():
    o = BsOrientation(12.0, 35.0)
    a, b = SteeringDirection(30, 10), SteeringDirection(50, -70)
    assert angular_separation_deg(global_to_local(a, o), global_to_local(b, o)) == pytest.approx(
        angular_separation_deg(a, b), abs=1e-9)


def test_angular_separation_simple():
    assert angular_separation_deg(SteeringDirection(0, 0), SteeringDirection(0, 90)) == pytest.approx(90.0)
    assert angular_separation_deg(SteeringDirection(90, 0), SteeringDirection(90, 77)) == pytest.approx(0.0, abs=1e-9)


def test_motion_bound_value():
    # atan(7560 * 1e-3 / 600e3) in degrees, mpmath
    assert motion_angle_bound(7560.0, 1e-3, 600e3) == pytest.approx(0.00072192682182663287564, rel=1e-12)


def test_motion_bound_validation():
    with pytest.raises(ValueError):
        motion_angle_bound(-1.0, 1.0, 600e3)


def test_partitions():
    up = BeamSpacePartition(PartitionKind.UP, downtilt_deg=12.0)
    down = BeamSpacePartition(PartitionKind.DOWN, downtilt_deg=12.0)
    assert up.elevation_bounds == (12.0, 102.0)
    assert down.elevation_bounds == (-78.0, 12.0)
    assert in_partition(SteeringDirection(30.0, 50.0, Frame.LOCAL), up)
    assert not in_partition(SteeringDirection(30.0, 61.0, Frame.LOCAL), up)
    assert in_partition(SteeringDirection(-30.0, 0.0, Frame.LOCAL), down)
    with pytest.raises(ValueError):
        in_partition(SteeringDirection(30.0, 0.0, Frame.GLOBAL), up)
