import math
from datetime import datetime, timedelta, timezone

import mpmath
import numpy as np
import pytest

from leoshare.ephemeris import (GroundStation, KeplerConvergenceError, PropagationWindowError, SatelliteTrack,
                                TleChecksumError, TleFieldError, TleLengthError, bundled_constellation_text,
                                format_timestamp, format_tle, gmst_rad, parse_timestamp, parse_tle,
                                parse_tle_report, propagate, solve_kepler, time_grid, tle_checksum, topocentric,
                                track, track_all, tracks_from_csv, tracks_to_csv, visible_satellites)
from leoshare.geometry import EarthParams, slant_distance

ISS = """ISS (ZARYA)
1 25544U 98067A   08264.51782528 -.00002182  00000-0 -11606-4 0  2927
2 25544  51.6416 247.4627 0006703 130.5360 325.0288 15.72125391563537
"""
UTC = timezone.utc


def _iss():
    (rec,) = parse_tle(ISS)
    return rec


def test_iss_fields():
    rec = _iss()
    assert rec.name == "ISS (ZARYA)"
    assert rec.catalog_number == 25544
    assert rec.classification == "U"
    assert rec.intl_designator == "98067A"
    assert rec.epoch_year == 2008
    assert rec.epoch_day == 264.51782528
    assert rec.inclination_deg == 51.6416
    assert rec.raan_deg == 247.4627
    assert rec.eccentricity == 0.0006703
    assert rec.arg_perigee_deg == 130.536
    assert rec.mean_anomaly_deg == 325.0288
    assert rec.mean_motion_rev_per_day == 15.72125391
    assert rec.rev_number == 56353
    assert rec.element_set == 292
    assert rec.checksums == (7, 7)
    assert rec.epoch == datetime(2008, 9, 20, tzinfo=UTC) + timedelta(days=0.51782528)


def test_iss_derived_quantities():
    rec = _iss()
    # mpmath references: (mu / n^2)^(1/3) and 86400 / 15.5
    assert rec.semi_major_axis_m == pytest.approx(6730960.6769368387738, rel=1e-12)
    assert 86400.0 / 15.5 == pytest.approx(5574.1935483870967742, rel=1e-15)
    assert rec.period_s == pytest.approx(86400.0 / 15.72125391, rel=1e-15)


def test_checksum_rule():
    l1 = ISS.splitlines()[1]
    # digits summed, each '-' counts 1, everything else 0
    expect = sum(int(c) if c.isdigit() else (1 if c == "-" else 0) for c in l1[:68]) % 10
    assert tle_checksum(l1) == expect == 7


def test_checksum_error_has_line_number():
    bad = ISS.replace("0  2927", "0  2928")
    with pytest.raises(TleChecksumError) as info:
        parse_tle(bad)
    assert info.value.line_number == 2


def test_length_error():
    bad = ISS.replace("15.72125391563537", "15.7212539156353")
    with pytest.raises(TleLengthError) as info:
        parse_tle(bad)
    assert info.value.line_number == 3


def test_field_error():
    l2 = "2 25544  51.6416 247.4627 0006703 130.5360 325.0288 15.7212539156353"
    l2 = l2.replace("51.6416", "5x.6416")
    l2 += str(tle_checksum(l2 + "0"))
    text = "\n".join(ISS.splitlines()[:2] + [l2]) + "\n"
    with pytest.raises(TleFieldError) as info:
        parse_tle(text)
    assert info.value.line_number == 3


def test_report_collects_errors_and_keeps_valid():
    bad = ISS.replace("0  2927", "0  2928").replace("ISS (ZARYA)", "BROKEN")
    recs, errs = parse_tle_report(ISS + bad)
    assert [r.name for r in recs] == ["ISS (ZARYA)"]
    assert len(errs) == 1 and errs[0].line_number == 5


def test_empty_input():
    assert parse_tle("") == []
    assert parse_tle("\n\n") == []


def test_orphan_lines():
    with pytest.raises(TleFieldError):
        parse_tle(ISS.splitlines()[1] + "\n")


def test_round_trip_iss():
    assert format_tle(_iss()) == ISS
    assert parse_tle(format_tle(_iss()))[0] == _iss()


def test_round_trip_bundled():
    text = bundled_constellation_text()
    recs = parse_tle(text)
    assert len(recs) == 60
    again = "".join(format_tle(r) for r in recs)
    assert again == text


def test_kepler_against_mpmath():
    for m, e in [(1.0, 0.3), (0.1, 0.9), (3.0, 0.0006703), (5.5, 0.7)]:
        ref = mpmath.findroot(lambda x: x - e * mpmath.sin(x) - m, m)
        assert solve_kepler(m, e) == pytest.approx(float(ref), abs=1e-12)


def test_kepler_reports_failure():
    with pytest.raises(KeplerConvergenceError):
        solve_kepler(1.0, 0.5, max_iter=1)


def test_propagation_window():
    rec = _iss()
    propagate(rec, rec.epoch + timedelta(days=6.9))
    with pytest.raises(PropagationWindowError):
        propagate(rec, rec.epoch + timedelta(days=7, seconds=1))
    with pytest.raises(PropagationWindowError):
        propagate(rec, rec.epoch - timedelta(days=8))


def test_half_period_is_antipodal_for_circular_orbit():
    rec = parse_tle(bundled_constellation_text())[0]
    p0 = propagate(rec, rec.epoch)
    p1 = propagate(rec, rec.epoch + timedelta(seconds=rec.period_s / 2))
    assert np.linalg.norm(p0 + p1) <= 1e-6 * np.linalg.norm(p0)


def test_radius_bounds_and_period():
    rec = _iss()
    a, e = rec.semi_major_axis_m, rec.eccentricity
    for k in range(50):
        r = np.linalg.norm(propagate(rec, rec.epoch + timedelta(seconds=137.0 * k)))
        assert a * (1 - e) - 1e-3 <= r <= a * (1 + e) + 1e-3
    p0 = propagate(rec, rec.epoch)
    p1 = propagate(rec, rec.epoch + timedelta(seconds=rec.period_s))
    # timedelta rounds the period to 1 us, about 4 mm along track
    assert np.linalg.norm(p0 - p1) <= 1e-2


def test_gmst_at_j2000():
    t = datetime(2000, 1, 1, 12, 0, 0, tzinfo=UTC)
    assert math.degrees(gmst_rad(t)) == pytest.approx(280.46061837, abs=1e-6)


def _eci_from_ecef(x, t):
    g = gmst_rad(t)
    c, s = math.cos(g), math.sin(g)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]) @ x


def test_zenith_construction():
    st = GroundStation()
    t = datetime(2024, 3, 1, 0, 0, tzinfo=UTC)
    up = st.ecef() / np.linalg.norm(st.ecef())
    el, _, d = topocentric(_eci_from_ecef(st.ecef() + 550e3 * up, t), st, t)
    assert el == pytest.approx(90.0, abs=1e-6)
    assert d == pytest.approx(550e3, rel=1e-12)


@pytest.mark.parametrize("vec,az", [((1, 0, 0), 0.0), ((0, 1, 0), 90.0), ((-1, 0, 0), 180.0), ((0, -1, 0), -90.0)])
def test_horizon_azimuths(vec, az):
    st = GroundStation(latitude_deg=10.0, longitude_deg=20.0)
    t = datetime(2024, 3, 1, 6, 0, tzinfo=UTC)
    # ENU rows are orthonormal: R^T maps a local offset back to ECEF
    off = st.enu_rotation().T @ (1e5 * np.array(vec, dtype=float))
    el, a, d = topocentric(_eci_from_ecef(st.ecef() + off, t), st, t)
    assert el == pytest.approx(0.0, abs=1e-9)
    assert abs((a - az + 180.0) % 360.0 - 180.0) < 1e-9
    assert d == pytest.approx(1e5)


@pytest.fixture(scope="module")
def bundled_tracks():
    recs = parse_tle(bundled_constellation_text())
    times = time_grid(datetime(2024, 3, 1, tzinfo=UTC), 60)
    return track_all(recs, GroundStation(), times)


def test_distance_matches_slant_formula(bundled_tracks):
    earth = EarthParams(sat_altitude_m=550e3)
    n = 0
    for tr in bundled_tracks:
        ok = tr.elevation_deg >= 25.0
        if ok.any():
            ref = slant_distance(tr.elevation_deg[ok], earth)
            assert np.all(np.abs(tr.distance_m[ok] / ref - 1) <= 0.02)
            n += ok.sum()
    assert n > 100


def test_bundled_fixture_visibility(bundled_tracks):
    counts = [len(visible_satellites(bundled_tracks, t)) for t in bundled_tracks[0].times]
    assert min(counts) >= 1
    assert max(counts) <= 10


def test_visibility_threshold_is_closed():
    t0 = datetime(2024, 3, 1, tzinfo=UTC)
    tracks = [SatelliteTrack("a", (t0,), np.array([25.0]), np.array([0.0]), np.array([1e6])),
              SatelliteTrack("b", (t0,), np.array([24.9]), np.array([0.0]), np.array([1e6])),
              SatelliteTrack("c", (t0,), np.array([60.0]), np.array([10.0]), np.array([7e5]))]
    vis = visible_satellites(tracks, t0)
    assert [sid for sid, _ in vis] == ["c", "a"]
    assert visible_satellites(tracks, t0 + timedelta(minutes=1)) == []


def test_track_rejects_unsorted_times():
    t0 = datetime(2024, 3, 1, tzinfo=UTC)
    with pytest.raises(ValueError):
        SatelliteTrack("x", (t0, t0), np.zeros(2), np.zeros(2), np.ones(2))


def test_csv_round_trip(bundled_tracks):
    text = tracks_to_csv(bundled_tracks[:3])
    back = tracks_from_csv(text)
    assert [b.sat_id for b in back] == [t.sat_id for t in bundled_tracks[:3]]
    for a, b in zip(bundled_tracks[:3], back):
        assert a.times == b.times
        assert np.array_equal(a.elevation_deg, b.elevation_deg)
        assert np.array_equal(a.azimuth_deg, b.azimuth_deg)
        assert np.array_equal(a.distance_m, b.distance_m)
    assert tracks_to_csv(back) == text


def test_timestamps():
    t = parse_timestamp("2024-03-01T00:05:00Z")
    assert t == datetime(2024, 3, 1, 0, 5, tzinfo=UTC)
    assert format_timestamp(t) == "2024-03-01T00:05:00Z"
    with pytest.raises(ValueError):
        parse_timestamp("2024-03-01 00:05")


def test_track_single_record_ids():
    rec = _iss()
    tr = track(rec, GroundStation(), time_grid(rec.epoch, 10))
    assert tr.sat_id == "ISS (ZARYA)"
    assert len(tr.times) == 10
    assert np.all(np.abs(tr.elevation_deg) <= 90.0)
