"""TLE ingestion, two-body propagation and ground-station visibility.

Propagation is Keplerian from the TLE mean elements (no drag, no J2).
Sidereal time uses the IAU 1982 GMST polynomial.  The Earth is the same
sphere used by :mod:`leoshare.geometry`, and topocentric azimuth follows
the package convention: counterclockwise from East.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterable, Sequence

import numpy as np

from .geometry import EARTH_RADIUS_M, Frame, SteeringDirection, wrap_azimuth

MU_EARTH = 3.986004418e14          # m^3/s^2
SECONDS_PER_DAY = 86400.0
PROPAGATION_WINDOW = timedelta(days=7)
KEPLER_TOL = 1e-12
TLE_LINE_LENGTH = 69
TRACK_CSV_HEADER = ("sat_id", "timestamp_utc", "elevation_deg", "azimuth_deg", "distance_m")


class TleError(ValueError):
    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        where = f"line {line_number}: " if line_number is not None else ""
        super().__init__(where + message)


class TleLengthError(TleError):
    pass


class TleChecksumError(TleError):
    pass


class TleFieldError(TleError):
    pass


class KeplerConvergenceError(RuntimeError):
    pass


class PropagationWindowError(ValueError):
    pass


def tle_checksum(line: str) -> int:
    """Mod-10 sum of digits with '-' counting as one, over the first 68 columns."""
    total = 0
    for ch in line[:68]:
        if ch.isdigit():
            total += int(ch)
        elif ch == "-":
            total += 1
    return total % 10


def _utc(t: datetime) -> datetime:
    return t.replace(tzinfo=timezone.utc) if t.tzinfo is None else t.astimezone(timezone.utc)


@dataclass(frozen=True)
class TleRecord:
    name: str
    catalog_number: int
    classification: str
    intl_designator: str
    epoch_year: int                 # four-digit year
    epoch_day: float                # day of year with fraction, 1.0 = Jan 1 00:00
    mean_motion_dot: str            # raw TLE fields kept verbatim for exact formatting
    mean_motion_ddot: str
    bstar: str
    ephemeris_type: str
    element_set: int
    inclination_deg: float
    raan_deg: float
    eccentricity: float
    arg_perigee_deg: float
    mean_anomaly_deg: float
    mean_motion_rev_per_day: float
    rev_number: int
    checksums: tuple[int, int] = field(default=(0, 0), compare=False)

    def __post_init__(self):
        if not 0.0 <= self.eccentricity < 1.0:
            raise TleFieldError(f"eccentricity {self.eccentricity} outside [0, 1)")
        if self.mean_motion_rev_per_day <= 0:
            raise TleFieldError("mean motion must be positive")

    @property
    def epoch(self) -> datetime:
        start = datetime(self.epoch_year, 1, 1, tzinfo=timezone.utc)
        return start + timedelta(days=self.epoch_day - 1.0)

    @property
    def mean_motion_rad_s(self) -> float:
        return self.mean_motion_rev_per_day * 2.0 * math.pi / SECONDS_PER_DAY

    @property
    def period_s(self) -> float:
        return SECONDS_PER_DAY / self.mean_motion_rev_per_day

    @property
    def semi_major_axis_m(self) -> float:
        return (MU_EARTH / self.mean_motion_rad_s ** 2) ** (1.0 / 3.0)


def _field(line: str, lo: int, hi: int, conv, lineno: int, what: str):
    text = line[lo - 1:hi]
    try:
        return conv(text)
    except ValueError:
        raise TleFieldError(f"cannot parse {what} from {text!r}", lineno) from None


def _implied_decimal(text: str) -> float:
    # " 12345-3" -> 0.12345e-3
    s = text.strip()
    if not s:
        return 0.0
    sign = -1.0 if s[0] == "-" else 1.0
    s = s.lstrip("+-")
    mant, exp = s[:-2], s[-2:]
    return sign * float("0." + mant.strip()) * 10.0 ** int(exp)


def _check_line(line: str, expected: str, lineno: int):
    if len(line) != TLE_LINE_LENGTH:
        raise TleLengthError(f"expected {TLE_LINE_LENGTH} characters, got {len(line)}", lineno)
    if line[0] != expected:
        raise TleFieldError(f"expected line number {expected}", lineno)
    if not line[68].isdigit():
        raise TleFieldError("checksum column is not a digit", lineno)
    if tle_checksum(line) != int(line[68]):
        raise TleChecksumError(f"checksum {line[68]} does not match computed {tle_checksum(line)}", lineno)


def _parse_pair(name: str, l1: str, l2: str, n1: int, n2: int) -> TleRecord:
    _check_line(l1, "1", n1)
    _check_line(l2, "2", n2)
    cat1 = _field(l1, 3, 7, int, n1, "catalog number")
    cat2 = _field(l2, 3, 7, int, n2, "catalog number")
    if cat1 != cat2:
        raise TleFieldError(f"catalog numbers differ ({cat1} vs {cat2})", n2)
    yy = _field(l1, 19, 20, int, n1, "epoch year")
    _field(l1, 34, 43, float, n1, "mean motion derivative")
    _field(l1, 45, 52, _implied_decimal, n1, "mean motion second derivative")
    _field(l1, 54, 61, _implied_decimal, n1, "bstar")
    try:
        return TleRecord(
            name=name,
            catalog_number=cat1,
            classification=l1[7],
            intl_designator=l1[9:17].rstrip(),
            epoch_year=2000 + yy if yy < 57 else 1900 + yy,
            epoch_day=_field(l1, 21, 32, float, n1, "epoch day"),
            mean_motion_dot=l1[33:43],
            mean_motion_ddot=l1[44:52],
            bstar=l1[53:61],
            ephemeris_type=l1[62],
            element_set=_field(l1, 65, 68, int, n1, "element set number"),
            inclination_deg=_field(l2, 9, 16, float, n2, "inclination"),
            raan_deg=_field(l2, 18, 25, float, n2, "RAAN"),
            eccentricity=_field(l2, 27, 33, lambda s: float("0." + s.strip()), n2, "eccentricity"),
            arg_perigee_deg=_field(l2, 35, 42, float, n2, "argument of perigee"),
            mean_anomaly_deg=_field(l2, 44, 51, float, n2, "mean anomaly"),
            mean_motion_rev_per_day=_field(l2, 53, 63, float, n2, "mean motion"),
            rev_number=_field(l2, 64, 68, lambda s: int(s) if s.strip() else 0, n2, "revolution number"),
            checksums=(int(l1[68]), int(l2[68])),
        )
    except TleFieldError as exc:
        if exc.line_number is None:
            raise TleFieldError(str(exc), n2) from None
        raise


def _groups(text: str):
    """Yield (name, line1, line2, number of line 1, number of line 2) or a TleError."""
    lines = [(i + 1, ln.rstrip("\r\n").rstrip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln.strip()]
    name = ""
    j = 0
    while j < len(lines):
        num, ln = lines[j]
        if ln.startswith("1 "):
            if j + 1 >= len(lines) or not lines[j + 1][1].startswith("2 "):
                yield TleFieldError("line 1 is not followed by a line 2", num)
                j += 1
            else:
                yield name, ln, lines[j + 1][1], num, lines[j + 1][0]
                j += 2
            name = ""
        elif ln.startswith("2 "):
            yield TleFieldError("line 2 without a preceding line 1", num)
            j += 1
        else:
            name = ln[2:].strip() if ln.startswith("0 ") else ln.strip()
            j += 1


def parse_tle_report(text: str) -> tuple[list[TleRecord], list[TleError]]:
    """Parse every group; return valid records and the errors of invalid ones."""
    records, errors = [], []
    for item in _groups(text):
        if isinstance(item, TleError):
            errors.append(item)
            continue
        name, l1, l2, n1, n2 = item
        try:
            records.append(_parse_pair(name, l1, l2, n1, n2))
        except TleError as exc:
            errors.append(exc)
    return records, errors


def parse_tle(text: str) -> list[TleRecord]:
    """Parse 2- or 3-line TLE groups; raises the first validation error."""
    records, errors = parse_tle_report(text)
    if errors:
        raise errors[0]
    return records


def _with_checksum(body: str) -> str:
    return body + str(tle_checksum(body))


def format_tle(rec: TleRecord, include_name: bool = True) -> str:
    ecc = f"{rec.eccentricity:.7f}"[2:]
    l1 = (f"1 {rec.catalog_number:05d}{rec.classification} {rec.intl_designator:<8s} "
          f"{rec.epoch_year % 100:02d}{rec.epoch_day:012.8f} {rec.mean_motion_dot:>10s} "
          f"{rec.mean_motion_ddot:>8s} {rec.bstar:>8s} {rec.ephemeris_type} {rec.element_set:4d}")
    l2 = (f"2 {rec.catalog_number:05d} {rec.inclination_deg:8.4f} {rec.raan_deg:8.4f} {ecc} "
          f"{rec.arg_perigee_deg:8.4f} {rec.mean_anomaly_deg:8.4f} {rec.mean_motion_rev_per_day:11.8f}"
          f"{rec.rev_number:5d}")
    out = [_with_checksum(l1), _with_checksum(l2)]
    if include_name and rec.name:
        out.insert(0, rec.name)
    return "\n".join(out) + "\n"


# -- propagation ----------------------------------------------------------------

def solve_kepler(mean_anomaly: float, e: float, tol: float = KEPLER_TOL, max_iter: int = 100) -> float:
    """Eccentric anomaly E with E - e sin E = M (Newton's method)."""
    m = math.fmod(mean_anomaly, 2.0 * math.pi)
    big_e = m if e < 0.8 else math.pi
    for _ in range(max_iter):
        f = big_e - e * math.sin(big_e) - m
        step = f / (1.0 - e * math.cos(big_e))
        big_e -= step
        if abs(step) <= tol:
            return big_e
    raise KeplerConvergenceError(f"Kepler solve did not converge (e={e})")


def _rot3(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot1(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def propagate(rec: TleRecord, t: datetime) -> np.ndarray:
    """ECI position (m) at ``t`` by two-body propagation of the mean elements."""
    dt = _utc(t) - rec.epoch
    if abs(dt) > PROPAGATION_WINDOW:
        raise PropagationWindowError(f"{t} is more than {PROPAGATION_WINDOW.days} days from epoch")
    n = rec.mean_motion_rad_s
    a = rec.semi_major_axis_m
    e = rec.eccentricity
    m = math.radians(rec.mean_anomaly_deg) + n * dt.total_seconds()
    big_e = solve_kepler(m, e)
    perifocal = np.array([a * (math.cos(big_e) - e),
                          a * math.sqrt(1.0 - e * e) * math.sin(big_e),
                          0.0])
    rot = (_rot3(math.radians(rec.raan_deg)) @ _rot1(math.radians(rec.inclination_deg))
           @ _rot3(math.radians(rec.arg_perigee_deg)))
    return rot @ perifocal


def julian_date(t: datetime) -> float:
    return _utc(t).timestamp() / SECONDS_PER_DAY + 2440587.5


def gmst_rad(t: datetime) -> float:
    """Greenwich mean sidereal time (IAU 1982), radians in [0, 2 pi)."""
    tu = (julian_date(t) - 2451545.0) / 36525.0
    seconds = (67310.54841 + (876600.0 * 3600.0 + 8640184.812866) * tu
               + 0.093104 * tu ** 2 - 6.2e-6 * tu ** 3)
    return math.radians(math.fmod(seconds / 240.0, 360.0)) % (2.0 * math.pi)


@dataclass(frozen=True)
class GroundStation:
    latitude_deg: float = 40.0 + 4.0 / 60.0 + 1.12 / 3600.0
    longitude_deg: float = -(105.0 + 5.0 / 60.0 + 15.33 / 3600.0)
    altitude_m: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise ValueError("latitude outside [-90, 90]")
        if not -180.0 <= self.longitude_deg <= 180.0:
            raise ValueError("longitude outside [-180, 180]")

    def ecef(self) -> np.ndarray:
        lat, lon = math.radians(self.latitude_deg), math.radians(self.longitude_deg)
        r = EARTH_RADIUS_M + self.altitude_m
        return r * np.array([math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)])

    def enu_rotation(self) -> np.ndarray:
        lat, lon = math.radians(self.latitude_deg), math.radians(self.longitude_deg)
        sl, cl, so, co = math.sin(lat), math.cos(lat), math.sin(lon), math.cos(lon)
        return np.array([[-so, co, 0.0],
                         [-sl * co, -sl * so, cl],
                         [cl * co, cl * so, sl]])


def eci_to_ecef(pos_eci, t: datetime) -> np.ndarray:
    return _rot3(-gmst_rad(t)) @ np.asarray(pos_eci, dtype=float)


def topocentric(pos_eci, station: GroundStation, t: datetime) -> tuple[float, float, float]:
    """(elevation deg, azimuth deg counterclockwise from East, distance m)."""
    rel = eci_to_ecef(pos_eci, t) - station.ecef()
    e, n, u = station.enu_rotation() @ rel
    el = math.degrees(math.atan2(u, math.hypot(e, n)))
    az = wrap_azimuth(math.degrees(math.atan2(n, e)))
    return el, az, float(np.linalg.norm(rel))


# -- tracks ----------------------------------------------------------------------

@dataclass(frozen=True)
class SatelliteTrack:
    sat_id: str
    times: tuple[datetime, ...]
    elevation_deg: np.ndarray
    azimuth_deg: np.ndarray
    distance_m: np.ndarray
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for a, b in zip(self.times, self.times[1:]):
            if not b > a:
                raise ValueError("track timestamps must be strictly increasing")
        if np.any(np.abs(self.elevation_deg) > 90.0):
            raise ValueError("elevation outside [-90, 90]")
        self._index.update({_utc(t): i for i, t in enumerate(self.times)})

    def sample_at(self, t: datetime):
        i = self._index.get(_utc(t))
        if i is None:
            return None
        return float(self.elevation_deg[i]), float(self.azimuth_deg[i]), float(self.distance_m[i])


def time_grid(start: datetime, n_steps: int, step_s: float = 60.0) -> list[datetime]:
    start = _utc(start)
    return [start + timedelta(seconds=step_s * k) for k in range(n_steps)]


def track(rec: TleRecord, station: GroundStation, times: Sequence[datetime], sat_id: str | None = None) -> SatelliteTrack:
    rows = [topocentric(propagate(rec, t), station, t) for t in times]
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    sid = sat_id if sat_id is not None else (rec.name or str(rec.catalog_number))
    return SatelliteTrack(sid, tuple(_utc(t) for t in times), arr[:, 0], arr[:, 1], arr[:, 2])


def track_all(records: Iterable[TleRecord], station: GroundStation, times: Sequence[datetime]) -> list[SatelliteTrack]:
    return [track(r, station, times) for r in records]


def visible_satellites(tracks: Iterable[SatelliteTrack], t: datetime,
                       min_elevation_deg: float = 25.0) -> list[tuple[str, SteeringDirection]]:
    """Satellites at or above ``min_elevation_deg`` at ``t``, highest first (ties by id)."""
    if not 0.0 <= min_elevation_deg <= 90.0:
        raise ValueError("minimum elevation outside [0, 90]")
    out = []
    for tr in tracks:
        s = tr.sample_at(t)
        if s is None:
            continue
        el, az, _ = s
        if el >= min_elevation_deg:
            out.append((tr.sat_id, SteeringDirection(el, az, Frame.GLOBAL)))
    out.sort(key=lambda item: (-item[1].elevation_deg, item[0]))
    return out


def format_timestamp(t: datetime) -> str:
    return _utc(t).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> datetime:
    return _utc(datetime.strptime(text.strip(), "%Y-%m-%dT%H:%M:%SZ"))


def tracks_to_csv(tracks: Iterable[SatelliteTrack], min_elevation_deg: float | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACK_CSV_HEADER)
    for tr in tracks:
        for i, t in enumerate(tr.times):
            if min_elevation_deg is not None and tr.elevation_deg[i] < min_elevation_deg:
                continue
            writer.writerow([tr.sat_id, format_timestamp(t), repr(float(tr.elevation_deg[i])),
                             repr(float(tr.azimuth_deg[i])), repr(float(tr.distance_m[i]))])
    return buf.getvalue()


def tracks_from_csv(text: str) -> list[SatelliteTrack]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != TRACK_CSV_HEADER:
        raise ValueError("unexpected track CSV header")
    rows: dict[str, list] = {}
    for row in reader:
        rows.setdefault(row[0], []).append(row)
    out = []
    for sid, rs in rows.items():
        out.append(SatelliteTrack(sid, tuple(parse_timestamp(r[1]) for r in rs),
                                  np.array([float(r[2]) for r in rs]),
                                  np.array([float(r[3]) for r in rs]),
                                  np.array([float(r[4]) for r in rs])))
    return out


# -- synthetic constellation -------------------------------------------------------

def _epoch_fields(t: datetime) -> tuple[int, float]:
    t = _utc(t)
    start = datetime(t.year, 1, 1, tzinfo=timezone.utc)
    return t.year, 1.0 + (t - start).total_seconds() / SECONDS_PER_DAY


def phased_constellation(station: GroundStation, epoch: datetime, n_planes: int = 6, per_plane: int = 10,
                         inclination_deg: float = 53.0, altitude_m: float = 550e3,
                         pass_interval_s: float = 600.0, first_pass_s: float = 300.0,
                         in_plane_spacing_deg: float = 5.0,
                         cross_track_offsets_deg: Sequence[float] = (-5.0, 1.0, -2.5, 6.0, -0.5, 3.5),
                         first_catalog: int = 90001) -> list[TleRecord]:
    """Circular-orbit satellite trains that pass near ``station`` in turn.

    Plane p is oriented so that the middle of its train crosses the
    station's latitude ``first_pass_s + p * pass_interval_s`` after the epoch, displaced in
    longitude by ``cross_track_offsets_deg[p]``; even planes pass
    northbound, odd planes southbound.  Used to build the bundled fixture.
    """
    a = EARTH_RADIUS_M + altitude_m
    n = math.sqrt(MU_EARTH / a ** 3)
    mm = n * SECONDS_PER_DAY / (2.0 * math.pi)
    inc = math.radians(inclination_deg)
    lat = math.radians(station.latitude_deg)
    u_asc = math.asin(max(-1.0, min(1.0, math.sin(lat) / math.sin(inc))))
    year, day = _epoch_fields(epoch)
    records = []
    for p in range(n_planes):
        t_pass = _utc(epoch) + timedelta(seconds=first_pass_s + p * pass_interval_s)
        u = u_asc if p % 2 == 0 else math.pi - u_asc
        node_offset = math.atan2(math.cos(inc) * math.sin(u), math.cos(u))
        lon = math.radians(station.longitude_deg + cross_track_offsets_deg[p % len(cross_track_offsets_deg)])
        raan = (lon + gmst_rad(t_pass) - node_offset) % (2.0 * math.pi)
        for j in range(per_plane):
            u_j = u + math.radians((j - (per_plane - 1) / 2.0) * in_plane_spacing_deg)
            m0 = (u_j - n * (t_pass - _utc(epoch)).total_seconds()) % (2.0 * math.pi)
            cat = first_catalog + p * per_plane + j
            records.append(TleRecord(
                name=f"SYNTH-{p}{j:02d}", catalog_number=cat, classification="U",
                intl_designator="24001A", epoch_year=year, epoch_day=round(day, 8),
                mean_motion_dot=" .00000000", mean_motion_ddot=" 00000-0", bstar=" 00000-0",
                ephemeris_type="0", element_set=999,
                inclination_deg=round(inclination_deg, 4), raan_deg=round(math.degrees(raan), 4) % 360.0,
                eccentricity=0.0, arg_perigee_deg=0.0,
                mean_anomaly_deg=round(math.degrees(m0), 4) % 360.0,
                mean_motion_rev_per_day=round(mm, 8), rev_number=1,
            ))
    return records


def bundled_constellation_text() -> str:
    from importlib import resources
    return resources.files("leoshare.data").joinpath("sample_constellation.tle").read_text()
