"""Earth/satellite/base-station geometry.

Angle conventions used throughout the package:

* Elevation is measured from the horizontal plane, positive upward, in
  degrees within [-90, 90].
* Azimuth is measured counterclockwise when viewed from above, in degrees
  wrapped to [-180, 180).  In the global (topocentric ENU) frame azimuth 0
  points East; in a sector's local frame azimuth 0 is the sector boresight.
* A sector antenna is rotated to its bearing and then tilted down by the
  downtilt angle, so a global direction at elevation ``-downtilt`` along the
  bearing maps to local (0, 0), and local elevation equals global elevation
  plus downtilt inside the sector's vertical plane.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_M = 6_371_000.0


class Frame(enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"


def wrap_azimuth(az_deg):
    """Wrap azimuth to [-180, 180). Works on scalars and arrays."""
    wrapped = np.mod(np.asarray(az_deg, dtype=float) + 180.0, 360.0) - 180.0
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class SteeringDirection:
    elevation_deg: float
    azimuth_deg: float
    frame: Frame = Frame.GLOBAL

    def __post_init__(self):
        if not -90.0 <= self.elevation_deg <= 90.0:
            raise ValueError(f"elevation {self.elevation_deg} outside [-90, 90]")
        if not -180.0 <= self.azimuth_deg <= 180.0:
            raise ValueError(f"azimuth {self.azimuth_deg} outside [-180, 180]")

    def unit_vector(self) -> np.ndarray:
        return direction_to_vector(self.elevation_deg, self.azimuth_deg)

    @classmethod
    def from_vector(cls, vec, frame: Frame = Frame.GLOBAL) -> "SteeringDirection":
        el, az = vector_to_direction(vec)
        return cls(float(el), float(az), frame)


def direction_to_vector(elevation_deg, azimuth_deg) -> np.ndarray:
    """Unit vector(s) (x, y, z) for elevation/azimuth; last axis has length 3."""
    el = np.radians(elevation_deg)
    az = np.radians(azimuth_deg)
    cos_el = np.cos(el)
    return np.stack([cos_el * np.cos(az), cos_el * np.sin(az), np.sin(el)], axis=-1)


def vector_to_direction(vec):
    """Inverse of :func:`direction_to_vector`; returns (elevation, azimuth) in degrees."""
    vec = np.asarray(vec, dtype=float)
    x, y, z = vec[..., 0], vec[..., 1], vec[..., 2]
    el = np.degrees(np.arctan2(z, np.hypot(x, y)))
    az = wrap_azimuth(np.degrees(np.arctan2(y, x)))
    return el, az


@dataclass(frozen=True)
class EarthParams:
    earth_radius_m: float = EARTH_RADIUS_M
    sat_altitude_m: float = 600e3

    def __post_init__(self):
        if self.earth_radius_m <= 0 or self.sat_altitude_m <= 0:
            raise ValueError("earth radius and satellite altitude must be positive")


@dataclass(frozen=True)
class BsOrientation:
    downtilt_deg: float = 12.0
    sector_bearing_deg: float = 0.0
    height_m: float = 35.0

    def __post_init__(self):
        if not 0.0 <= self.downtilt_deg < 90.0:
            raise ValueError(f"downtilt {self.downtilt_deg} outside [0, 90)")

    def _rotation(self) -> np.ndarray:
        # rows: local x (boresight), local y, local z expressed in global axes
        b = math.radians(self.sector_bearing_deg)
        t = math.radians(self.downtilt_deg)
        rz = np.array([[math.cos(b), math.sin(b), 0.0],
                       [-math.sin(b), math.cos(b), 0.0],
                       [0.0, 0.0, 1.0]])
        ry = np.array([[math.cos(t), 0.0, -math.sin(t)],
                       [0.0, 1.0, 0.0],
                       [math.sin(t), 0.0, math.cos(t)]])
        return ry @ rz


def slant_distance(elevation_deg, earth: EarthParams = EarthParams()):
    """Line-of-sight range (m) from a ground point to a satellite at the given elevation.

    Evaluates sqrt(R^2 sin^2(el) + h^2 + 2hR) - R sin(el) in the
    cancellation-free form (h^2 + 2hR) / (sqrt(...) + R sin(el)).
    Accepts scalars or arrays of elevation in [0, 90] degrees.
    """
    el = np.asarray(elevation_deg, dtype=float)
    if np.any(el < 0.0) or np.any(el > 90.0) or np.any(np.isnan(el)):
        raise ValueError("slant distance requires elevation in [0, 90] degrees")
    r = earth.earth_radius_m
    h = earth.sat_altitude_m
    s = r * np.sin(np.radians(el))
    d = (h * h + 2.0 * h * r) / (np.sqrt(s * s + h * h + 2.0 * h * r) + s)
    return float(d) if d.ndim == 0 else d


def global_to_local_angles(elevation_deg, azimuth_deg, orient: BsOrientation):
    """Vectorized global -> sector-local conversion of (elevation, azimuth) arrays."""
    v = direction_to_vector(elevation_deg, azimuth_deg)
    return vector_to_direction(v @ orient._rotation().T)


def local_to_global_angles(elevation_deg, azimuth_deg, orient: BsOrientation):
    v = direction_to_vector(elevation_deg, azimuth_deg)
    return vector_to_direction(v @ orient._rotation())


def global_to_local(direction: SteeringDirection, orient: BsOrientation) -> SteeringDirection:
    if direction.frame is not Frame.GLOBAL:
        raise ValueError("expected a direction in the global frame")
    el, az = global_to_local_angles(direction.elevation_deg, direction.azimuth_deg, orient)
    return SteeringDirection(float(el), float(az), Frame.LOCAL)


def local_to_global(direction: SteeringDirection, orient: BsOrientation) -> SteeringDirection:
    if direction.frame is not Frame.LOCAL:
        raise ValueError("expected a direction in the local frame")
    el, az = local_to_global_angles(direction.elevation_deg, direction.azimuth_deg, orient)
    return SteeringDirection(float(el), float(az), Frame.GLOBAL)


def angular_separation_deg(a: SteeringDirection, b: SteeringDirection) -> float:
    """Great-circle angle between two directions of the same frame."""
    cross = np.linalg.norm(np.cross(a.unit_vector(), b.unit_vector()))
    dot = float(a.unit_vector() @ b.unit_vector())
    return math.degrees(math.atan2(cross, dot))


def motion_angle_bound(velocity_mps: float, interval_s: float, altitude_m: float) -> float:
    """Worst-case angular change (degrees) of a satellite seen from the ground over one interval."""
    if velocity_mps < 0 or interval_s < 0 or altitude_m <= 0:
        raise ValueError("velocity and interval must be non-negative, altitude positive")
    return math.degrees(math.atan(velocity_mps * interval_s / altitude_m))


class PartitionKind(enum.Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class BeamSpacePartition:
    """Angular box of the upper (null-steering) or lower (serving) beam space, local frame."""

    kind: PartitionKind
    downtilt_deg: float = 0.0
    azimuth_limit_deg: float = 60.0

    @property
    def elevation_bounds(self) -> tuple[float, float]:
        if self.kind is PartitionKind.UP:
            return self.downtilt_deg, 90.0 + self.downtilt_deg
        return -90.0 + self.downtilt_deg, self.downtilt_deg

    def contains(self, direction: SteeringDirection) -> bool:
        lo, hi = self.elevation_bounds
        return (lo <= direction.elevation_deg <= hi
                and abs(direction.azimuth_deg) <= self.azimuth_limit_deg)


def in_partition(direction: SteeringDirection, part: BeamSpacePartition) -> bool:
    if direction.frame is not Frame.LOCAL:
        raise ValueError("partition membership is defined in the local frame")
    return part.contains(direction)
