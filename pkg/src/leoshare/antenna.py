"""Antenna element pattern and uniform-rectangular-array responses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Frame, SteeringDirection


@dataclass(frozen=True)
class ElementPattern:
    """3GPP sector element pattern parameters (dB / degrees)."""

    g_max_db: float = 8.0
    sla_v_db: float = 30.0
    a_m_db: float = 30.0
    theta_3db_deg: float = 65.0
    phi_3db_deg: float = 65.0

    def __post_init__(self):
        for name in ("g_max_db", "sla_v_db", "a_m_db", "theta_3db_deg", "phi_3db_deg"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class UraGeometry:
    """Rows stack vertically (elevation phase), columns horizontally (azimuth phase)."""

    rows: int = 8
    cols: int = 8
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array needs at least one row and one column")
        if self.spacing_wavelengths <= 0:
            raise ValueError("element spacing must be positive")

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols


def element_gain_grid_db(local_elevation_deg, local_azimuth_deg,
                         pattern: ElementPattern = ElementPattern()):
    """Vectorized element gain for local-frame angles.

    The 3GPP zenith angle is ``90 - local elevation``, so the vertical term
    ``12 ((theta - 90) / theta_3dB)^2`` reduces to ``12 (el / theta_3dB)^2``.
    """
    el = np.asarray(local_elevation_deg, dtype=float)
    az = np.asarray(local_azimuth_deg, dtype=float)
    g_v = -np.minimum(12.0 * (el / pattern.theta_3db_deg) ** 2, pattern.sla_v_db)
    g_h = -np.minimum(12.0 * (az / pattern.phi_3db_deg) ** 2, pattern.a_m_db)
    g = pattern.g_max_db - np.minimum(-(g_v + g_h), pattern.a_m_db)
    return float(g) if g.ndim == 0 else g


def element_gain_db(direction: SteeringDirection, pattern: ElementPattern = ElementPattern()) -> float:
    if direction.frame is not Frame.LOCAL:
        raise ValueError("element gain is defined for local-frame directions")
    return element_gain_grid_db(direction.elevation_deg, direction.azimuth_deg, pattern)


def direction_cosines(elevation_deg, azimuth_deg):
    """(u, v): horizontal and vertical direction cosines along the array axes."""
    el = np.radians(elevation_deg)
    az = np.radians(azimuth_deg)
    return np.cos(el) * np.sin(az), np.sin(el)


def steering_matrix(elevation_deg, azimuth_deg, geom: UraGeometry) -> np.ndarray:
    """Stacked spatial signatures, shape (n_directions, N_t).

    Element (m, n) sits at flat index ``m * cols + n`` and has phase
    ``2 pi d (m v + n u)``.
    """
    u, v = direction_cosines(np.atleast_1d(elevation_deg), np.atleast_1d(azimuth_deg))
    m = np.arange(geom.rows)
    n = np.arange(geom.cols)
    phase = (m[None, :, None] * v[:, None, None] + n[None, None, :] * u[:, None, None])
    return np.exp(2j * np.pi * geom.spacing_wavelengths * phase).reshape(len(u), -1)


def steering_vector(direction: SteeringDirection, geom: UraGeometry) -> np.ndarray:
    return steering_matrix(direction.elevation_deg, direction.azimuth_deg, geom)[0]


def beamforming_gain(e: np.ndarray, w: np.ndarray) -> float:
    """|e^H w|^2 as a linear power ratio."""
    e = np.asarray(e)
    w = np.asarray(w)
    if e.shape != w.shape or e.ndim != 1:
        raise ValueError(f"dimension mismatch: {e.shape} vs {w.shape}")
    return float(abs(np.vdot(e, w)) ** 2)
