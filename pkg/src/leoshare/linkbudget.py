"""Uplink interference budget toward satellites and terrestrial SNR loss.

Power bookkeeping: transmit power is configured in dBm and converted to dBW
before it meets ``10 log10(B kappa)``, so INR is a true power ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .antenna import ElementPattern, element_gain_grid_db
from .geometry import BsOrientation, EarthParams, SteeringDirection, Frame, global_to_local_angles, slant_distance

FSPL_CONSTANT_DB = -147.55
INR_FLOOR_DB = -200.0
BOLTZMANN = 1.380649e-23

INR_CSV_HEADER = ("timestamp", "sat_id", "elevation_deg", "inr_db", "mode")
SNR_LOSS_CSV_HEADER = ("timestamp", "bs_id", "rho_t_db", "mode")


@dataclass(frozen=True)
class LinkParams:
    p_tx_dbm: float = 33.0
    g_over_t_db: float = 13.0
    l_a_db: float = 0.0
    bandwidth_hz: float = 30e6
    boltzmann: float = BOLTZMANN
    carrier_hz: float = 12e9
    ue_noise_figure_db: float = 7.0

    def __post_init__(self):
        if self.bandwidth_hz <= 0 or self.carrier_hz <= 0:
            raise ValueError("bandwidth and carrier frequency must be positive")
        if self.boltzmann <= 0:
            raise ValueError("Boltzmann constant must be positive")

    @property
    def noise_density_db(self) -> float:
        """10 log10(B kappa) in dBW/K."""
        return 10.0 * math.log10(self.bandwidth_hz * self.boltzmann)


@dataclass(frozen=True)
class InrSample:
    timestamp: str
    sat_id: str
    inr_db: float
    elevation_deg: float
    mode: str


@dataclass(frozen=True)
class SnrLossSample:
    timestamp: str
    bs_id: int
    rho_t_db: float
    mode: str


def fspl_db(distance_m, frequency_hz):
    d = np.asarray(distance_m, dtype=float)
    f = np.asarray(frequency_hz, dtype=float)
    if np.any(d <= 0) or np.any(f <= 0):
        raise ValueError("distance and frequency must be positive")
    out = 20.0 * np.log10(d) + 20.0 * np.log10(f) + FSPL_CONSTANT_DB
    return float(out) if out.ndim == 0 else out


def propagation_loss_components(elevation_deg, azimuth_deg, orient: BsOrientation, params: LinkParams = LinkParams(),
                                earth: EarthParams = EarthParams(), pattern: ElementPattern = ElementPattern()):
    """(FSPL, element gain) in dB for global directions; vectorized."""
    fspl = fspl_db(slant_distance(elevation_deg, earth), params.carrier_hz)
    lel, laz = global_to_local_angles(elevation_deg, azimuth_deg, orient)
    return fspl, element_gain_grid_db(lel, laz, pattern)


def total_propagation_loss_db(direction: SteeringDirection, orient: BsOrientation, params: LinkParams = LinkParams(),
                              earth: EarthParams = EarthParams(), pattern: ElementPattern = ElementPattern()) -> float:
    """FSPL at the slant range minus the BS element gain toward the satellite."""
    if direction.frame is not Frame.GLOBAL:
        raise ValueError("expected a global-frame direction")
    fspl, g = propagation_loss_components(direction.elevation_deg, direction.azimuth_deg, orient, params, earth, pattern)
    return float(fspl - g)


def inr_db(tx_gains: Iterable[float], params: LinkParams = LinkParams(), floor_db: float = INR_FLOOR_DB) -> float:
    """INR at one satellite from the linear gains of all active BSs.

    Each gain already includes path loss and element gain together with
    the array factor toward the satellite.
    """
    gains = np.asarray(list(tx_gains), dtype=float)
    if np.any(gains < 0) or np.any(~np.isfinite(gains)):
        raise ValueError("gains must be finite and non-negative")
    total = float(gains.sum())
    if total <= 0.0:
        return floor_db
    val = (params.p_tx_dbm - 30.0 + 10.0 * math.log10(total) + params.g_over_t_db
           - params.l_a_db - params.noise_density_db)
    return max(val, floor_db)


def snr_degradation_db(inr: float) -> float:
    """10 log10(1 + INR_linear); zero for the floor sentinel or -inf."""
    if inr == -math.inf:
        return 0.0
    return 10.0 * math.log1p(10.0 ** (0.1 * inr)) / math.log(10.0)


def terrestrial_snr_loss_db(h: np.ndarray, w_r: np.ndarray, w_t_baseline: np.ndarray,
                            w_t_nulling: np.ndarray) -> float:
    """Ratio of baseline to nulling link gains in dB; +inf when the nulling gain vanishes."""
    h = np.atleast_2d(h)
    base = abs(np.vdot(w_r, h @ w_t_baseline)) ** 2
    null = abs(np.vdot(w_r, h @ w_t_nulling)) ** 2
    if null == 0.0:
        return math.inf
    return 10.0 * math.log10(base / null)


def averaged_snr_loss_db(base_gains: Iterable[float], null_gains: Iterable[float]) -> float:
    """Tap-averaged gains (linear) compared in dB."""
    b = float(np.mean(list(base_gains)))
    n = float(np.mean(list(null_gains)))
    if n == 0.0:
        return math.inf
    return 10.0 * math.log10(b / n)
