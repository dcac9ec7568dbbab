"""Regularized transmit/receive beamforming with satellite interference nulling.

The receive combiner is fixed first as the dominant left singular vector of
the (normalized) terrestrial channel.  The transmit beamformer then maximizes

    |w_r^H H w_t|^2 - lam * sum_i |h_i^H w_t|^2     s.t. ||w_t|| = 1,

which is the dominant eigenvector of ``g g^H - lam * sum_i h_i h_i^H`` with
``g = H^H w_r``.  The satellite vectors ``h_i`` are either channel vectors
(multipath nulling) or plain LOS steering vectors.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .antenna import UraGeometry, steering_matrix
from .geometry import Frame, SteeringDirection
from .linalg import ConvergenceError, dominant_left_singular, hermitian_max_eigvec

log = logging.getLogger(__name__)


class NullingMode(enum.Enum):
    NO_NULLING = "no_nulling"
    LOS = "los"
    MULTIPATH = "mp"


@dataclass(frozen=True)
class NullingConfig:
    lam: float = 0.0
    mode: NullingMode = NullingMode.NO_NULLING

    def __post_init__(self):
        if not self.lam >= 0.0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if self.mode is NullingMode.NO_NULLING and self.lam != 0.0:
            raise ValueError("NO_NULLING requires lambda = 0")

    @property
    def label(self) -> str:
        if self.mode is NullingMode.NO_NULLING:
            return "no_nulling"
        return f"{self.mode.value}:{self.lam:g}"


@dataclass(frozen=True)
class BeamformerPair:
    w_t: np.ndarray
    w_r: np.ndarray
    achieved_objective: float

    def __post_init__(self):
        for name in ("w_t", "w_r"):
            norm = np.linalg.norm(getattr(self, name))
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"{name} is not unit norm ({norm})")


def rx_beamformer(h: np.ndarray) -> np.ndarray:
    """Unit dominant left singular vector of one channel tap (N_r x N_t)."""
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    if h.shape[0] == 1:
        return np.ones(1, dtype=complex)
    _, u = dominant_left_singular(h)
    return u / np.linalg.norm(u)


def _interferer_array(interferers, n_t: int) -> np.ndarray:
    if len(interferers) == 0:
        return np.zeros((0, n_t), dtype=complex)
    arr = np.array([np.asarray(v, dtype=complex).ravel() for v in interferers])
    if arr.shape[1] != n_t:
        raise ValueError(f"interferer length {arr.shape[1]} does not match N_t = {n_t}")
    return arr


def nulling_matrix(h: np.ndarray, w_r: np.ndarray, interferers, lam: float):
    """(M, g, interferer array) for one tap."""
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    w_r = np.asarray(w_r, dtype=complex).ravel()
    if w_r.shape[0] != h.shape[0]:
        raise ValueError(f"w_r length {w_r.shape[0]} does not match N_r = {h.shape[0]}")
    g = h.conj().T @ w_r
    hs = _interferer_array(interferers, h.shape[1])
    m = np.outer(g, g.conj())
    if lam > 0.0 and hs.shape[0]:
        m = m - lam * (hs.T @ hs.conj())
    return m, g, hs


def tx_beamformer(h: np.ndarray, w_r: np.ndarray, interferers: Sequence[np.ndarray],
                  cfg: NullingConfig) -> np.ndarray:
    """Dominant eigenvector of ``H^H w_r w_r^H H - lam * sum h_i h_i^H`` (unit norm)."""
    lam = cfg.lam if cfg.mode is not NullingMode.NO_NULLING else 0.0
    m, g, hs = nulling_matrix(h, w_r, interferers, lam)
    if lam == 0.0 or hs.shape[0] == 0:
        norm = np.linalg.norm(g)
        if norm == 0.0:
            raise ValueError("channel has no energy along w_r")
        return g / norm
    # -lam * sum h h^H has eigenvalues >= -lam * rho(G), G the interferer Gram matrix;
    # a Gershgorin bound on rho(G) keeps M + cI positive semidefinite.
    gram = hs.conj() @ hs.T
    shift = lam * float(np.max(np.sum(np.abs(gram), axis=1)))
    try:
        _, w = hermitian_max_eigvec(m, shift=shift)
    except ConvergenceError as exc:
        # large lam: the shift dwarfs the eigengap and power iteration crawls
        log.debug("%s; falling back to LAPACK eigh", exc)
        w = np.linalg.eigh(m)[1][:, -1]
    return w / np.linalg.norm(w)


def objective(h, w_r, w_t, interferers, lam: float) -> float:
    """Rayleigh quotient of the nulling matrix at ``w_t``."""
    m, _, _ = nulling_matrix(h, w_r, interferers, lam)
    w_t = np.asarray(w_t, dtype=complex)
    return float(np.vdot(w_t, m @ w_t).real / np.vdot(w_t, w_t).real)


def design_pair(h: np.ndarray, interferers: Sequence[np.ndarray], cfg: NullingConfig) -> BeamformerPair:
    w_r = rx_beamformer(h)
    w_t = tx_beamformer(h, w_r, interferers, cfg)
    return BeamformerPair(w_t=w_t, w_r=w_r, achieved_objective=objective(h, w_r, w_t, interferers, cfg.lam))


def design_per_tap(taps: np.ndarray, interferers_per_tap, cfg: NullingConfig) -> list[BeamformerPair]:
    """Independent solution for every frequency tap.

    ``interferers_per_tap[k]`` lists the satellite vectors seen on tap k; a
    single list (e.g. LOS steering vectors) is broadcast to all taps.
    """
    taps = np.asarray(taps)
    if taps.ndim == 2:
        taps = taps[None]
    per_tap = interferers_per_tap
    if len(per_tap) and not isinstance(per_tap[0], (list, tuple)) and np.ndim(per_tap[0]) == 1:
        per_tap = [per_tap] * taps.shape[0]
    if len(per_tap) == 0:
        per_tap = [[]] * taps.shape[0]
    if len(per_tap) != taps.shape[0]:
        raise ValueError("one interferer list per tap is required")
    return [design_pair(taps[k], per_tap[k], cfg) for k in range(taps.shape[0])]


def los_interference_matrix(tracks: Sequence[SteeringDirection], geom: UraGeometry) -> list[np.ndarray]:
    """One LOS steering vector per tracked satellite (local-frame directions)."""
    if not tracks:
        return []
    for d in tracks:
        if d.frame is not Frame.LOCAL:
            raise ValueError("satellite tracks must be given in the BS local frame")
    el = np.array([d.elevation_deg for d in tracks])
    az = np.array([d.azimuth_deg for d in tracks])
    return list(steering_matrix(el, az, geom))


def ue_gain(h: np.ndarray, w_r: np.ndarray, w_t: np.ndarray) -> float:
    """|w_r^H H w_t|^2 for one tap."""
    return float(abs(np.vdot(w_r, np.atleast_2d(h) @ w_t)) ** 2)


def interference_gains(interferers, w_t) -> np.ndarray:
    """|h_i^H w_t|^2 for every interferer."""
    hs = _interferer_array(interferers, len(w_t))
    return np.abs(hs.conj() @ w_t) ** 2
