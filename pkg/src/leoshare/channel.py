"""Synthetic multipath channels and the satellite channel look-up table.

The terrestrial and BS-to-satellite channels are drawn from a seeded
geometric cluster model: every cluster contributes a rank-one term built
from array responses, with an exponentially decaying power profile, a
random phase and a random delay that makes the channel frequency
selective across a small set of carrier taps.  Cluster 0 is the line of
sight and carries a K/(K+1) share of the power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .antenna import UraGeometry, steering_matrix
from .geometry import BsOrientation, Frame, SteeringDirection, global_to_local_angles, wrap_azimuth


@dataclass(frozen=True)
class MultipathConfig:
    n_clusters: int = 4
    decay_db_per_cluster: float = 3.0
    angular_spread_deg: float = 10.0
    k_factor_db: float = 10.0
    n_taps: int = 4
    delay_spread_s: float = 100e-9
    bandwidth_hz: float = 30e6
    seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ValueError("need at least one cluster")
        if self.n_taps < 1:
            raise ValueError("need at least one tap")
        if self.angular_spread_deg < 0 or self.delay_spread_s < 0:
            raise ValueError("spreads must be non-negative")

    def cluster_powers(self) -> np.ndarray:
        """Linear cluster powers summing to one; cluster 0 holds the K-factor share."""
        if self.n_clusters == 1:
            return np.ones(1)
        decay = 10.0 ** (-self.decay_db_per_cluster * np.arange(1, self.n_clusters) / 10.0)
        decay /= decay.sum()
        if math.isinf(self.k_factor_db):
            los = 1.0 if self.k_factor_db > 0 else 0.0
        else:
            k = 10.0 ** (self.k_factor_db / 10.0)
            los = k / (k + 1.0)
        return np.concatenate([[los], (1.0 - los) * decay])

    def tap_frequencies(self) -> np.ndarray:
        """Baseband offsets (Hz) of the taps, centred on the carrier."""
        return (np.arange(self.n_taps) - (self.n_taps - 1) / 2.0) * self.bandwidth_hz / self.n_taps


@dataclass(frozen=True)
class TerrestrialChannel:
    taps: np.ndarray                 # (n_taps, N_r, N_t)
    tap_frequencies_hz: np.ndarray

    @property
    def n_rx(self) -> int:
        return self.taps.shape[1]

    @property
    def n_tx(self) -> int:
        return self.taps.shape[2]


@dataclass(frozen=True)
class SatChannel:
    """BS-to-satellite channel: one N_t vector per tap.

    ``scatter`` keeps the normalized NLOS component so the LOS path can be
    re-pointed to a tracked direction without redrawing the clusters.
    """

    taps: np.ndarray                 # (n_taps, N_t)
    los: bool
    source_bin: tuple[float, float] | None = None
    k_factor_db: float = math.inf
    scatter: np.ndarray | None = None

    @property
    def n_taps(self) -> int:
        return self.taps.shape[0]

    def repointed(self, direction: SteeringDirection, geom: UraGeometry) -> "SatChannel":
        """Same NLOS scatter, LOS path moved to ``direction`` (local frame)."""
        los_vec = steering_matrix(direction.elevation_deg, direction.azimuth_deg, geom)[0]
        taps = _mix_los(los_vec, self.scatter, self.k_factor_db, self.n_taps)
        return replace(self, taps=taps)


@dataclass(frozen=True)
class TerrestrialGeometry:
    """Departure direction at the BS (local) and arrival direction at the UE (UE array frame)."""

    tx_direction: SteeringDirection
    rx_direction: SteeringDirection
    tx_array: UraGeometry = UraGeometry(8, 8)
    rx_array: UraGeometry = UraGeometry(1, 2)


def _normalize_rows(x: np.ndarray, target_sq: float) -> np.ndarray:
    flat = x.reshape(x.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize a zero channel tap")
    return x * (np.sqrt(target_sq) / norms).reshape((-1,) + (1,) * (x.ndim - 1))


def normalize_terrestrial(channel: TerrestrialChannel) -> TerrestrialChannel:
    """Scale each tap so that ||H||_F^2 = N_t * N_r."""
    target = channel.n_rx * channel.n_tx
    return replace(channel, taps=_normalize_rows(channel.taps, target))


def normalize_vector_taps(taps: np.ndarray) -> np.ndarray:
    """Scale each row so that ||h||^2 = N_t."""
    taps = np.atleast_2d(taps)
    return _normalize_rows(taps, taps.shape[1])


def _cluster_offsets(rng, config: MultipathConfig, n: int):
    spread = config.angular_spread_deg
    d_el = rng.normal(0.0, spread, n) if spread > 0 else np.zeros(n)
    d_az = rng.normal(0.0, spread, n) if spread > 0 else np.zeros(n)
    d_el[0] = d_az[0] = 0.0
    return d_el, d_az


def _offset_directions(base: SteeringDirection, d_el, d_az):
    el = np.clip(base.elevation_deg + d_el, -90.0, 90.0)
    az = wrap_azimuth(base.azimuth_deg + d_az)
    return el, az


def _cluster_gains(rng, config: MultipathConfig) -> np.ndarray:
    """Complex per-(tap, cluster) amplitudes, shape (n_taps, n_clusters)."""
    n = config.n_clusters
    powers = config.cluster_powers()
    phases = rng.uniform(0.0, 2.0 * np.pi, n)
    delays = rng.uniform(0.0, 3.0 * config.delay_spread_s, n)
    delays[0] = 0.0
    freqs = config.tap_frequencies()
    rot = np.exp(1j * phases)[None, :] * np.exp(-2j * np.pi * freqs[:, None] * delays[None, :])
    return np.sqrt(powers)[None, :] * rot


def synth_terrestrial(config: MultipathConfig, geometry: TerrestrialGeometry, seed=None) -> TerrestrialChannel:
    """Sum of rank-one cluster terms a_r a_t^H; deterministic for a given seed.

    ``seed`` defaults to ``config.seed``.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    n = config.n_clusters
    tx_el, tx_az = _offset_directions(geometry.tx_direction, *_cluster_offsets(rng, config, n))
    rx_el, rx_az = _offset_directions(geometry.rx_direction, *_cluster_offsets(rng, config, n))
    a_t = steering_matrix(tx_el, tx_az, geometry.tx_array)          # (n, N_t)
    a_r = steering_matrix(rx_el, rx_az, geometry.rx_array)          # (n, N_r)
    gains = _cluster_gains(rng, config)                             # (K, n)
    taps = np.einsum("kc,cr,ct->krt", gains, a_r, a_t.conj())
    return TerrestrialChannel(taps=taps, tap_frequencies_hz=config.tap_frequencies())


def _mix_los(los_vec: np.ndarray, scatter: np.ndarray | None, k_factor_db: float, n_taps: int) -> np.ndarray:
    n_t = los_vec.shape[0]
    if scatter is None or math.isinf(k_factor_db) and k_factor_db > 0:
        return np.tile(los_vec, (n_taps, 1)).astype(complex)
    k = 10.0 ** (k_factor_db / 10.0)
    raw = math.sqrt(k / (k + 1.0)) * los_vec[None, :] + math.sqrt(1.0 / (k + 1.0)) * scatter
    return normalize_vector_taps(raw) if n_t else raw


def synth_satellite(direction: SteeringDirection, config: MultipathConfig, seed=None,
                    geom: UraGeometry = UraGeometry(8, 8)) -> SatChannel:
    """LOS steering vector plus weak NLOS clusters, normalized to ||h||^2 = N_t per tap.

    ``direction`` is the satellite direction in the BS local frame.  NLOS
    clusters leave the array around the LOS direction with the configured
    angular spread; their relative powers follow the decay profile.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    los_vec = steering_matrix(direction.elevation_deg, direction.azimuth_deg, geom)[0]
    if math.isinf(config.k_factor_db) and config.k_factor_db > 0 or config.n_clusters == 1:
        taps = np.tile(los_vec, (config.n_taps, 1)).astype(complex)
        return SatChannel(taps=taps, los=True, k_factor_db=math.inf)

    n_nlos = config.n_clusters - 1
    spread = max(config.angular_spread_deg, 1e-9)
    el = np.clip(direction.elevation_deg + rng.normal(0.0, spread, n_nlos), -90.0, 90.0)
    az = wrap_azimuth(direction.azimuth_deg + rng.normal(0.0, spread, n_nlos))
    a = steering_matrix(el, az, geom)                               # (n_nlos, N_t)
    gains = _cluster_gains(rng, config)[:, 1:]                      # (K, n_nlos)
    scatter = normalize_vector_taps(gains @ a)
    taps = _mix_los(los_vec, scatter, config.k_factor_db, config.n_taps)
    return SatChannel(taps=taps, los=False, k_factor_db=config.k_factor_db, scatter=scatter)


# -- look-up table ---------------------------------------------------------

DEFAULT_ELEVATION_CENTERS = tuple(float(x) for x in range(30, 91, 10))
DEFAULT_AZIMUTH_CENTERS = tuple(float(x) for x in range(-180, 180, 60))


def _nearest(value: float, centers: np.ndarray, circular: bool = False) -> float:
    diff = np.abs(centers - value)
    if circular:
        diff = np.minimum(diff, 360.0 - diff)
    best = diff.min()
    # ties go to the lower center
    return float(centers[np.isclose(diff, best, rtol=0.0, atol=1e-12)].min())


@dataclass(frozen=True)
class SatChannelTable:
    """Pre-computed BS-to-satellite channels on an elevation/azimuth grid (global angles)."""

    elevation_centers: tuple[float, ...]
    azimuth_centers: tuple[float, ...]
    entries: dict = field(default_factory=dict)    # (el, az) -> SatChannel

    def bin_for(self, direction: SteeringDirection) -> tuple[float, float]:
        if not self.entries:
            raise LookupError("satellite channel table is empty")
        populated = np.array(sorted(self.entries))
        el = _nearest(direction.elevation_deg, np.unique(populated[:, 0]))
        row = populated[populated[:, 0] == el]
        az = _nearest(wrap_azimuth(direction.azimuth_deg), row[:, 1], circular=True)
        return el, az


def table_lookup(table: SatChannelTable, direction: SteeringDirection) -> SatChannel:
    """Channel of the populated bin nearest to ``direction``; ties go to the lower bin."""
    return table.entries[table.bin_for(direction)]


def build_sat_table(orient: BsOrientation, config: MultipathConfig, seed,
                    geom: UraGeometry = UraGeometry(8, 8),
                    elevation_centers: Iterable[float] = DEFAULT_ELEVATION_CENTERS,
                    azimuth_centers: Iterable[float] = DEFAULT_AZIMUTH_CENTERS) -> SatChannelTable:
    el_c = tuple(float(x) for x in elevation_centers)
    az_c = tuple(float(x) for x in azimuth_centers)
    entries = {}
    for i, el in enumerate(el_c):
        for j, az in enumerate(az_c):
            lel, laz = global_to_local_angles(el, az, orient)
            local = SteeringDirection(float(lel), float(laz), Frame.LOCAL)
            ch = synth_satellite(local, config, seed=[*np.atleast_1d(seed), i, j], geom=geom)
            entries[(el, az)] = replace(ch, source_bin=(el, az))
    return SatChannelTable(el_c, az_c, entries)


# -- text format -------------------------------------------------------------
#
#   sat-channel-table v1
#   bin <el> <az> taps <K> n_t <N> los <0|1> k_factor_db <K_dB>
#   tap <re> <im> <re> <im> ...            (K lines)
#   scatter <re> <im> ...                  (K lines, only when NLOS present)

_TABLE_HEADER = "sat-channel-table v1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _complex_line(tag: str, vec: np.ndarray) -> str:
    parts = [tag]
    for z in vec:
        parts.append(_fmt(z.real))
        parts.append(_fmt(z.imag))
    return " ".join(parts)


def _parse_complex(fields: list[str]) -> np.ndarray:
    vals = np.array([float(x) for x in fields])
    return vals[0::2] + 1j * vals[1::2]


def table_to_text(table: SatChannelTable) -> str:
    lines = [_TABLE_HEADER]
    for (el, az) in sorted(table.entries):
        ch = table.entries[(el, az)]
        lines.append(f"bin {_fmt(el)} {_fmt(az)} taps {ch.n_taps} n_t {ch.taps.shape[1]} "
                     f"los {int(ch.los)} k_factor_db {_fmt(ch.k_factor_db)}")
        lines.extend(_complex_line("tap", row) for row in ch.taps)
        if ch.scatter is not None:
            lines.extend(_complex_line("scatter", row) for row in ch.scatter)
    return "\n".join(lines) + "\n"


def table_from_text(text: str) -> SatChannelTable:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != _TABLE_HEADER:
        raise ValueError("not a sat-channel-table v1 document")
    entries = {}
    current = None
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split()
        tag = fields[0]
        if tag == "bin":
            kv = dict(zip(fields[3::2], fields[4::2]))
            current = {"key": (float(fields[1]), float(fields[2])), "los": kv["los"] == "1",
                       "k": float(kv["k_factor_db"]), "taps": [], "scatter": []}
            entries[current["key"]] = current
        elif tag in ("tap", "scatter") and current is not None:
            current["taps" if tag == "tap" else "scatter"].append(_parse_complex(fields[1:]))
        else:
            raise ValueError(f"line {lineno}: unexpected record {tag!r}")
    out = {}
    for key, rec in entries.items():
        out[key] = SatChannel(taps=np.array(rec["taps"]), los=rec["los"], source_bin=key,
                              k_factor_db=rec["k"],
                              scatter=np.array(rec["scatter"]) if rec["scatter"] else None)
    el_c = tuple(sorted({k[0] for k in out}))
    az_c = tuple(sorted({k[1] for k in out}))
    return SatChannelTable(el_c, az_c, out)
