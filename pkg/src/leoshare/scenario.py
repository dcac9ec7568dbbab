"""System-level Monte-Carlo harness.

Per time step: sample the active sector BSs at the configured load, drop
one served UE per active BS, pick ``n_sat`` of the visible satellites, and
for every nulling mode compute per-tap beamformers, satellite INR (summed
over active BSs) and terrestrial SNR loss against the lambda = 0 baseline.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from typing import Sequence

import numpy as np

from . import __version__
from .antenna import ElementPattern, UraGeometry, element_gain_grid_db
from .channel import (MultipathConfig, SatChannelTable, TerrestrialGeometry, build_sat_table,
                      normalize_terrestrial, synth_terrestrial, table_lookup)
from .codebook import NO_SATELLITE, CodebookTensor, nearest_steering_index, select_codeword, select_region
from .ephemeris import SatelliteTrack, format_timestamp, parse_timestamp, time_grid, visible_satellites
from .geometry import BsOrientation, Frame, SteeringDirection, global_to_local, global_to_local_angles, vector_to_direction
from .linkbudget import (INR_CSV_HEADER, SNR_LOSS_CSV_HEADER, InrSample, LinkParams, SnrLossSample,
                         averaged_snr_loss_db, fspl_db, inr_db)
from .nulling import NullingConfig, NullingMode, design_per_tap, los_interference_matrix

log = logging.getLogger(__name__)

CODEBOOK_MODE = "codebook"
ELEVATION_BINS = ((25.0, 45.0), (45.0, 70.0), (70.0, 90.0))
ELEVATION_CSV_HEADER = ("timestamp", "sat_id", "elevation_deg")


# -- deployment ---------------------------------------------------------------

@dataclass(frozen=True)
class BaseStation:
    bs_id: int
    site_id: int
    position_m: tuple[float, float, float]
    orientation: BsOrientation


@dataclass(frozen=True)
class Deployment:
    area_width_km: float = 24.0
    area_height_km: float = 15.0
    isd_m: float = 1732.0
    sectors_per_site: int = 3
    downtilt_deg: float = 12.0
    bs_height_m: float = 35.0
    ue_height_m: float = 1.6
    seed: int = 0

    @classmethod
    def desk(cls) -> "Deployment":
        """3 x 3 sites."""
        return cls(area_width_km=5.5, area_height_km=4.6)

    def grid_shape(self) -> tuple[int, int]:
        cols = int(math.floor(self.area_width_km * 1000.0 / self.isd_m))
        rows = int(math.floor(self.area_height_km * 1000.0 / (self.isd_m * math.sqrt(3.0) / 2.0)))
        return rows, cols


def deploy(dep: Deployment) -> list[BaseStation]:
    """Hexagonal site grid on the rectangle; every site holds ``sectors_per_site`` sector BSs."""
    rows, cols = dep.grid_shape()
    if rows < 1 or cols < 1:
        raise ValueError("area too small for a single site")
    dy = dep.isd_m * math.sqrt(3.0) / 2.0
    out = []
    site = 0
    for r in range(rows):
        for c in range(cols):
            x = (c + 0.5 + 0.5 * (r % 2)) * dep.isd_m
            y = (r + 0.5) * dy
            for s in range(dep.sectors_per_site):
                orient = BsOrientation(dep.downtilt_deg, 360.0 * s / dep.sectors_per_site, dep.bs_height_m)
                out.append(BaseStation(len(out), site, (x, y, dep.bs_height_m), orient))
            site += 1
    return out


def _local_direction_to(bs: BaseStation, point) -> tuple[float, float]:
    d = np.asarray(point, dtype=float) - np.asarray(bs.position_m)
    el, az = vector_to_direction(d)
    lel, laz = global_to_local_angles(el, az, bs.orientation)
    return float(lel), float(laz)


def received_power_db(bs_list: Sequence[BaseStation], ue_positions: np.ndarray, carrier_hz: float,
                      pattern: ElementPattern = ElementPattern()) -> np.ndarray:
    """Element gain minus FSPL, shape (n_ue, n_bs)."""
    ue = np.atleast_2d(ue_positions)
    out = np.empty((ue.shape[0], len(bs_list)))
    for j, bs in enumerate(bs_list):
        d = ue - np.asarray(bs.position_m)
        dist = np.maximum(np.linalg.norm(d, axis=1), 1.0)
        el, az = vector_to_direction(d)
        lel, laz = global_to_local_angles(el, az, bs.orientation)
        out[:, j] = element_gain_grid_db(lel, laz, pattern) - fspl_db(dist, carrier_hz)
    return out


@dataclass(frozen=True)
class Association:
    ue_positions: np.ndarray      # (n_ue, 3)
    serving_bs: np.ndarray        # (n_ue,) BS ids


def drop_and_associate(bs_list: Sequence[BaseStation], n_ue: int, seed, dep: Deployment,
                       carrier_hz: float = 12e9) -> Association:
    """Uniform UE drop over the area; each UE picks the strongest BS (ties: lowest id)."""
    if n_ue < 1:
        raise ValueError("need at least one UE")
    rng = np.random.default_rng(seed)
    xy = rng.uniform([0.0, 0.0], [dep.area_width_km * 1000.0, dep.area_height_km * 1000.0], size=(n_ue, 2))
    pos = np.column_stack([xy, np.full(n_ue, dep.ue_height_m)])
    order = sorted(range(len(bs_list)), key=lambda j: bs_list[j].bs_id)
    ordered = [bs_list[j] for j in order]
    power = received_power_db(ordered, pos, carrier_hz)
    best = np.argmax(power, axis=1)           # first maximum = lowest id
    ids = np.array([ordered[j].bs_id for j in best], dtype=int)
    return Association(pos, ids)


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    network_load: float = 0.2
    n_sat_per_interval: int = 10
    n_steps: int = 60
    step_s: float = 60.0
    start_utc: str = "2024-03-01T00:00:00Z"
    min_elevation_deg: float = 25.0
    modes: tuple[str, ...] = ("los", "mp")
    lambdas: tuple[float, ...] = (0.1, 1.0)
    codebook: bool = False
    ues_per_bs: int = 4
    bs_rows: int = 8
    bs_cols: int = 8
    ue_rows: int = 1
    ue_cols: int = 2
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not 0.0 < self.network_load <= 1.0:
            raise ValueError("network load must be in (0, 1]")
        if self.n_sat_per_interval < 0:
            raise ValueError("n_sat_per_interval must be non-negative")
        if self.n_steps < 1 or self.step_s <= 0:
            raise ValueError("need at least one step of positive length")
        for m in self.modes:
            if m not in ("los", "mp"):
                raise ValueError(f"unknown nulling mode {m!r}")
        for lam in self.lambdas:
            if lam < 0:
                raise ValueError("lambdas must be non-negative")

    def nulling_configs(self) -> list[NullingConfig]:
        out = [NullingConfig()]
        kinds = {"los": NullingMode.LOS, "mp": NullingMode.MULTIPATH}
        for m in self.modes:
            for lam in self.lambdas:
                out.append(NullingConfig(float(lam), kinds[m]))
        return out

    def times(self) -> list[datetime]:
        return time_grid(parse_timestamp(self.start_utc), self.n_steps, self.step_s)


@dataclass(frozen=True)
class ChannelModels:
    terrestrial: MultipathConfig = MultipathConfig(k_factor_db=3.0)
    satellite: MultipathConfig = MultipathConfig(k_factor_db=20.0)


# -- metrics ----------------------------------------------------------------------

class EmpiricalCdf:
    """Right-continuous empirical CDF with a left-inverse quantile."""

    def __init__(self, samples):
        x = np.sort(np.asarray(list(samples), dtype=float))
        if x.size == 0:
            raise ValueError("empirical CDF needs at least one sample")
        self.x = x

    def __call__(self, value):
        v = np.asarray(value, dtype=float)
        out = np.searchsorted(self.x, v, side="right") / self.x.size
        return float(out) if out.ndim == 0 else out

    def quantile(self, p: float) -> float:
        if not 0.0 <= p <= 1.0:
            raise ValueError("probability outside [0, 1]")
        k = max(int(math.ceil(p * self.x.size)) - 1, 0)
        return float(self.x[k])

    def table(self) -> list[tuple[float, float]]:
        """Distinct sample points with the CDF value reached at each."""
        vals, counts = np.unique(self.x, return_counts=True)
        return list(zip(vals.tolist(), (np.cumsum(counts) / self.x.size).tolist()))


def empirical_cdf(samples) -> EmpiricalCdf:
    return EmpiricalCdf(samples)


def empirical_pdf(samples, bins) -> tuple[np.ndarray, np.ndarray]:
    """Probability mass per bin (sums to one over in-range samples)."""
    counts, edges = np.histogram(np.asarray(samples, dtype=float), bins=bins)
    total = counts.sum()
    return (counts / total if total else counts.astype(float)), edges


@dataclass
class MetricSet:
    inr: list[InrSample] = field(default_factory=list)
    snr_loss: list[SnrLossSample] = field(default_factory=list)
    elevations: list[tuple[str, str, float]] = field(default_factory=list)
    modes: list[str] = field(default_factory=list)

    def inr_values(self, mode: str, el_range: tuple[float, float] | None = None) -> np.ndarray:
        vals = [s.inr_db for s in self.inr if s.mode == mode and _in_bin(s.elevation_deg, el_range)]
        return np.array(vals, dtype=float)

    def rho_values(self, mode: str) -> np.ndarray:
        return np.array([s.rho_t_db for s in self.snr_loss if s.mode == mode], dtype=float)

    def elevation_values(self) -> np.ndarray:
        return np.array([e for _, _, e in self.elevations], dtype=float)

    def cdf(self, mode: str) -> EmpiricalCdf:
        return empirical_cdf(self.inr_values(mode))


def _in_bin(el: float, el_range) -> bool:
    if el_range is None:
        return True
    lo, hi = el_range
    # first bin closed on both ends, later bins open below
    return (lo <= el <= hi) if lo <= ELEVATION_BINS[0][0] else (lo < el <= hi)


# -- the run ----------------------------------------------------------------------

@dataclass(frozen=True)
class _StepResult:
    inr: list
    snr_loss: list
    elevations: list


def _ue_arrival(bs: BaseStation, ue_pos, rng) -> SteeringDirection:
    d = np.asarray(bs.position_m) - np.asarray(ue_pos)
    el, az = vector_to_direction(d)
    ue_heading = rng.uniform(-180.0, 180.0)
    local_az = float(np.mod(az - ue_heading + 180.0, 360.0) - 180.0)
    return SteeringDirection(float(el), local_az, Frame.LOCAL)


class Simulation:
    def __init__(self, sim: SimConfig, dep: Deployment, tracks: Sequence[SatelliteTrack],
                 link: LinkParams = LinkParams(l_a_db=3.0), channels: ChannelModels = ChannelModels(),
                 codebook: CodebookTensor | None = None, pattern: ElementPattern = ElementPattern()):
        if sim.codebook and codebook is None:
            raise ValueError("codebook mode requested without a codebook tensor")
        self.sim = sim
        self.dep = dep
        self.tracks = list(tracks)
        self.link = link
        self.channels = channels
        self.codebook = codebook if sim.codebook else None
        self.pattern = pattern
        self.bs_geom = UraGeometry(sim.bs_rows, sim.bs_cols)
        self.ue_geom = UraGeometry(sim.ue_rows, sim.ue_cols)
        if self.codebook is not None and self.codebook.geom != self.bs_geom:
            raise ValueError("codebook array geometry does not match the BS array")
        self.bs_list = deploy(dep)
        self.configs = sim.nulling_configs()
        self._tables: dict[int, SatChannelTable] = {}

    def table(self, bs: BaseStation) -> SatChannelTable:
        tab = self._tables.get(bs.bs_id)
        if tab is None:
            tab = build_sat_table(bs.orientation, self.channels.satellite, [self.sim.seed, 1, bs.bs_id],
                                  self.bs_geom)
            self._tables[bs.bs_id] = tab
        return tab

    @property
    def mode_labels(self) -> list[str]:
        labels = [c.label for c in self.configs]
        if self.codebook is not None:
            labels.append(CODEBOOK_MODE)
        return labels

    def _active(self, rng):
        assoc = drop_and_associate(self.bs_list, self.sim.ues_per_bs * len(self.bs_list),
                                   rng.integers(2 ** 63), self.dep, self.link.carrier_hz)
        served = sorted(set(assoc.serving_bs.tolist()))
        n_active = max(1, int(round(self.sim.network_load * len(self.bs_list))))
        n_active = min(n_active, len(served))
        chosen = sorted(rng.choice(served, size=n_active, replace=False).tolist())
        out = []
        for bid in chosen:
            ues = np.flatnonzero(assoc.serving_bs == bid)
            out.append((self.bs_list[bid], assoc.ue_positions[rng.choice(ues)]))
        return out

    def step(self, k: int, t: datetime) -> _StepResult:
        rng = np.random.default_rng([self.sim.seed, 2, k])
        stamp = format_timestamp(t)
        visible = visible_satellites(self.tracks, t, self.sim.min_elevation_deg)
        n_pick = min(self.sim.n_sat_per_interval, len(visible))
        picked = sorted(rng.choice(len(visible), size=n_pick, replace=False).tolist()) if n_pick else []
        sats = [visible[i] for i in picked]
        dist = {tr.sat_id: tr.sample_at(t)[2] for tr in self.tracks if tr.sample_at(t) is not None}
        elevations = [(stamp, sid, d.elevation_deg) for sid, d in visible]

        labels = self.mode_labels
        # gains[mode][i] accumulates linear interference power at satellite i over active BSs
        gains = {m: np.zeros(len(sats)) for m in labels}
        snr_loss = []
        for bs, ue_pos in self._active(rng):
            g_bs, rho = self._serve(bs, ue_pos, sats, dist, rng, k)
            for m in labels:
                gains[m] += g_bs[m]
            snr_loss.extend(SnrLossSample(stamp, bs.bs_id, r, m) for m, r in rho)
        inr = []
        for m in labels:
            for i, (sid, d) in enumerate(sats):
                inr.append(InrSample(stamp, sid, inr_db([gains[m][i]], self.link), d.elevation_deg, m))
        return _StepResult(inr, snr_loss, elevations)

    def _serve(self, bs: BaseStation, ue_pos, sats, dist, rng, k):
        tx_dir = SteeringDirection(*_local_direction_to(bs, ue_pos), Frame.LOCAL)
        geo = TerrestrialGeometry(tx_dir, _ue_arrival(bs, ue_pos, rng), self.bs_geom, self.ue_geom)
        h = normalize_terrestrial(synth_terrestrial(self.channels.terrestrial, geo,
                                                    [self.sim.seed, 3, k, bs.bs_id])).taps
        n_taps = h.shape[0]

        local = [global_to_local(d, bs.orientation) for _, d in sats]
        table = self.table(bs)
        mp = [table_lookup(table, d).repointed(loc, self.bs_geom).taps for (_, d), loc in zip(sats, local)]
        mp_per_tap = [[ch[t] for ch in mp] for t in range(n_taps)]
        los = los_interference_matrix(local, self.bs_geom)
        # path gain toward each satellite: element gain over FSPL
        path = np.array([10.0 ** ((element_gain_grid_db(loc.elevation_deg, loc.azimuth_deg, self.pattern)
                                   - fspl_db(dist[sid], self.link.carrier_hz)) / 10.0)
                         for (sid, _), loc in zip(sats, local)])

        def sat_gain(w_per_tap):
            if not sats:
                return np.zeros(0)
            g = np.zeros(len(sats))
            for t in range(n_taps):
                g += np.abs(np.array(mp_per_tap[t]).conj() @ w_per_tap[t]) ** 2
            return path * g / n_taps

        out_gain, rho = {}, []
        base = design_per_tap(h, [[]] * n_taps, NullingConfig())
        base_ue = [abs(np.vdot(p.w_r, h[t] @ p.w_t)) ** 2 for t, p in enumerate(base)]
        for cfg in self.configs:
            if cfg.mode is NullingMode.NO_NULLING:
                pairs = base
            elif cfg.mode is NullingMode.LOS:
                pairs = design_per_tap(h, [los] * n_taps, cfg)
            else:
                pairs = design_per_tap(h, mp_per_tap, cfg)
            out_gain[cfg.label] = sat_gain([p.w_t for p in pairs])
            if cfg.mode is not NullingMode.NO_NULLING:
                ue = [abs(np.vdot(p.w_r, h[t] @ p.w_t)) ** 2 for t, p in enumerate(pairs)]
                rho.append((cfg.label, averaged_snr_loss_db(base_ue, ue)))
        if self.codebook is not None:
            cb_local = [min(max(d.elevation_deg, 0.0), 90.0) for d in local]
            l_star = select_region(cb_local, self.codebook.n_partitions)
            i = nearest_steering_index(self.codebook, tx_dir)
            if l_star == NO_SATELLITE:
                l_star = 0
            w = select_codeword(self.codebook, l_star, i)
            out_gain[CODEBOOK_MODE] = sat_gain([w] * n_taps)
            ue = []
            for t in range(n_taps):
                y = h[t] @ w
                ue.append(float(np.vdot(y, y).real))      # matched-filter receive combining
            rho.append((CODEBOOK_MODE, averaged_snr_loss_db(base_ue, ue)))
        return out_gain, rho

    def run(self) -> MetricSet:
        times = self.sim.times()
        # channel tables are built lazily; build them up front so worker threads only read
        for bs in self.bs_list:
            self.table(bs)
        if self.sim.threads > 1:
            with ThreadPoolExecutor(self.sim.threads) as pool:
                results = list(pool.map(lambda kt: self.step(*kt), enumerate(times)))
        else:
            results = [self.step(k, t) for k, t in enumerate(times)]
        out = MetricSet(modes=self.mode_labels)
        for r in results:
            out.inr.extend(r.inr)
            out.snr_loss.extend(r.snr_loss)
            out.elevations.extend(r.elevations)
        return out


def run(sim: SimConfig, dep: Deployment, tracks: Sequence[SatelliteTrack], link: LinkParams = LinkParams(l_a_db=3.0),
        channels: ChannelModels = ChannelModels(), codebook: CodebookTensor | None = None) -> MetricSet:
    return Simulation(sim, dep, tracks, link, channels, codebook).run()


# -- output -----------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def write_run(metrics: MetricSet, out_dir: str, config: dict, seed: int) -> None:
    os.makedirs(out_dir, exist_ok=True)
    files = {
        "inr.csv": _csv_text(INR_CSV_HEADER, ((s.timestamp, s.sat_id, _fmt(s.elevation_deg), _fmt(s.inr_db), s.mode)
                                              for s in metrics.inr)),
        "snr_loss.csv": _csv_text(SNR_LOSS_CSV_HEADER, ((s.timestamp, s.bs_id, _fmt(s.rho_t_db), s.mode)
                                                        for s in metrics.snr_loss)),
        "elevations.csv": _csv_text(ELEVATION_CSV_HEADER, ((t, sid, _fmt(e)) for t, sid, e in metrics.elevations)),
    }
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            fh.write(text)
    manifest = {
        "version": __version__,
        "seed": seed,
        "config_sha256": config_hash(config),
        "config": config,
        "modes": metrics.modes,
        "active_bs_sampling": "uniform without replacement, resampled every step",
        "files": sorted(files),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def read_run(run_dir: str) -> tuple[MetricSet, dict]:
    path = os.path.join(run_dir, "manifest.json")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no run manifest in {run_dir}")
    with open(path) as fh:
        manifest = json.load(fh)
    m = MetricSet(modes=list(manifest.get("modes", [])))
    with open(os.path.join(run_dir, "inr.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            m.inr.append(InrSample(row["timestamp"], row["sat_id"], float(row["inr_db"]),
                                   float(row["elevation_deg"]), row["mode"]))
    with open(os.path.join(run_dir, "snr_loss.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            m.snr_loss.append(SnrLossSample(row["timestamp"], int(row["bs_id"]), float(row["rho_t_db"]), row["mode"]))
    el_path = os.path.join(run_dir, "elevations.csv")
    if os.path.exists(el_path):
        with open(el_path, newline="") as fh:
            for row in csv.DictReader(fh):
                m.elevations.append((row["timestamp"], row["sat_id"], float(row["elevation_deg"])))
    return m, manifest


def _safe(label: str) -> str:
    return label.replace(":", "_")


def analyze(metrics: MetricSet, out_dir: str, inr_threshold_db: float = -6.0) -> list[str]:
    """CDF tables, summary and elevation-binned INR statistics; returns the written file names."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def emit(name, header, rows):
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            fh.write(_csv_text(header, rows))
        written.append(name)

    summary = []
    binned = []
    for mode in metrics.modes:
        inr = metrics.inr_values(mode)
        if inr.size:
            c = empirical_cdf(inr)
            emit(f"cdf_inr_{_safe(mode)}.csv", ("x", "cdf"), ((_fmt(x), _fmt(p)) for x, p in c.table()))
            summary.append(("inr_db", mode, inr.size, _fmt(c.quantile(0.5)), _fmt(c.quantile(0.95)),
                            _fmt(float(np.mean(inr > inr_threshold_db)))))
        rho = metrics.rho_values(mode)
        if rho.size:
            c = empirical_cdf(rho)
            emit(f"cdf_rho_t_{_safe(mode)}.csv", ("x", "cdf"), ((_fmt(x), _fmt(p)) for x, p in c.table()))
            summary.append(("rho_t_db", mode, rho.size, _fmt(c.quantile(0.5)), _fmt(c.quantile(0.95)), ""))
        for lo, hi in ELEVATION_BINS:
            vals = metrics.inr_values(mode, (lo, hi))
            if vals.size:
                c = empirical_cdf(vals)
                binned.append((mode, f"{lo:g}-{hi:g}", vals.size, _fmt(c.quantile(0.5)), _fmt(c.quantile(0.95)),
                               _fmt(float(np.mean(vals > inr_threshold_db)))))
    emit("summary.csv", ("metric", "mode", "n", "median", "p95", "frac_inr_above_threshold"), summary)
    emit("inr_by_elevation.csv", ("mode", "elevation_bin", "n", "median", "p95", "frac_inr_above_threshold"), binned)
    el = metrics.elevation_values()
    if el.size:
        pdf, edges = empirical_pdf(el, np.arange(25.0, 91.0, 5.0))
        emit("elevation_pdf.csv", ("bin_lo", "bin_hi", "probability"),
             ((_fmt(a), _fmt(b), _fmt(p)) for a, b, p in zip(edges[:-1], edges[1:], pdf)))
    return written
