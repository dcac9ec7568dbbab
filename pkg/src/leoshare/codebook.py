"""Null-steering codebooks.

A codeword for steering direction ``e`` and null region sample set
``{e_p}`` solves

    min_w  sum_p |e_p^H w|^2   s.t.  |sqrt(N_t) - e^H w|^2 <= eps,  ||w|| <= 1.

Writing ``R = sum_p e_p e_p^H``, the optimum has ``e^H w = sqrt(N_t) -
sqrt(eps)`` (the point of the gain-loss disk closest to the origin) and
``w = x (R + nu I)^{-1} e / e^H (R + nu I)^{-1} e`` where ``nu >= 0`` is the
multiplier of the norm constraint.  ``||w(nu)||`` decreases monotonically in
``nu``, so ``nu`` is found by a bracketed scalar root search on that norm.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np
from scipy.optimize import brentq

from .antenna import UraGeometry, steering_matrix
from .geometry import Frame, SteeringDirection

log = logging.getLogger(__name__)

NO_SATELLITE = -1
DEFAULT_AUX_PARTITIONS = 18
AZIMUTH_LIMIT_DEG = 60.0


class InfeasibleCodeword(ValueError):
    pass


def gain_loss_eps(n_elements: int, loss_db: float) -> float:
    """eps such that the worst admissible main-lobe gain is ``loss_db`` below N_t."""
    if loss_db < 0:
        raise ValueError("loss must be non-negative")
    return n_elements * (1.0 - 10.0 ** (-loss_db / 20.0)) ** 2


# -- regions ------------------------------------------------------------------

def band_width_deg(n_partitions: int) -> int:
    if n_partitions < 1:
        raise ValueError("partition count must be positive")
    return math.ceil(90 / n_partitions)


def elevation_band(n_partitions: int, index: int) -> tuple[float, float]:
    """Clipped band [(l - 1/2) w, (l + 1/2) w]; the top index reaches up to 90 degrees."""
    w = band_width_deg(n_partitions)
    if not 0 <= index < n_partitions:
        raise ValueError(f"index {index} outside [0, {n_partitions})")
    lo = max(0.0, (index - 0.5) * w)
    hi = min(90.0, (index + 0.5) * w)
    if index == n_partitions - 1:
        hi = 90.0
    if lo > hi:
        raise ValueError(f"band {index} of {n_partitions} is empty after clipping")
    return lo, hi


def band_is_valid(n_partitions: int, index: int) -> bool:
    try:
        elevation_band(n_partitions, index)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class SamplingGrid:
    elevation_step_deg: float = 2.0
    azimuth_step_deg: float = 5.0

    def __post_init__(self):
        if self.elevation_step_deg <= 0 or self.azimuth_step_deg <= 0:
            raise ValueError("grid spacing must be positive")

    def points(self, el_lo: float, el_hi: float, az_lo: float = -AZIMUTH_LIMIT_DEG,
               az_hi: float = AZIMUTH_LIMIT_DEG) -> np.ndarray:
        """(n, 2) array of (elevation, azimuth); both box edges are always included."""
        els = _inclusive_range(el_lo, el_hi, self.elevation_step_deg)
        azs = _inclusive_range(az_lo, az_hi, self.azimuth_step_deg)
        grid = np.array([(e, a) for e in els for a in azs], dtype=float)
        return grid


def _inclusive_range(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / step + 1e-9))
    vals = lo + step * np.arange(n + 1)
    if hi - vals[-1] > 1e-9:
        vals = np.append(vals, hi)
    return vals


@dataclass(frozen=True)
class TargetNullRegion:
    n_partitions: int
    index: int
    azimuth_limit_deg: float = AZIMUTH_LIMIT_DEG

    def __post_init__(self):
        elevation_band(self.n_partitions, self.index)

    @property
    def width_deg(self) -> int:
        return band_width_deg(self.n_partitions)

    @property
    def elevation_bounds(self) -> tuple[float, float]:
        return elevation_band(self.n_partitions, self.index)

    def sample_points(self, grid: SamplingGrid = SamplingGrid()) -> np.ndarray:
        lo, hi = self.elevation_bounds
        return grid.points(lo, hi, -self.azimuth_limit_deg, self.azimuth_limit_deg)


@dataclass(frozen=True)
class AuxiliaryRegion(TargetNullRegion):
    """Extra null band from a finer partition of the same space (M > N)."""

    target_partitions: int = 0

    def __post_init__(self):
        super().__post_init__()
        if self.n_partitions <= self.target_partitions:
            raise ValueError("auxiliary partition count must exceed the target's")


def up_space_points(grid: SamplingGrid = SamplingGrid(), azimuth_limit_deg: float = AZIMUTH_LIMIT_DEG) -> np.ndarray:
    return grid.points(0.0, 90.0, -azimuth_limit_deg, azimuth_limit_deg)


def _dedup(points: np.ndarray) -> np.ndarray:
    rounded = np.round(points, 9)
    _, idx = np.unique(rounded, axis=0, return_index=True)
    return points[np.sort(idx)]


# -- solver -------------------------------------------------------------------

@dataclass(frozen=True)
class Codeword:
    w: np.ndarray
    steer_dir: SteeringDirection
    gain_loss: float
    max_sidelobe_up: float
    objective: float = 0.0
    max_region_gain: float = 0.0
    k_star: int | None = None

    def __post_init__(self):
        if np.linalg.norm(self.w) > 1.0 + 1e-9:
            raise ValueError("codeword norm exceeds one")

    @property
    def max_entry_magnitude(self) -> float:
        return float(np.max(np.abs(self.w)))


def _as_angles(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return points.reshape(-1, 2).astype(float)
    return np.array([(p.elevation_deg, p.azimuth_deg) for p in points], dtype=float).reshape(-1, 2)


def solve_null_steering(a: np.ndarray, e_region: np.ndarray, eps: float) -> np.ndarray:
    """Exact minimizer of w^H R w under the gain-loss and unit-ball constraints.

    ``a`` is the steering vector, ``e_region`` the (n, N_t) stack of region
    steering vectors.
    """
    if eps < 0:
        raise InfeasibleCodeword(f"gain-loss budget must be non-negative, got {eps}")
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    x = max(0.0, math.sqrt(n) - math.sqrt(eps))
    if x == 0.0:
        return np.zeros(n, dtype=complex)
    if e_region.shape[0] == 0:
        return a / math.sqrt(n)

    r_mat = e_region.T @ e_region.conj()
    r, u = np.linalg.eigh(0.5 * (r_mat + r_mat.conj().T))
    r = np.clip(r, 0.0, None)
    alpha = u.conj().T @ a
    p = np.abs(alpha) ** 2
    r_max = float(r.max())
    null = r <= 1e-12 * max(r_max, 1.0)

    def w_of(nu):
        coef = alpha / (r + nu)
        s = float(np.sum(p / (r + nu)))
        return x * (u @ coef) / s

    def norm_of(nu):
        q = p / (r + nu)
        return x * math.sqrt(float(np.sum(q / (r + nu)))) / float(np.sum(q))

    # nu -> 0 limit: all weight on the null space of R when a has a component there
    p_null = float(p[null].sum())
    if p_null > 1e-24 * n:
        w0 = x * (u[:, null] @ alpha[null]) / p_null
    elif not null.any():
        w0 = w_of(0.0)
    else:
        w0 = None
    if w0 is not None and np.linalg.norm(w0) <= 1.0:
        return w0

    lo = 1e-14 * max(r_max, 1.0)
    hi = max(r_max, 1.0)
    while norm_of(hi) > 1.0:
        hi *= 4.0
    if norm_of(lo) <= 1.0:
        w = w_of(lo)
    else:
        t = brentq(lambda s: norm_of(math.exp(s)) - 1.0, math.log(lo), math.log(hi),
                   xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
        w = w_of(math.exp(t))
    norm = np.linalg.norm(w)
    return w / norm if norm > 1.0 else w


def _codeword(w, steer_dir, a, e_region, e_up, k_star=None) -> Codeword:
    n = a.shape[0]
    region_gains = np.abs(e_region.conj() @ w) ** 2 if e_region.shape[0] else np.zeros(0)
    up_gains = np.abs(e_up.conj() @ w) ** 2
    return Codeword(
        w=w,
        steer_dir=steer_dir,
        gain_loss=float(abs(math.sqrt(n) - np.vdot(a, w)) ** 2),
        max_sidelobe_up=float(up_gains.max()),
        objective=float(region_gains.sum()),
        max_region_gain=float(region_gains.max()) if region_gains.size else 0.0,
        k_star=k_star,
    )


def design_codeword(steer_dir: SteeringDirection, region_points, eps: float,
                    geom: UraGeometry, grid: SamplingGrid = SamplingGrid()) -> Codeword:
    """Codeword steering at ``steer_dir`` with nulls on ``region_points``.

    ``region_points`` is a sequence of :class:`SteeringDirection` or an
    (n, 2) array of (elevation, azimuth) in degrees.
    """
    pts = _as_angles(region_points)
    a = steering_matrix(steer_dir.elevation_deg, steer_dir.azimuth_deg, geom)[0]
    e_region = steering_matrix(pts[:, 0], pts[:, 1], geom) if len(pts) else np.zeros((0, a.size), complex)
    w = solve_null_steering(a, e_region, eps)
    up = up_space_points(grid)
    e_up = steering_matrix(up[:, 0], up[:, 1], geom)
    return _codeword(w, steer_dir, a, e_region, e_up)


def search_auxiliary(steer_dir: SteeringDirection, target: TargetNullRegion, m_partitions: int,
                     eps: float, geom: UraGeometry, grid: SamplingGrid = SamplingGrid()):
    """Exhaustive search of the auxiliary band minimizing the worst up-space sidelobe.

    Returns ``(k_star, codeword)``.  ``k_star`` is None when no auxiliary
    band beats the target-only codeword.
    """
    if m_partitions <= target.n_partitions:
        raise ValueError("auxiliary partition count must exceed the target's")
    a = steering_matrix(steer_dir.elevation_deg, steer_dir.azimuth_deg, geom)[0]
    up = up_space_points(grid, target.azimuth_limit_deg)
    e_up = steering_matrix(up[:, 0], up[:, 1], geom)
    base_pts = target.sample_points(grid)
    e_base = steering_matrix(base_pts[:, 0], base_pts[:, 1], geom)
    best = _codeword(solve_null_steering(a, e_base, eps), steer_dir, a, e_base, e_up)
    best_k = None
    for k in range(m_partitions):
        if not band_is_valid(m_partitions, k):
            continue
        aux = AuxiliaryRegion(m_partitions, k, target.azimuth_limit_deg, target.n_partitions)
        pts = _dedup(np.vstack([base_pts, aux.sample_points(grid)]))
        e_reg = steering_matrix(pts[:, 0], pts[:, 1], geom)
        w = solve_null_steering(a, e_reg, eps)
        sidelobe = float(np.max(np.abs(e_up.conj() @ w) ** 2))
        if sidelobe < best.max_sidelobe_up:
            # report target-region metrics so codewords stay comparable
            best = _codeword(w, steer_dir, a, e_base, e_up, k_star=k)
            best_k = k
    return best_k, best


# -- codebooks ----------------------------------------------------------------

@dataclass(frozen=True)
class SteeringGrid:
    """Serving-space steering directions; column order is elevation-major."""

    el_start_deg: float = 0.0
    el_stop_deg: float = -90.0
    el_step_deg: float = 15.0
    az_start_deg: float = -60.0
    az_stop_deg: float = 60.0
    az_step_deg: float = 15.0

    @classmethod
    def fine(cls) -> "SteeringGrid":
        return cls(-5.0, -85.0, 10.0, -60.0, 60.0, 10.0)

    def directions(self) -> list[SteeringDirection]:
        els = -_inclusive_range(-self.el_start_deg, -self.el_stop_deg, self.el_step_deg)
        azs = _inclusive_range(self.az_start_deg, self.az_stop_deg, self.az_step_deg)
        return [SteeringDirection(float(e) + 0.0, float(a), Frame.LOCAL) for e in els for a in azs]

    @property
    def size(self) -> int:
        return len(self.directions())


def build_codebook(region: TargetNullRegion, steering: SteeringGrid, eps: float, geom: UraGeometry,
                   grid: SamplingGrid = SamplingGrid(), aux_partitions: int | None = None,
                   threads: int = 1) -> list[Codeword]:
    """One codeword per steering direction, in the steering grid's column order."""
    dirs = steering.directions()

    def one(d):
        try:
            if aux_partitions:
                return search_auxiliary(d, region, aux_partitions, eps, geom, grid)[1]
            return design_codeword(d, region.sample_points(grid), eps, geom, grid)
        except InfeasibleCodeword as exc:
            raise InfeasibleCodeword(f"direction ({d.elevation_deg}, {d.azimuth_deg}): {exc}") from exc

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, dirs))
    return [one(d) for d in dirs]


@dataclass(frozen=True)
class CodebookTensor:
    """Stacked codebooks: ``weights[l, :, i]`` is codeword i of region l."""

    n_partitions: int
    weights: np.ndarray                      # (N, N_t, L)
    steering: SteeringGrid
    eps: float
    geom: UraGeometry
    aux_partitions: int | None = None
    grid: SamplingGrid = SamplingGrid()
    meta: dict = field(default_factory=dict)  # (l, i) -> dict of per-column metrics

    @property
    def n_columns(self) -> int:
        return self.weights.shape[2]


def build_codebook_tensor(n_partitions: int, steering: SteeringGrid, eps: float, geom: UraGeometry,
                          grid: SamplingGrid = SamplingGrid(), aux_partitions: int | None = None,
                          threads: int = 1) -> CodebookTensor:
    dirs = steering.directions()
    weights = np.zeros((n_partitions, geom.n_elements, len(dirs)), dtype=complex)
    meta = {}
    for l in range(n_partitions):
        region = TargetNullRegion(n_partitions, l)
        cws = build_codebook(region, steering, eps, geom, grid, aux_partitions, threads)
        for i, cw in enumerate(cws):
            weights[l, :, i] = cw.w
            meta[(l, i)] = {"gain_loss": cw.gain_loss, "max_region_gain": cw.max_region_gain,
                            "max_sidelobe_up": cw.max_sidelobe_up,
                            "k_star": NO_SATELLITE if cw.k_star is None else cw.k_star}
        log.debug("region %d/%d done", l + 1, n_partitions)
    return CodebookTensor(n_partitions, weights, steering, eps, geom, aux_partitions, grid, meta)


def select_region(elevations_deg: Iterable[float], n_partitions: int) -> int:
    """Most populated elevation band; ties go to the lowest index.

    Boundary angles belong to the lower band.  Returns ``NO_SATELLITE`` for
    an empty input.
    """
    w = band_width_deg(n_partitions)
    counts = [0] * n_partitions
    seen = False
    for theta in elevations_deg:
        if theta is None or math.isnan(theta):
            continue
        seen = True
        l = math.ceil(Fraction(float(theta)) / w - Fraction(1, 2))
        counts[min(max(l, 0), n_partitions - 1)] += 1
    if not seen:
        return NO_SATELLITE
    return counts.index(max(counts))


def select_codeword(tensor: CodebookTensor, l_star: int, steer_index: int) -> np.ndarray:
    if not 0 <= l_star < tensor.n_partitions:
        raise IndexError(f"region index {l_star} out of range")
    if not 0 <= steer_index < tensor.n_columns:
        raise IndexError(f"steering index {steer_index} out of range")
    return tensor.weights[l_star, :, steer_index]


def nearest_steering_index(tensor: CodebookTensor, direction: SteeringDirection) -> int:
    """Column whose steering direction is angularly closest to ``direction`` (first on ties)."""
    dirs = tensor.steering.directions()
    el = np.radians([d.elevation_deg for d in dirs])
    az = np.radians([d.azimuth_deg for d in dirs])
    e0, a0 = math.radians(direction.elevation_deg), math.radians(direction.azimuth_deg)
    cosang = np.sin(el) * math.sin(e0) + np.cos(el) * math.cos(e0) * np.cos(az - a0)
    return int(np.argmax(cosang))


# -- text format --------------------------------------------------------------
#
#   codebook-tensor v1
#   N <N> M <M|none> n_t <N_t> rows <r> cols <c> spacing <d> L <L>
#   steering <el_start> <el_stop> <el_step> <az_start> <az_stop> <az_step>
#   sampling <el_step> <az_step>
#   eps <eps>
#   cw <l> <i> <gain_loss> <max_region_gain> <max_sidelobe_up> <k_star>
#   w <re> <im> ...

_HEADER = "codebook-tensor v1"


def _g(x) -> str:
    return format(float(x), ".17g")


def tensor_to_text(t: CodebookTensor) -> str:
    s = t.steering
    lines = [
        _HEADER,
        f"N {t.n_partitions} M {t.aux_partitions if t.aux_partitions else 'none'} n_t {t.geom.n_elements} "
        f"rows {t.geom.rows} cols {t.geom.cols} spacing {_g(t.geom.spacing_wavelengths)} L {t.n_columns}",
        "steering " + " ".join(_g(v) for v in (s.el_start_deg, s.el_stop_deg, s.el_step_deg,
                                                s.az_start_deg, s.az_stop_deg, s.az_step_deg)),
        f"sampling {_g(t.grid.elevation_step_deg)} {_g(t.grid.azimuth_step_deg)}",
        f"eps {_g(t.eps)}",
    ]
    for l in range(t.n_partitions):
        for i in range(t.n_columns):
            m = t.meta.get((l, i), {})
            lines.append(f"cw {l} {i} {_g(m.get('gain_loss', math.nan))} "
                         f"{_g(m.get('max_region_gain', math.nan))} {_g(m.get('max_sidelobe_up', math.nan))} "
                         f"{int(m.get('k_star', NO_SATELLITE))}")
            col = t.weights[l, :, i]
            lines.append("w " + " ".join(f"{_g(z.real)} {_g(z.imag)}" for z in col))
    return "\n".join(lines) + "\n"


def tensor_from_text(text: str) -> CodebookTensor:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _HEADER:
        raise ValueError("not a codebook-tensor v1 document")
    try:
        hdr = lines[1].split()
        kv = dict(zip(hdr[0::2], hdr[1::2]))
        n_part = int(kv["N"])
        aux = None if kv["M"] == "none" else int(kv["M"])
        geom = UraGeometry(int(kv["rows"]), int(kv["cols"]), float(kv["spacing"]))
        n_cols = int(kv["L"])
        steering = SteeringGrid(*(float(v) for v in lines[2].split()[1:]))
        grid = SamplingGrid(*(float(v) for v in lines[3].split()[1:]))
        eps = float(lines[4].split()[1])
    except (IndexError, KeyError, ValueError) as exc:
        raise ValueError(f"malformed codebook header: {exc}") from exc
    if int(kv["n_t"]) != geom.n_elements:
        raise ValueError("n_t does not match array geometry")
    weights = np.zeros((n_part, geom.n_elements, n_cols), dtype=complex)
    meta = {}
    body = lines[5:]
    if len(body) != 2 * n_part * n_cols:
        raise ValueError(f"expected {2 * n_part * n_cols} codeword lines, found {len(body)}")
    for j in range(0, len(body), 2):
        head = body[j].split()
        if head[0] != "cw":
            raise ValueError(f"line {j + 6}: expected a cw record")
        l, i = int(head[1]), int(head[2])
        meta[(l, i)] = {"gain_loss": float(head[3]), "max_region_gain": float(head[4]),
                        "max_sidelobe_up": float(head[5]), "k_star": int(head[6])}
        vals = np.array([float(v) for v in body[j + 1].split()[1:]])
        if vals.size != 2 * geom.n_elements:
            raise ValueError(f"line {j + 7}: wrong number of weights")
        weights[l, :, i] = vals[0::2] + 1j * vals[1::2]
    return CodebookTensor(n_part, weights, steering, eps, geom, aux, grid, meta)
