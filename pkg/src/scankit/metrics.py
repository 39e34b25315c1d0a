"""Scanpath similarity metrics and evaluation protocols.

Ten complementary measures are provided: string alignment after spatial
quantization (LEV, SMT), set and curve distances (HAU, FRE), time-series
alignment (DTW, TDE), and cross-recurrence quantification (REC, DET, LAM,
CORM). All spatial comparisons use the great-circle distance, and every
metric accepts scanpaths of differing lengths.

Protocols: ``pairwise_eval`` averages a metric over the full cross
product of a generated set against a ground-truth set; ``human_baseline``
averages each ground-truth member against all the others; and
``random_baseline`` draws gaze points uniformly over the equirectangular
rectangle (uniform in lat x lon, not uniform on the sphere).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .sphere import (
    GazePoint,
    Scanpath,
    ScanpathSet,
    latlon_to_unit,
    spherical_distance,
    wrap_lon,
)
from .timewarp import cost_matrix_spherical, dtw_hard

METRIC_COLUMNS = ("LEV", "SMT", "HAU", "FRE", "DTW", "TDE", "REC", "DET", "LAM", "CORM")


@dataclass(frozen=True)
class QuantizationGrid:
    """Equal-angle lat/lon bins used to turn scanpaths into symbol strings.

    Defaults to 20-degree bins (9 x 18). Bin 0 is the north-west corner;
    bins follow the package-wide equirectangular convention.
    """

    n_lat: int = 9
    n_lon: int = 18

    def __post_init__(self):
        if self.n_lat < 1 or self.n_lon < 1:
            raise ValueError("QuantizationGrid: bin counts must be positive")

    @property
    def n_bins(self) -> int:
        return self.n_lat * self.n_lon

    def bin_index(self, lat, lon) -> np.ndarray:
        lat = np.asarray(lat, dtype=float)
        lon = wrap_lon(lon)
        row = np.clip(np.floor((np.pi / 2 - lat) / np.pi * self.n_lat), 0, self.n_lat - 1)
        col = np.clip(np.floor((lon + np.pi) / (2 * np.pi) * self.n_lon), 0, self.n_lon - 1)
        return (row * self.n_lon + col).astype(int)

    def bin_center_unit(self, symbol) -> np.ndarray:
        """Unit vector(s) at the center of the given bin(s)."""
        symbol = np.asarray(symbol)
        row = symbol // self.n_lon
        col = symbol % self.n_lon
        lat = np.pi / 2 - (row + 0.5) / self.n_lat * np.pi
        lon = (col + 0.5) / self.n_lon * 2 * np.pi - np.pi
        return latlon_to_unit(GazePoint(lat, lon))


@dataclass(frozen=True)
class RecurrenceConfig:
    """Matching radius (radians) and minimum line length for recurrence."""

    radius: float = 0.25
    min_line: int = 2

    def __post_init__(self):
        if not 0 < self.radius < np.pi:
            raise ValueError("RecurrenceConfig: radius must lie in (0, pi)")
        if self.min_line < 2:
            raise ValueError("RecurrenceConfig: min_line must be >= 2")


class RecurrenceMeasures(NamedTuple):
    rec: float
    det: float
    lam: float
    corm: float


def quantize(sp: Scanpath, grid: QuantizationGrid = QuantizationGrid()) -> np.ndarray:
    """Symbol string for a scanpath: one bin index per gaze point."""
    lat, lon = sp.latlon()
    return grid.bin_index(lat, lon)


def levenshtein(a: Scanpath, b: Scanpath, grid: QuantizationGrid = QuantizationGrid()) -> int:
    """Unit-cost edit distance between the quantized scanpaths."""
    sa = quantize(a, grid)
    sb = quantize(b, grid)
    n, m = len(sa), len(sb)
    prev = np.arange(m + 1)
    for i in range(1, n + 1):
        cur = np.empty(m + 1, dtype=int)
        cur[0] = i
        for j in range(1, m + 1):
            sub = prev[j - 1] + (sa[i - 1] != sb[j - 1])
            cur[j] = min(sub, prev[j] + 1, cur[j - 1] + 1)
        prev = cur
    return int(prev[m])


def scanmatch(
    a: Scanpath,
    b: Scanpath,
    grid: QuantizationGrid = QuantizationGrid(),
    gap_penalty: float = 0.0,
    score_fn: Callable[[int, int], float] | None = None,
    max_score: float = 1.0,
) -> float:
    """Normalized global-alignment similarity in [0, 1].

    Needleman-Wunsch with a substitution score over bin pairs; by default
    the score decays linearly with the great-circle distance between bin
    centers (identical bins score ``max_score``). The optimal alignment
    score is divided by max_score * max(len(a), len(b)).
    """
    sa = quantize(a, grid)
    sb = quantize(b, grid)
    if score_fn is None:
        centers = grid.bin_center_unit(np.arange(grid.n_bins))
        table = max_score * (1.0 - cost_matrix_spherical(centers, centers) / np.pi)
        score_fn = lambda x, y: table[x, y]
    n, m = len(sa), len(sb)
    s = np.zeros((n + 1, m + 1))
    s[1:, 0] = gap_penalty * np.arange(1, n + 1)
    s[0, 1:] = gap_penalty * np.arange(1, m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            s[i, j] = max(
                s[i - 1, j - 1] + score_fn(sa[i - 1], sb[j - 1]),
                s[i - 1, j] + gap_penalty,
                s[i, j - 1] + gap_penalty,
            )
    return float(s[n, m] / (max_score * max(n, m)))


def hausdorff(a: Scanpath, b: Scanpath) -> float:
    """Symmetric Hausdorff distance between the two gaze-point sets."""
    d = cost_matrix_spherical(a, b)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def frechet(a: Scanpath, b: Scanpath) -> float:
    """Discrete Frechet distance; respects point ordering, >= hausdorff."""
    d = cost_matrix_spherical(a, b)
    n, m = d.shape
    f = np.empty((n, m))
    f[0, 0] = d[0, 0]
    for i in range(1, n):
        f[i, 0] = max(f[i - 1, 0], d[i, 0])
    for j in range(1, m):
        f[0, j] = max(f[0, j - 1], d[0, j])
    for i in range(1, n):
        for j in range(1, m):
            f[i, j] = max(min(f[i - 1, j], f[i, j - 1], f[i - 1, j - 1]), d[i, j])
    return float(f[n - 1, m - 1])


def dtw_metric(a: Scanpath, b: Scanpath) -> float:
    """Hard DTW under the great-circle ground distance."""
    return dtw_hard(cost_matrix_spherical(a, b))[0]


def tde(a: Scanpath, b: Scanpath, k: int = 3, stride: int = 1) -> float:
    """Time-delay embedding distance.

    Mean, over the length-k windows of ``a`` taken at the given stride, of
    the minimum Hausdorff distance to any length-k window of ``b``. Note
    the asymmetry: windows are slid over ``a``.
    """
    pa, pb = a.points, b.points
    if k < 1 or k > min(len(pa), len(pb)):
        raise ValueError("tde: k must satisfy 1 <= k <= min length")
    if stride < 1:
        raise ValueError("tde: stride must be >= 1")
    starts_a = range(0, len(pa) - k + 1, stride)
    starts_b = range(0, len(pb) - k + 1)
    best = []
    for ia in starts_a:
        wa = Scanpath(pa[ia : ia + k])
        best.append(min(hausdorff(wa, Scanpath(pb[ib : ib + k])) for ib in starts_b))
    return float(np.mean(best))


def _resample_nearest(points: np.ndarray, n: int) -> np.ndarray:
    if len(points) == n:
        return points
    if n == 1:
        return points[:1]
    idx = np.rint(np.arange(n) * (len(points) - 1) / (n - 1)).astype(int)
    return points[idx]


def _line_cells(mask_1d: np.ndarray, min_line: int) -> np.ndarray:
    """Boolean mask of positions lying on a run of length >= min_line."""
    out = np.zeros(len(mask_1d), dtype=bool)
    run = 0
    for i, v in enumerate(mask_1d):
        run = run + 1 if v else 0
        if run == min_line:
            out[i - min_line + 1 : i + 1] = True
        elif run > min_line:
            out[i] = True
    return out


def cross_recurrence(
    a: Scanpath, b: Scanpath, cfg: RecurrenceConfig = RecurrenceConfig()
) -> RecurrenceMeasures:
    """Cross-recurrence quantification of two scanpaths.

    Builds the binary matrix r_ij = [dist(a_i, b_j) <= radius] (after
    nearest-index resampling of the shorter path to the longer) and
    reports, all as percentages:

    - REC: recurrent cells relative to N^2;
    - DET: fraction of recurrent cells on diagonal lines of length
      >= min_line;
    - LAM: fraction on horizontal or vertical lines of length >= min_line;
    - CORM: center of recurrence mass, sum (j - i) r_ij / ((N-1) C).

    All four are 0 when there are no recurrent cells.
    """
    n = max(len(a), len(b))
    pa = _resample_nearest(a.points, n)
    pb = _resample_nearest(b.points, n)
    r = spherical_distance(pa[:, np.newaxis, :], pb[np.newaxis, :, :]) <= cfg.radius
    c = int(r.sum())
    if c == 0:
        return RecurrenceMeasures(0.0, 0.0, 0.0, 0.0)

    diag_cells = np.zeros_like(r)
    for k in range(-(n - 1), n):
        idx = np.arange(max(0, -k), min(n, n - k))
        line = _line_cells(r[idx, idx + k], cfg.min_line)
        diag_cells[idx, idx + k] = line
    hv_cells = np.zeros_like(r)
    for i in range(n):
        hv_cells[i, :] |= _line_cells(r[i, :], cfg.min_line)
    for j in range(n):
        hv_cells[:, j] |= _line_cells(r[:, j], cfg.min_line)

    i_idx, j_idx = np.nonzero(r)
    rec = 100.0 * c / n**2
    det = 100.0 * diag_cells.sum() / c
    lam = 100.0 * hv_cells.sum() / c
    corm = 100.0 * np.sum(j_idx - i_idx) / ((n - 1) * c) if n > 1 else 0.0
    return RecurrenceMeasures(float(rec), float(det), float(lam), float(corm))


def pairwise_eval(gen: ScanpathSet, gt: ScanpathSet, metric: Callable) -> float:
    """Mean metric value over the full |gen| x |gt| cross product."""
    values = [metric(g, t) for g in gen for t in gt]
    return float(np.mean(values))


def human_baseline(gt: ScanpathSet, metric: Callable) -> float:
    """Mean metric value over all ordered pairs of distinct members."""
    if len(gt) < 2:
        raise ValueError("human_baseline: at least two scanpaths required")
    values = [metric(gt[i], gt[j]) for i in range(len(gt)) for j in range(len(gt)) if i != j]
    return float(np.mean(values))


def random_baseline(
    T: int, n: int, seed: int, sample_rate_hz: float = 1.0, image_id: str = "random"
) -> ScanpathSet:
    """Scanpaths with points uniform over the equirectangular rectangle."""
    if n < 1:
        raise ValueError("random_baseline: n must be >= 1")
    if T < 1:
        raise ValueError("random_baseline: T must be >= 1")
    rng = np.random.default_rng(seed)
    sps = []
    for _ in range(n):
        lat = rng.uniform(-np.pi / 2, np.pi / 2, T)
        lon = rng.uniform(-np.pi, np.pi, T)
        sps.append(Scanpath.from_latlon(lat, lon, sample_rate_hz))
    return ScanpathSet(tuple(sps), image_id)


@dataclass(frozen=True)
class MetricReport:
    """Mean metric values for one image plus the configuration that
    produced them; values keep the canonical column order."""

    image_id: str
    values: dict
    config: dict

    def to_json_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "metrics": {k: self.values[k] for k in METRIC_COLUMNS},
            "config": self.config,
        }

    def to_text(self) -> str:
        lines = [f"image_id={self.image_id}"]
        lines += [f"{k}={self.values[k]:.6g}" for k in METRIC_COLUMNS]
        lines += [f"config.{k}={v}" for k, v in sorted(self.config.items())]
        return "\n".join(lines) + "\n"


def compute_report(
    gen: ScanpathSet,
    gt: ScanpathSet,
    grid: QuantizationGrid = QuantizationGrid(),
    rec_cfg: RecurrenceConfig = RecurrenceConfig(),
    tde_k: int = 3,
    tde_stride: int = 1,
    gap_penalty: float = 0.0,
    protocol: str = "pairwise",
) -> MetricReport:
    """Evaluate the full metric suite.

    ``protocol`` is "pairwise" (each of ``gen`` against each of ``gt``) or
    "human" (each of ``gt`` against the others; ``gen`` is ignored).
    """
    if protocol == "pairwise":
        pairs = [(g, t) for g in gen for t in gt]
    elif protocol == "human":
        if len(gt) < 2:
            raise ValueError("human protocol: at least two ground-truth scanpaths required")
        pairs = [(gt[i], gt[j]) for i in range(len(gt)) for j in range(len(gt)) if i != j]
    else:
        raise ValueError(f"unknown protocol: {protocol!r}")

    sums = dict.fromkeys(METRIC_COLUMNS, 0.0)
    for a, b in pairs:
        sums["LEV"] += levenshtein(a, b, grid)
        sums["SMT"] += scanmatch(a, b, grid, gap_penalty)
        sums["HAU"] += hausdorff(a, b)
        sums["FRE"] += frechet(a, b)
        sums["DTW"] += dtw_metric(a, b)
        sums["TDE"] += tde(a, b, tde_k, tde_stride)
        rec = cross_recurrence(a, b, rec_cfg)
        sums["REC"] += rec.rec
        sums["DET"] += rec.det
        sums["LAM"] += rec.lam
        sums["CORM"] += rec.corm
    values = {k: sums[k] / len(pairs) for k in METRIC_COLUMNS}
    config = {
        "protocol": protocol,
        "grid_n_lat": grid.n_lat,
        "grid_n_lon": grid.n_lon,
        "recurrence_radius_rad": rec_cfg.radius,
        "recurrence_min_line": rec_cfg.min_line,
        "tde_k": tde_k,
        "tde_stride": tde_stride,
        "scanmatch_gap_penalty": gap_penalty,
        "n_gen": len(gen) if protocol == "pairwise" else 0,
        "n_gt": len(gt),
    }
    return MetricReport(gt.image_id or gen.image_id, values, config)
