"""Gaze-behavior analyses over sets of scanpaths.

Aggregate maps accumulate gaze points of many observers into a
pseudo-saliency heatmap on the equirectangular grid. Per-timestamp
density maps use a von Mises-Fisher kernel, the rotationally symmetric
analogue of an isotropic Gaussian on the sphere, which avoids the
distortion artifacts a pixel-space kernel would introduce near the
poles. On top of these sit the exploration-time curve, the starting-
region partition, and the inter-observer congruency ROC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sphere import (
    Scanpath,
    ScanpathSet,
    equirect_pixel_to_latlon,
    latlon_to_equirect_pixel,
    latlon_to_unit,
    spherical_distance,
    wrap_lon,
)


def pixel_solid_angles(H: int, W: int) -> np.ndarray:
    """Solid angle of each pixel, shape (H, W); sums to 4*pi."""
    rows = np.arange(H)
    lat = np.pi / 2 - (rows + 0.5) / H * np.pi
    w = np.cos(lat) * (np.pi / H) * (2 * np.pi / W)
    return np.repeat(w[:, np.newaxis], W, axis=1)


def pixel_grid_units(H: int, W: int) -> np.ndarray:
    """Unit vectors at all pixel centers, shape (H, W, 3)."""
    rows, cols = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")
    return latlon_to_unit(equirect_pixel_to_latlon(rows, cols, H, W))


@dataclass(frozen=True)
class DensityMap:
    """Per-pixel probability density for one timestamp (per steradian)."""

    values: np.ndarray
    kappa: float

    def sphere_integral(self) -> float:
        H, W = self.values.shape
        return float(np.sum(self.values * pixel_solid_angles(H, W)))


@dataclass(frozen=True)
class ExplorationCurve:
    """Mean first-passage time to longitudinal offsets from the start.

    ``mean_time_s[i]`` averages only over scanpaths that ever reach
    ``offsets_deg[i]``; ``coverage[i]`` is the fraction that do.
    """

    offsets_deg: np.ndarray
    mean_time_s: np.ndarray
    coverage: np.ndarray


@dataclass(frozen=True)
class RocCurve:
    """Inter-observer congruency: hit rate vs top-n% salient area."""

    ladder_pct: np.ndarray
    mean_hit_rate_pct: np.ndarray
    per_scanpath_pct: np.ndarray  # (n_scanpaths, len(ladder))


def _gauss_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(np.ceil(4.0 * sigma)))
    x = np.arange(-radius, radius + 1)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _blur_lonwrap(counts: np.ndarray, sigma_col: float, sigma_row: float) -> np.ndarray:
    """Separable Gaussian blur, wrapping in longitude and reflecting at the
    poles. Written as explicit gathers so a column roll of the input yields
    a bit-exact column roll of the output."""
    H, W = counts.shape
    k = _gauss_kernel(sigma_col)
    r = len(k) // 2
    cols = np.mod(np.arange(W)[:, np.newaxis] - r + np.arange(len(k)), W)
    counts = counts[:, cols] @ k
    k = _gauss_kernel(sigma_row)
    r = len(k) // 2
    rows = np.mod(np.arange(H)[:, np.newaxis] - r + np.arange(len(k)), 2 * H)
    rows = np.where(rows < H, rows, 2 * H - 1 - rows)
    return np.einsum("rkw,k->rw", counts[rows, :], k)


def aggregate_map(sps: ScanpathSet, H: int, W: int, blur_sigma_deg: float = 0.0) -> np.ndarray:
    """Time-aggregated gaze heatmap, normalized to sum to 1.

    Every gaze point is splatted onto its nearest pixel; the counts are
    then blurred with a Gaussian that wraps in longitude (and reflects at
    the poles) before normalization.
    """
    counts = np.zeros((H, W))
    for sp in sps:
        r, c = latlon_to_equirect_pixel(sp.latlon(), H, W)
        np.add.at(counts, (np.atleast_1d(r), np.atleast_1d(c)), 1.0)
    if blur_sigma_deg > 0:
        counts = _blur_lonwrap(counts, blur_sigma_deg / 360.0 * W, blur_sigma_deg / 180.0 * H)
    total = math.fsum(counts.reshape(-1))
    if total == 0:
        raise ValueError("aggregate_map: no gaze points landed on the grid")
    return counts / total


def vmf_log_density(units: np.ndarray, center: np.ndarray, kappa: float) -> np.ndarray:
    """Log of the vMF density on S^2 at ``units``, stable for large kappa."""
    dots = units @ center
    # log C_3(kappa) = log kappa - log(2 pi (1 - e^(-2 kappa))) - kappa,
    # folded with the exponent so only kappa * (dot - 1) <= 0 appears.
    log_c = np.log(kappa) - np.log(2 * np.pi) - np.log1p(-np.exp(-2.0 * kappa))
    return log_c + kappa * (dots - 1.0)


def sample_vmf(center: np.ndarray, kappa: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n unit vectors from vMF(center, kappa) by inverse-CDF in the
    polar angle plus a uniform azimuth."""
    center = np.asarray(center, dtype=float)
    u = rng.uniform(size=n)
    # cos(theta) = 1 + log(u + (1-u) e^(-2 kappa)) / kappa
    w = 1.0 + np.log(u + (1.0 - u) * np.exp(-2.0 * kappa)) / kappa
    phi = rng.uniform(0, 2 * np.pi, size=n)
    sin_t = np.sqrt(np.maximum(1.0 - w**2, 0.0))
    local = np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), w], axis=1)
    # Rotate the pole onto the center direction.
    z = np.array([0.0, 0.0, 1.0])
    if np.allclose(center, z):
        return local
    if np.allclose(center, -z):
        return local * np.array([1.0, -1.0, -1.0])
    axis = np.cross(z, center)
    axis /= np.linalg.norm(axis)
    angle = np.arccos(np.clip(center @ z, -1.0, 1.0))
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    rot = np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)
    return local @ rot.T


def _time_index(sp: Scanpath, t_seconds: float) -> int:
    if not 0.0 <= t_seconds <= sp.duration_s:
        raise ValueError("timestamp outside scanpath duration")
    idx = int(np.floor(t_seconds * sp.sample_rate_hz))
    return min(idx, len(sp) - 1)


def kde_timestamp(sps: ScanpathSet, t_seconds: float, kappa: float, H: int, W: int) -> DensityMap:
    """Mixture-of-vMF density of the gaze points at one timestamp."""
    units = pixel_grid_units(H, W).reshape(-1, 3)
    logs = np.stack(
        [vmf_log_density(units, sp.points[_time_index(sp, t_seconds)], kappa) for sp in sps]
    )
    hi = logs.max(axis=0)
    density = np.exp(hi) * np.mean(np.exp(logs - hi), axis=0)
    return DensityMap(density.reshape(H, W), kappa)


def kde_mode_and_spread(d: DensityMap):
    """Highest-density pixel center and the density-weighted mean
    great-circle distance to it; argmax ties break at the lowest linear
    pixel index."""
    values = d.values
    H, W = values.shape
    flat = int(np.argmax(values))
    mode = equirect_pixel_to_latlon(flat // W, flat % W, H, W)
    units = pixel_grid_units(H, W).reshape(-1, 3)
    weights = (values * pixel_solid_angles(H, W)).reshape(-1)
    dists = spherical_distance(units, latlon_to_unit(mode))
    spread = float(np.sum(weights * dists) / np.sum(weights))
    return mode, spread


def start_region_partition(sps: ScanpathSet, bin_deg: float = 40.0) -> dict:
    """Group scanpaths by the longitude bin of their first gaze point.

    Bins tile [-180, 180) in ``bin_deg`` steps; keys are (lo_deg, hi_deg)
    tuples and only nonempty groups are returned.
    """
    if bin_deg <= 0:
        raise ValueError("start_region_partition: bin_deg must be positive")
    edges = np.arange(-180.0, 180.0, bin_deg)
    groups: dict = {}
    for sp in sps:
        lon0 = np.degrees(wrap_lon(sp.latlon().lon[0]))
        idx = int(np.searchsorted(edges, lon0, side="right") - 1)
        lo = edges[idx]
        hi = min(lo + bin_deg, 180.0)
        groups.setdefault((float(lo), float(hi)), []).append(sp)
    return groups


def exploration_time(sps: ScanpathSet, offsets_deg=tuple(range(0, 181, 20))) -> ExplorationCurve:
    """First-passage statistics of longitudinal offset from the start.

    For each scanpath, the first sample index where the wrapped absolute
    longitude difference from the first sample reaches each offset; times
    are (index / sample rate) seconds. Scanpaths that never reach an
    offset are excluded from that offset's mean and show up in coverage.
    """
    offsets = np.asarray(sorted(offsets_deg), dtype=float)
    reach_times = [[] for _ in offsets]
    for sp in sps:
        lons = sp.latlon().lon
        delta = np.degrees(np.abs(wrap_lon(lons - lons[0])))
        for k, off in enumerate(offsets):
            # 1e-9 deg slack absorbs radians<->degrees rounding at thresholds.
            hits = np.nonzero(delta >= off - 1e-9)[0]
            if hits.size:
                reach_times[k].append(hits[0] / sp.sample_rate_hz)
    mean_time = np.array([np.mean(t) if t else np.nan for t in reach_times])
    coverage = np.array([len(t) / len(sps) for t in reach_times])
    return ExplorationCurve(offsets, mean_time, coverage)


def top_fraction_mask(density: np.ndarray, pct: float) -> np.ndarray:
    """Pixels covering the top ``pct`` percent of sphere area by density.

    Pixels are ranked by density (ties by lowest linear index) and added
    until their accumulated solid angle reaches pct% of 4*pi.
    """
    H, W = density.shape
    if pct <= 0:
        return np.zeros((H, W), dtype=bool)
    if pct >= 100:
        return np.ones((H, W), dtype=bool)
    flat = density.reshape(-1)
    omega = pixel_solid_angles(H, W).reshape(-1)
    order = np.argsort(-flat, kind="stable")
    cum = np.cumsum(omega[order])
    n_keep = int(np.searchsorted(cum, pct / 100.0 * 4 * np.pi)) + 1
    mask = np.zeros(H * W, dtype=bool)
    mask[order[:n_keep]] = True
    return mask.reshape(H, W)


def roc_congruency(
    sps: ScanpathSet,
    H: int,
    W: int,
    ladder_pct=None,
    blur_sigma_deg: float = 0.0,
) -> RocCurve:
    """Leave-one-out congruency between each scanpath and the rest.

    For scanpath i, the aggregate map of all the others is thresholded at
    every ladder level; the hit rate is the fraction of scanpath i's gaze
    points falling inside the mask. Curves start at (0, 0) and end at
    (100, 100) by construction.
    """
    if len(sps) < 2:
        raise ValueError("roc_congruency: at least two scanpaths required")
    ladder = np.asarray(ladder_pct if ladder_pct is not None else np.arange(0, 101), dtype=float)
    per = np.zeros((len(sps), len(ladder)))
    for i, sp in enumerate(sps):
        others = ScanpathSet(tuple(s for j, s in enumerate(sps) if j != i), sps.image_id)
        density = aggregate_map(others, H, W, blur_sigma_deg)
        r, c = latlon_to_equirect_pixel(sp.latlon(), H, W)
        r, c = np.atleast_1d(r), np.atleast_1d(c)
        for k, pct in enumerate(ladder):
            mask = top_fraction_mask(density, pct)
            per[i, k] = 100.0 * np.mean(mask[r, c])
    return RocCurve(ladder, per.mean(axis=0), per)
