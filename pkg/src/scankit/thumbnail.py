"""Panning-viewport video thumbnails of static panoramas.

Many generated scanpaths are condensed, per timestamp, into the point of
highest kernel density and its spread. The density mode (not the mean:
with two clusters the viewport must sit on the dominant one, never in
the void between them) drives the viewport center, and the spread above
the kernel's own floor drives the field of view. Centers are smoothed
along great circles, the field of view by a moving average, and frame-
to-frame panning is rate-limited.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .behavior import (
    DensityMap,
    kde_mode_and_spread,
    kde_timestamp,
    pixel_grid_units,
    vmf_log_density,
)
from .gan.params import EquirectImage, ParameterStore
from .gan.train import generate
from .sphere import (
    GazePoint,
    ScanpathSet,
    gnomonic_unproject,
    latlon_to_unit,
    unit_to_latlon,
)


@dataclass(frozen=True)
class TrajectoryFrame:
    """One viewport keyframe: time, center direction, horizontal FOV."""

    t: float
    center: GazePoint
    fov_deg: float


def slerp(a: np.ndarray, b: np.ndarray, frac: float) -> np.ndarray:
    """Great-circle interpolation between unit vectors."""
    dot = float(np.clip(a @ b, -1.0, 1.0))
    omega = np.arccos(dot)
    if omega < 1e-12:
        return a
    s = np.sin(omega)
    out = (np.sin((1.0 - frac) * omega) / s) * a + (np.sin(frac * omega) / s) * b
    return out / np.linalg.norm(out)


def _kernel_floor_spread(mode: GazePoint, kappa: float, H: int, W: int) -> float:
    """Spread reported for a single kernel centered at ``mode``: the zero
    point of the crowd-spread scale."""
    units = pixel_grid_units(H, W).reshape(-1, 3)
    density = np.exp(vmf_log_density(units, latlon_to_unit(mode), kappa)).reshape(H, W)
    return kde_mode_and_spread(DensityMap(density, kappa))[1]


def trajectory_from_scanpaths(
    sps: ScanpathSet,
    kappa: float = 80.0,
    H: int = 64,
    W: int = 128,
    fov_min_deg: float = 30.0,
    fov_max_deg: float = 100.0,
    fov_gain: float = 4.0,
    smooth_window: int = 3,
    max_pan_deg_per_s: float = 60.0,
) -> list[TrajectoryFrame]:
    """Condense a scanpath set into one viewport keyframe per timestamp."""
    hz = sps[0].sample_rate_hz
    T = min(len(sp) for sp in sps)
    centers, fovs, times = [], [], []
    for i in range(T):
        t = (i + 0.5) / hz
        density = kde_timestamp(sps, t, kappa, H, W)
        mode, spread = kde_mode_and_spread(density)
        excess = max(0.0, spread - _kernel_floor_spread(mode, kappa, H, W))
        fov = float(np.clip(fov_gain * np.degrees(excess) + fov_min_deg, fov_min_deg, fov_max_deg))
        centers.append(latlon_to_unit(mode))
        fovs.append(fov)
        times.append(t)

    if smooth_window >= 3 and T >= 3:
        half = (smooth_window - 1) // 2
        smoothed = [c.copy() for c in centers]
        for i in range(1, T - 1):
            lo, hi = max(0, i - half), min(T - 1, i + half)
            mid = slerp(centers[lo], centers[hi], 0.5)
            smoothed[i] = slerp(centers[i], mid, 2.0 / 3.0)
        centers = smoothed
        fovs = [float(np.mean(fovs[max(0, i - half) : i + half + 1])) for i in range(T)]

    max_step = np.radians(max_pan_deg_per_s) / hz
    for i in range(1, T):
        gap = float(np.arccos(np.clip(centers[i - 1] @ centers[i], -1.0, 1.0)))
        if gap > max_step:
            centers[i] = slerp(centers[i - 1], centers[i], max_step / gap)

    return [
        TrajectoryFrame(times[i], unit_to_latlon(centers[i]), fovs[i]) for i in range(T)
    ]


def thumbnail_trajectory(
    img: EquirectImage,
    store: ParameterStore,
    n: int = 100,
    kappa: float = 80.0,
    seed: int = 0,
    **kwargs,
) -> list[TrajectoryFrame]:
    """Generate n scanpaths for a panorama and derive its viewport
    trajectory; deterministic under the seed."""
    return trajectory_from_scanpaths(generate(img, n, store, seed), kappa=kappa, **kwargs)


def upsample_trajectory(frames: list[TrajectoryFrame], factor: int) -> list[TrajectoryFrame]:
    """Insert ``factor - 1`` interpolated frames between keyframes for
    smoother image sequences: centers move along great circles, time and
    FOV linearly."""
    if factor < 1:
        raise ValueError("upsample_trajectory: factor must be >= 1")
    if factor == 1 or len(frames) < 2:
        return list(frames)
    out = []
    for a, b in zip(frames, frames[1:]):
        va, vb = latlon_to_unit(a.center), latlon_to_unit(b.center)
        for k in range(factor):
            frac = k / factor
            out.append(
                TrajectoryFrame(
                    a.t + frac * (b.t - a.t),
                    unit_to_latlon(slerp(va, vb, frac)),
                    a.fov_deg + frac * (b.fov_deg - a.fov_deg),
                )
            )
    out.append(frames[-1])
    return out


def render_viewport(img: EquirectImage, frame: TrajectoryFrame, out_h: int, out_w: int) -> np.ndarray:
    """Rectilinear view of the panorama around a frame's center.

    Gnomonic (tangent-plane) geometry with the frame's horizontal FOV and
    square pixels; bilinear sampling with longitude wrap and latitude
    clamp. Returns (out_h, out_w, 3) floats in [0, 1].
    """
    px = img.pixels
    H, W = px.shape[:2]
    half = np.tan(np.radians(frame.fov_deg) / 2.0)
    scale = 2.0 * half / out_w
    u = (np.arange(out_w) + 0.5 - out_w / 2.0) * scale
    v = (out_h / 2.0 - np.arange(out_h) - 0.5) * scale
    uu, vv = np.meshgrid(u, v)
    lat, lon = gnomonic_unproject(frame.center, (uu, vv))

    row_f = (np.pi / 2 - lat) / np.pi * H - 0.5
    col_f = (lon + np.pi) / (2 * np.pi) * W - 0.5
    r0 = np.floor(row_f).astype(int)
    c0 = np.floor(col_f).astype(int)
    fr = (row_f - r0)[..., np.newaxis]
    fc = (col_f - c0)[..., np.newaxis]
    r0c = np.clip(r0, 0, H - 1)
    r1c = np.clip(r0 + 1, 0, H - 1)
    c0w = np.mod(c0, W)
    c1w = np.mod(c0 + 1, W)
    top = px[r0c, c0w] * (1 - fc) + px[r0c, c1w] * fc
    bot = px[r1c, c0w] * (1 - fc) + px[r1c, c1w] * fc
    return top * (1 - fr) + bot * fr
