"""Unit-sphere geometry shared by every other module.

Conventions (normative for the whole package):

- Gaze directions are (lat, lon) in radians, lat in [-pi/2, pi/2] and
  lon in [-pi, pi), or unit 3-vectors (x, y, z) with
  x = cos(lat) cos(lon), y = cos(lat) sin(lon), z = sin(lat).
- Equirectangular images put row 0 at the north-pole edge and column 0
  at lon = -pi; pixel centers sample the linear map
  lon = ((col + 0.5) / W) * 2*pi - pi, lat = pi/2 - ((row + 0.5) / H) * pi.
- Great-circle distance is computed from the chord length,
  2 * arcsin(chord / 2), which stays continuous across the date line.

All functions accept scalars or numpy arrays (broadcasting) and are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * np.pi
HALF_PI = 0.5 * np.pi


class GazePoint(NamedTuple):
    """A direction on the sphere; fields may be scalars or arrays."""

    lat: float
    lon: float


class TangentCoords(NamedTuple):
    """Gnomonic tangent-plane coordinates relative to a tangent point."""

    u: float
    v: float


def wrap_lon(lon):
    """Wrap longitude(s) into [-pi, pi)."""
    return np.mod(np.asarray(lon, dtype=float) + np.pi, TWO_PI) - np.pi


def latlon_to_unit(p) -> np.ndarray:
    """Convert (lat, lon) to unit 3-vectors, shape (..., 3)."""
    lat, lon = np.asarray(p[0], dtype=float), np.asarray(p[1], dtype=float)
    cl = np.cos(lat)
    return np.stack([cl * np.cos(lon), cl * np.sin(lon), np.sin(lat)], axis=-1)


def unit_to_latlon(v) -> GazePoint:
    """Convert unit 3-vectors to (lat, lon).

    Longitude at the poles is canonicalized to 0 (atan2(0, 0) convention),
    so round trips through ``latlon_to_unit`` are deterministic.

    Raises
    ------
    ValueError
        If any component is non-finite.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("unit_to_latlon: non-finite components")
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    lat = np.arctan2(z, np.hypot(x, y))
    lon = np.arctan2(y, x)
    if v.ndim == 1:
        return GazePoint(float(lat), float(lon))
    return GazePoint(lat, lon)


def spherical_distance(a, b):
    """Great-circle distance between unit vectors, in [0, pi].

    Computed as 2 * arcsin(chord / 2); the arcsin argument is clamped to
    [-1, 1] to absorb floating-point chord lengths a few ulps above 2.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    chord = np.linalg.norm(a - b, axis=-1)
    return 2.0 * np.arcsin(np.clip(0.5 * chord, -1.0, 1.0))


def gnomonic_project(center: GazePoint, p) -> TangentCoords:
    """Project point(s) onto the plane tangent at ``center``.

    The tangent point maps to (0, 0); great circles through it map to
    straight lines through the origin. Only defined on the open hemisphere
    facing the tangent point.

    Raises
    ------
    ValueError
        If any point lies on or beyond the horizon great circle.
    """
    lat0 = np.asarray(center[0], dtype=float)
    lon0 = np.asarray(center[1], dtype=float)
    lat = np.asarray(p[0], dtype=float)
    lon = np.asarray(p[1], dtype=float)
    dlon = lon - lon0
    cos_c = np.sin(lat0) * np.sin(lat) + np.cos(lat0) * np.cos(lat) * np.cos(dlon)
    if np.any(cos_c <= 1e-12):
        raise ValueError("gnomonic_project: point outside the front hemisphere")
    u = np.cos(lat) * np.sin(dlon) / cos_c
    v = (np.cos(lat0) * np.sin(lat) - np.sin(lat0) * np.cos(lat) * np.cos(dlon)) / cos_c
    if u.ndim == 0:
        return TangentCoords(float(u), float(v))
    return TangentCoords(u, v)


def gnomonic_unproject(center: GazePoint, t) -> GazePoint:
    """Inverse of :func:`gnomonic_project`; total on finite coordinates."""
    lat0 = np.asarray(center[0], dtype=float)
    lon0 = np.asarray(center[1], dtype=float)
    u = np.asarray(t[0], dtype=float)
    v = np.asarray(t[1], dtype=float)
    rho = np.hypot(u, v)
    c = np.arctan(rho)
    sin_c, cos_c = np.sin(c), np.cos(c)
    # Guard the 0/0 at the tangent point itself; the limit is (lat0, lon0).
    rho_safe = np.where(rho == 0.0, 1.0, rho)
    lat = np.arcsin(np.clip(cos_c * np.sin(lat0) + v * sin_c * np.cos(lat0) / rho_safe, -1.0, 1.0))
    lon = lon0 + np.arctan2(u * sin_c, rho_safe * np.cos(lat0) * cos_c - v * np.sin(lat0) * sin_c)
    lat = np.where(rho == 0.0, lat0, lat)
    lon = wrap_lon(np.where(rho == 0.0, lon0, lon))
    if lat.ndim == 0:
        return GazePoint(float(lat), float(lon))
    return GazePoint(lat, lon)


def spherical_kernel_grid(center: GazePoint, k: int, angular_step: float) -> GazePoint:
    """Sampling locations for a distortion-aware k x k kernel.

    A regular lattice in the tangent plane at ``center``, with lattice step
    tan(angular_step), is unprojected back to the sphere. Row 0 is the
    northernmost row, column 0 the westernmost, and the middle cell is
    exactly ``center``. Returns a GazePoint of two (k, k) arrays.

    Raises
    ------
    ValueError
        If k is not a positive odd integer, or the grid would leave the
        hemisphere (k * angular_step must stay below pi/2).
    """
    if k < 1 or k % 2 == 0:
        raise ValueError("spherical_kernel_grid: k must be a positive odd integer")
    if angular_step <= 0:
        raise ValueError("spherical_kernel_grid: angular_step must be positive")
    if k * angular_step >= HALF_PI:
        raise ValueError("spherical_kernel_grid: grid exceeds the hemisphere")
    half = (k - 1) // 2
    step = np.tan(angular_step)
    offsets = (np.arange(k) - half) * step
    u = np.broadcast_to(offsets[np.newaxis, :], (k, k))
    v = np.broadcast_to(-offsets[:, np.newaxis], (k, k))  # row 0 = north
    return gnomonic_unproject(center, TangentCoords(u.copy(), v.copy()))


def equirect_pixel_to_latlon(row, col, H: int, W: int) -> GazePoint:
    """Latitude/longitude of equirectangular pixel center(s)."""
    row = np.asarray(row)
    col = np.asarray(col)
    if np.any(row < 0) or np.any(row >= H) or np.any(col < 0) or np.any(col >= W):
        raise ValueError("equirect_pixel_to_latlon: pixel index out of range")
    lat = HALF_PI - ((row + 0.5) / H) * np.pi
    lon = ((col + 0.5) / W) * TWO_PI - np.pi
    if lat.ndim == 0:
        return GazePoint(float(lat), float(lon))
    return GazePoint(lat, lon)


def latlon_to_equirect_pixel(p, H: int, W: int):
    """Nearest pixel (row, col) for direction(s); longitude wraps."""
    lat = np.asarray(p[0], dtype=float)
    lon = wrap_lon(p[1])
    row = np.clip(np.floor((HALF_PI - lat) / np.pi * H), 0, H - 1).astype(int)
    col = np.clip(np.floor((lon + np.pi) / TWO_PI * W), 0, W - 1).astype(int)
    if row.ndim == 0:
        return int(row), int(col)
    return row, col


@dataclass(frozen=True)
class Scanpath:
    """An ordered sequence of unit-sphere gaze points sampled at a fixed rate.

    ``points`` is a (T, 3) float array of unit vectors (made read-only);
    sample i sits at time (i + 0.5) / sample_rate_hz seconds.
    """

    points: np.ndarray
    sample_rate_hz: float = 1.0

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
            raise ValueError("Scanpath: points must have shape (T, 3) with T >= 1")
        norms = np.linalg.norm(pts, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("Scanpath: points must be unit vectors (|norm - 1| <= 1e-6)")
        if not self.sample_rate_hz > 0:
            raise ValueError("Scanpath: sample_rate_hz must be positive")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def latlon(self) -> GazePoint:
        """All samples as (lat array, lon array)."""
        return unit_to_latlon(self.points)

    @classmethod
    def from_latlon(cls, lats, lons, sample_rate_hz: float = 1.0) -> "Scanpath":
        return cls(latlon_to_unit(GazePoint(np.asarray(lats), np.asarray(lons))), sample_rate_hz)


@dataclass(frozen=True)
class ScanpathSet:
    """A nonempty group of scanpaths observed or generated for one image."""

    scanpaths: tuple
    image_id: str = ""

    def __post_init__(self):
        sps = tuple(self.scanpaths)
        if not sps:
            raise ValueError("ScanpathSet: at least one scanpath required")
        if not all(isinstance(sp, Scanpath) for sp in sps):
            raise ValueError("ScanpathSet: members must be Scanpath instances")
        object.__setattr__(self, "scanpaths", sps)

    def __len__(self) -> int:
        return len(self.scanpaths)

    def __iter__(self):
        return iter(self.scanpaths)

    def __getitem__(self, i):
        return self.scanpaths[i]
