"""Scanpath file exchange and panorama loading.

Scanpaths travel as JSON lines, one gaze sample per line with keys
image_id, user_id, t (seconds), lat, lon (radians): appendable,
diffable, and stream-parsable. A file is canonical when every
(image, user) record sits exactly on the resampling lattice
t = (i + 0.5) / rate; converting a canonical file reproduces it
byte for byte.

Panoramas are PNG files decoded to floats in [0, 1]; images that are
not 2:1 are resampled with a warning.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .gan.params import EquirectImage
from .sphere import Scanpath, ScanpathSet, wrap_lon

_ROW_KEYS = ("image_id", "user_id", "t", "lat", "lon")


@dataclass
class ScanpathRecord:
    """All samples of one (image, user) pair, in file order."""

    image_id: str
    user_id: str
    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray


def read_records(path, degrees: bool = False) -> list[ScanpathRecord]:
    """Parse a JSON-lines scanpath file into per-(image, user) records.

    Raises ValueError with the offending line number for malformed rows,
    out-of-range angles, or non-increasing timestamps.
    """
    groups: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                image_id = str(row["image_id"])
                user_id = str(row["user_id"])
                t = float(row["t"])
                lat = float(row["lat"])
                lon = float(row["lon"])
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed scanpath row ({exc})") from None
            if degrees:
                lat, lon = np.radians(lat), np.radians(lon)
            if not np.isfinite([t, lat, lon]).all():
                raise ValueError(f"{path}:{lineno}: non-finite value")
            if abs(lat) > np.pi / 2 + 1e-9:
                raise ValueError(f"{path}:{lineno}: latitude {lat} outside [-pi/2, pi/2]")
            key = (image_id, user_id)
            groups.setdefault(key, []).append((lineno, t, lat, lon))
    records = []
    for (image_id, user_id), rows in groups.items():
        t = np.array([r[1] for r in rows])
        if np.any(np.diff(t) <= 0):
            bad = rows[int(np.argmax(np.diff(t) <= 0)) + 1][0]
            raise ValueError(
                f"{path}:{bad}: timestamps not strictly increasing for "
                f"({image_id}, {user_id})"
            )
        records.append(
            ScanpathRecord(
                image_id,
                user_id,
                t,
                np.array([r[2] for r in rows]),
                np.array([float(wrap_lon(r[3])) for r in rows]),
            )
        )
    return records


def resample_record(
    rec: ScanpathRecord, target_hz: float = 1.0, target_T: int = 30, short: str = "truncate"
) -> ScanpathRecord:
    """Snap a record onto the lattice t = (i + 0.5) / target_hz by nearest
    timestamp (ties toward the earlier sample).

    Records ending before the last lattice point are either cut to the
    covered lattice prefix (``short="truncate"``) or rejected
    (``short="reject"``).
    """
    if short not in ("truncate", "reject"):
        raise ValueError(f"resample_record: unknown short policy {short!r}")
    lattice = (np.arange(target_T) + 0.5) / target_hz
    covered = lattice <= rec.t[-1] + 0.5 / target_hz
    if not covered.all():
        if short == "reject":
            raise ValueError(
                f"record ({rec.image_id}, {rec.user_id}) ends at t={rec.t[-1]:g}s, "
                f"before the {target_T}-sample lattice at {target_hz:g} Hz"
            )
        lattice = lattice[covered]
    if lattice.size == 0:
        raise ValueError(f"record ({rec.image_id}, {rec.user_id}) too short to resample")
    if len(rec.t) == 1:
        idx = np.zeros(lattice.size, dtype=int)
    else:
        pos = np.clip(np.searchsorted(rec.t, lattice), 1, len(rec.t) - 1)
        left, right = rec.t[pos - 1], rec.t[pos]
        idx = np.where(lattice - left <= right - lattice, pos - 1, pos)
    return ScanpathRecord(rec.image_id, rec.user_id, lattice, rec.lat[idx], rec.lon[idx])


def record_to_scanpath(rec: ScanpathRecord, sample_rate_hz: float) -> Scanpath:
    return Scanpath.from_latlon(rec.lat, rec.lon, sample_rate_hz)


def ingest(
    path, target_hz: float = 1.0, target_T: int = 30, short: str = "truncate", degrees: bool = False
) -> dict:
    """Read, resample, and group a scanpath file; image_id -> ScanpathSet.

    User identities are dropped in the returned sets; use
    :func:`convert_file` when they must survive.
    """
    by_image: dict = {}
    for rec in read_records(path, degrees=degrees):
        out = resample_record(rec, target_hz, target_T, short)
        by_image.setdefault(rec.image_id, []).append(record_to_scanpath(out, target_hz))
    return {k: ScanpathSet(tuple(v), k) for k, v in by_image.items()}


def write_records(path, records) -> None:
    """Canonical JSON-lines writer: fixed key order, shortest-repr floats."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            for i in range(len(rec.t)):
                row = {
                    "image_id": rec.image_id,
                    "user_id": rec.user_id,
                    "t": float(rec.t[i]),
                    "lat": float(rec.lat[i]),
                    "lon": float(rec.lon[i]),
                }
                fh.write(json.dumps(row) + "\n")


def convert_file(
    in_path,
    out_path,
    target_hz: float = 1.0,
    target_T: int = 30,
    short: str = "truncate",
    degrees: bool = False,
) -> int:
    """Resample a scanpath file onto the canonical lattice, preserving
    record identity and order; returns the record count."""
    records = [
        resample_record(rec, target_hz, target_T, short)
        for rec in read_records(in_path, degrees=degrees)
    ]
    write_records(out_path, records)
    return len(records)


def scanpath_set_records(sps: ScanpathSet, user_prefix: str = "gen"):
    """Records for a set of toolkit-made scanpaths, users named by index."""
    records = []
    for i, sp in enumerate(sps):
        lat, lon = sp.latlon()
        t = (np.arange(len(sp)) + 0.5) / sp.sample_rate_hz
        records.append(
            ScanpathRecord(sps.image_id, f"{user_prefix}{i:04d}", t, np.asarray(lat), np.asarray(lon))
        )
    return records


def load_equirect_png(path, target_h: int | None = None, image_id: str = "") -> EquirectImage:
    """Decode a PNG panorama to [0, 1] floats; enforce the 2:1 aspect.

    Non-2:1 inputs are resampled (with a warning on stderr); ``target_h``
    additionally rescales to the given height.
    """
    img = Image.open(path).convert("RGB")
    w, h = img.size
    if w != 2 * h:
        print(f"warning: {path} is {w}x{h}, resampling to 2:1 aspect", file=sys.stderr)
        h = target_h or h
        img = img.resize((2 * h, h), Image.BILINEAR)
    elif target_h is not None and h != target_h:
        img = img.resize((2 * target_h, target_h), Image.BILINEAR)
    pixels = np.asarray(img, dtype=float) / 255.0
    if not image_id:
        image_id = str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return EquirectImage(pixels, image_id)


def save_png(array: np.ndarray, path) -> None:
    """Write an (H, W) heatmap or (H, W, 3) image as 8-bit PNG; heatmaps
    are normalized to their max first."""
    a = np.asarray(array, dtype=float)
    if a.ndim == 2:
        peak = a.max()
        if peak > 0:
            a = a / peak
    img = Image.fromarray(np.clip(a * 255.0, 0, 255).astype(np.uint8))
    img.save(path)
