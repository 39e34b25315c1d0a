"""Synthetic blob scenes for smoke-testing the learning signal.

Each scene is a dark panorama with one bright Gaussian blob; its
ground-truth scanpaths are i.i.d. von Mises-Fisher draws around the blob
center. A model that conditions on the image correctly must steer its
scanpaths toward a different longitude for every scene.
"""

from __future__ import annotations

import numpy as np

from ..behavior import sample_vmf
from ..sphere import GazePoint, Scanpath, ScanpathSet, latlon_to_equirect_pixel, latlon_to_unit
from .params import EquirectImage


def make_blob_image(H: int, W: int, center: GazePoint, sigma_px: float, image_id: str = "") -> EquirectImage:
    """Panorama with one Gaussian blob (pixel-space, wrapping in longitude)."""
    r0, c0 = latlon_to_equirect_pixel(center, H, W)
    rows = np.arange(H)[:, np.newaxis] - r0
    dcol = np.arange(W)[np.newaxis, :] - c0
    dcol = (dcol + W / 2) % W - W / 2
    blob = np.exp(-(rows**2 + dcol**2) / (2.0 * sigma_px**2))
    return EquirectImage(np.repeat(blob[:, :, np.newaxis], 3, axis=2), image_id)


def make_blob_dataset(
    n_images: int,
    n_paths: int,
    T: int = 30,
    kappa: float = 50.0,
    seed: int = 0,
    H: int = 64,
    W: int = 128,
    sigma_px: float = 6.0,
    lat_zero: bool = True,
):
    """List of (EquirectImage, ScanpathSet) blob scenes.

    Blob centers are uniform in longitude; latitude is 0 when ``lat_zero``
    (the equator-biased regime), otherwise uniform within +/-45 degrees.
    """
    rng = np.random.default_rng(seed)
    dataset = []
    for i in range(n_images):
        lon = rng.uniform(-np.pi, np.pi)
        lat = 0.0 if lat_zero else rng.uniform(-np.pi / 4, np.pi / 4)
        center = GazePoint(lat, lon)
        image_id = f"blob-{i:03d}"
        img = make_blob_image(H, W, center, sigma_px, image_id)
        mu = latlon_to_unit(center)
        sps = tuple(
            Scanpath(sample_vmf(mu, kappa, T, rng)) for _ in range(n_paths)
        )
        dataset.append((img, ScanpathSet(sps, image_id)))
    return dataset
