"""Adversarial losses with the spherical warped-distance term."""

from __future__ import annotations

import numpy as np

from ..sphere import Scanpath
from ..timewarp import soft_dtw_spherical_batch


def _stack(sps) -> np.ndarray:
    if isinstance(sps, np.ndarray):
        return sps if sps.ndim == 3 else sps[np.newaxis]
    return np.stack([sp.points if isinstance(sp, Scanpath) else np.asarray(sp) for sp in sps])


def loss_discriminator(d_real, d_fake) -> float:
    """Batch mean of log d_real + log(1 - d_fake); the trainer ascends this."""
    d_real = np.asarray(d_real, dtype=float)
    d_fake = np.asarray(d_fake, dtype=float)
    return float(np.mean(np.log(d_real)) + np.mean(np.log(1.0 - d_fake)))


def loss_generator(
    d_fake,
    gen,
    gt,
    lambda_dtw: float = 0.1,
    gamma: float = 1.0,
    non_saturating: bool = False,
) -> float:
    """Generator objective: the adversarial term plus lambda times the mean
    spherical soft-DTW between each generated scanpath and its paired
    ground-truth scanpath.

    The default adversarial term is mean log(1 - d_fake), which the
    trainer minimizes; ``non_saturating`` switches to -mean log d_fake.
    """
    d_fake = np.asarray(d_fake, dtype=float)
    adv = -np.mean(np.log(d_fake)) if non_saturating else np.mean(np.log(1.0 - d_fake))
    gen_pts = _stack(gen)
    gt_pts = _stack(gt)
    if gen_pts.shape[0] != gt_pts.shape[0]:
        raise ValueError("loss_generator: gen and gt batches must pair up")
    warp = float(np.mean(soft_dtw_spherical_batch(gen_pts, gt_pts, gamma)))
    return float(adv + lambda_dtw * warp)
