"""Training loop, Adam updates, data augmentation, and batched generation.

The schedule follows a fixed recipe: Adam with separate constant learning
rates for the generator and the discriminator, momenta (0.5, 0.99),
mini-batches of eight scanpaths sharing one conditioning image, and two
generator cycles per discriminator cycle. Each epoch draws its
randomness from a generator seeded by (seed, epoch), so an interrupted
run resumed from a checkpoint replays the identical trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sphere import Scanpath, ScanpathSet, wrap_lon
from ..timewarp import soft_dtw_spherical_batch, soft_dtw_spherical_grad_batch
from .network import (
    coordconv_concat,
    discriminator_backward_batch,
    discriminator_forward_batch,
    feature_backward,
    feature_forward,
    generator_backward_batch,
    generator_forward_batch,
)
from .params import EquirectImage, ParameterStore, TrainConfig, init_params, save_params

_ADAM_EPS = 1e-8


class TrainingDivergedError(RuntimeError):
    """Raised when a loss turns non-finite; carries the offending state."""

    def __init__(self, message, store=None, epoch=None, step=None):
        super().__init__(message)
        self.store = store
        self.epoch = epoch
        self.step = step


@dataclass
class EpochLog:
    epoch: int
    steps: int
    d_loss: float
    g_loss: float
    val_soft_dtw: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "steps": self.steps,
            "d_loss": self.d_loss,
            "g_loss": self.g_loss,
            "val_soft_dtw": self.val_soft_dtw,
        }


def adam_update(store: ParameterStore, grads: dict, net: str, lr: float) -> None:
    """One Adam step over the given network's parameters."""
    b1, b2 = store.cfg.adam_betas
    if net == "g":
        store.step_g += 1
        t = store.step_g
    else:
        store.step_d += 1
        t = store.step_d
    for k in store.keys_for(net):
        g = grads.get(k)
        if g is None:
            continue
        g = g.reshape(store.params[k].shape)
        store.adam_m[k] = b1 * store.adam_m[k] + (1 - b1) * g
        store.adam_v[k] = b2 * store.adam_v[k] + (1 - b2) * g * g
        m_hat = store.adam_m[k] / (1 - b1**t)
        v_hat = store.adam_v[k] / (1 - b2**t)
        store.params[k] -= lr * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)


def longitudinal_shift(img: EquirectImage, sps: ScanpathSet, shift_cols: int):
    """Roll the panorama by whole columns and rotate every gaze point's
    longitude by the same angle; latitude is untouched."""
    W = img.pixels.shape[1]
    shift_cols = int(shift_cols) % W
    dlon = shift_cols * 2 * np.pi / W
    out_img = EquirectImage(np.roll(img.pixels, shift_cols, axis=1), img.image_id)
    shifted = []
    for sp in sps:
        lat, lon = sp.latlon()
        shifted.append(Scanpath.from_latlon(lat, wrap_lon(lon + dlon), sp.sample_rate_hz))
    return out_img, ScanpathSet(tuple(shifted), sps.image_id)


def augment_longitudinal_shift(img: EquirectImage, sps: ScanpathSet, n: int = 6, seed: int = 0):
    """n variants of (image, scanpaths) under random whole-column shifts."""
    rng = np.random.default_rng(seed)
    W = img.pixels.shape[1]
    return [longitudinal_shift(img, sps, int(s)) for s in rng.integers(0, W, size=n)]


def _sum_into(total: dict, part: dict) -> None:
    for k, v in part.items():
        total[k] = total.get(k, 0.0) + v


def discriminator_loss_and_grads(store: ParameterStore, x5, real_pts, fake_pts):
    """Discriminator objective and its ascent direction (negated gradients
    of -loss), without updating anything."""
    B = real_pts.shape[0]
    feat_d, cache_fd = feature_forward(x5, store, "d")
    d_real, cache_r = discriminator_forward_batch(real_pts, feat_d, store)
    d_fake, cache_f = discriminator_forward_batch(fake_pts, feat_d, store)
    loss = float(np.mean(np.log(d_real)) + np.mean(np.log(1.0 - d_fake)))
    grads: dict = {}
    g_r, _, dfeat_r = discriminator_backward_batch(-1.0 / (B * d_real), cache_r, store)
    g_f, _, dfeat_f = discriminator_backward_batch(1.0 / (B * (1.0 - d_fake)), cache_f, store)
    _sum_into(grads, g_r)
    _sum_into(grads, g_f)
    _sum_into(grads, feature_backward(dfeat_r + dfeat_f, cache_fd, store, "d"))
    return loss, grads


def generator_loss_and_grads(store: ParameterStore, x5, z, rho):
    """Full generator objective and gradients w.r.t. every generator
    parameter (head and image branch), for fixed latents and pairings."""
    cfg = store.cfg
    B = z.shape[0]
    feat_g, cache_fg = feature_forward(x5, store, "g")
    fake_pts, cache_g = generator_forward_batch(z, feat_g, store)

    feat_d, _ = feature_forward(x5, store, "d")
    d_fake, cache_f = discriminator_forward_batch(fake_pts, feat_d, store)

    warp_vals, warp_grads = soft_dtw_spherical_grad_batch(fake_pts, rho, cfg.gamma)
    if cfg.non_saturating:
        adv = -float(np.mean(np.log(d_fake)))
        dprob = -1.0 / (B * d_fake)
    else:
        adv = float(np.mean(np.log(1.0 - d_fake)))
        dprob = -1.0 / (B * (1.0 - d_fake))
    loss = adv + cfg.lambda_dtw * float(np.mean(warp_vals))

    # Discriminator parameters stay frozen; only d(points) flows back.
    _, dpts_adv, _ = discriminator_backward_batch(dprob, cache_f, store)
    dpts = dpts_adv + (cfg.lambda_dtw / B) * warp_grads
    grads, dfeat = generator_backward_batch(dpts, cache_g, store)
    _sum_into(grads, feature_backward(dfeat, cache_fg, store, "g"))
    return loss, grads


def _disc_cycle(store, x5, gt_pts, rng):
    feat_g, _ = feature_forward(x5, store, "g")
    z = rng.uniform(-1.0, 1.0, size=(gt_pts.shape[0], store.cfg.d_z))
    fake_pts, _ = generator_forward_batch(z, feat_g, store)
    loss, grads = discriminator_loss_and_grads(store, x5, gt_pts, fake_pts)
    adam_update(store, grads, "d", store.cfg.lr_d)
    return loss


def _gen_cycle(store, x5, gt_pool, rng):
    cfg = store.cfg
    z = rng.uniform(-1.0, 1.0, size=(cfg.batch, cfg.d_z))
    rho = gt_pool[rng.integers(0, gt_pool.shape[0], size=cfg.batch)]
    loss, grads = generator_loss_and_grads(store, x5, z, rho)
    adam_update(store, grads, "g", cfg.lr_g)
    return loss


def validation_soft_dtw(store: ParameterStore, val_dataset, epoch: int) -> float:
    """Mean pairwise spherical soft-DTW of freshly generated scanpaths
    against every ground-truth scanpath of the validation images."""
    cfg = store.cfg
    rng = np.random.default_rng([cfg.seed, 7919, epoch])
    pairs_g, pairs_t = [], []
    for img, gts in val_dataset:
        x5 = coordconv_concat(img)
        feat, _ = feature_forward(x5, store, "g")
        z = rng.uniform(-1.0, 1.0, size=(cfg.val_gen_per_image, cfg.d_z))
        gen_pts, _ = generator_forward_batch(z, feat, store)
        for g in gen_pts:
            for t in gts:
                pairs_g.append(g)
                pairs_t.append(t.points)
    values = soft_dtw_spherical_batch(np.stack(pairs_g), np.stack(pairs_t), cfg.gamma)
    return float(np.mean(values))


def train(
    dataset,
    cfg: TrainConfig,
    val_dataset=None,
    store: ParameterStore | None = None,
    checkpoint_path=None,
    progress=None,
):
    """Adversarial training over (EquirectImage, ScanpathSet) pairs.

    Returns (store, logs). With a validation set, the returned parameters
    are the snapshot from the epoch with the lowest validation soft-DTW;
    otherwise the final parameters. ``cfg.epochs == 0`` returns the
    initialization unchanged. Passing a previously returned ``store``
    resumes at ``store.completed_epochs``.
    """
    if not dataset:
        raise ValueError("train: empty dataset")
    if store is None:
        store = init_params(cfg)
    prepared = []
    for img, sps in dataset:
        gt_pool = np.stack([sp.points for sp in sps])
        prepared.append((coordconv_concat(img), gt_pool))

    logs: list[EpochLog] = []
    best_val = np.inf
    best_params = None
    total_steps = 0
    for epoch in range(store.completed_epochs, cfg.epochs):
        rng = np.random.default_rng([cfg.seed, 104729, epoch])
        d_losses, g_losses = [], []
        stop = False
        for img_idx in rng.permutation(len(prepared)):
            x5, gt_pool = prepared[img_idx]
            if cfg.max_steps is not None and total_steps >= cfg.max_steps:
                stop = True
                break
            order = rng.permutation(gt_pool.shape[0])
            if len(order) < cfg.batch:
                # Small pools still yield one batch, wrapping indices.
                order = order[np.arange(cfg.batch) % len(order)]
            for lo in range(0, len(order) - cfg.batch + 1, cfg.batch):
                batch = gt_pool[order[lo : lo + cfg.batch]]
                d_loss = _disc_cycle(store, x5, batch, rng)
                g_loss = np.nan
                for _ in range(cfg.gen_cycles_per_disc):
                    g_loss = _gen_cycle(store, x5, gt_pool, rng)
                total_steps += 1
                if not (np.isfinite(d_loss) and np.isfinite(g_loss)):
                    if checkpoint_path is not None:
                        save_params(store, str(checkpoint_path) + ".diverged")
                    raise TrainingDivergedError(
                        f"non-finite loss at epoch {epoch} (d={d_loss}, g={g_loss})",
                        store=store,
                        epoch=epoch,
                        step=total_steps,
                    )
                d_losses.append(d_loss)
                g_losses.append(g_loss)
                if cfg.max_steps is not None and total_steps >= cfg.max_steps:
                    stop = True
                    break
            if stop:
                break
        store.check_finite()
        store.completed_epochs = epoch + 1
        val = validation_soft_dtw(store, val_dataset, epoch) if val_dataset else np.nan
        if val_dataset and val < best_val:
            best_val = val
            best_params = store.copy_params()
        log = EpochLog(
            epoch=epoch,
            steps=total_steps,
            d_loss=float(np.mean(d_losses)) if d_losses else np.nan,
            g_loss=float(np.mean(g_losses)) if g_losses else np.nan,
            val_soft_dtw=val,
        )
        logs.append(log)
        if progress is not None:
            progress(log)
        if checkpoint_path is not None:
            save_params(store, checkpoint_path)
        if stop:
            break
    if best_params is not None:
        store.params = best_params
    return store, logs


def generate(img: EquirectImage, n: int, store: ParameterStore, seed: int) -> ScanpathSet:
    """n scanpaths from independent latent draws; deterministic under seed."""
    if n < 1:
        raise ValueError("generate: n must be >= 1")
    rng = np.random.default_rng(seed)
    x5 = coordconv_concat(img)
    feat, _ = feature_forward(x5, store, "g")
    z = rng.uniform(-1.0, 1.0, size=(n, store.cfg.d_z))
    points, _ = generator_forward_batch(z, feat, store)
    sps = tuple(Scanpath(points[i]) for i in range(n))
    return ScanpathSet(sps, img.image_id)
