"""Forward and backward passes of the two-branch networks.

Both the generator and the discriminator read the conditioning panorama
through their own image branch: coordinate channels are appended to the
RGB input, two aggregation layers gather pixels at distortion-aware
sampling locations (a gnomonic tangent-plane lattice around each output
cell, so kernels keep their footprint near the poles), and two dense
layers produce a fixed-width feature vector. The generator maps a latent
code concatenated with that feature vector to raw 3D triplets which are
projected onto the sphere; the discriminator maps a flattened scanpath
plus the feature vector to a probability.

Everything is plain numpy with hand-written backward passes; activations
are tanh throughout so finite-difference checks are meaningful.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..sphere import (
    Scanpath,
    equirect_pixel_to_latlon,
    latlon_to_equirect_pixel,
    spherical_kernel_grid,
)
from .params import EquirectImage, ParameterStore, TrainConfig

_NORM_EPS = 1e-6  # norm floor so degenerate raw triplets stay finite
_PROB_EPS = 1e-7  # discriminator outputs are kept inside (eps, 1 - eps)


def coordconv_concat(img) -> np.ndarray:
    """Append normalized column/row coordinate channels, each linear in
    [-1, 1] across its axis; returns (H, W, 5)."""
    px = img.pixels if isinstance(img, EquirectImage) else np.asarray(img, dtype=float)
    H, W = px.shape[:2]
    col = np.linspace(-1.0, 1.0, W)[np.newaxis, :].repeat(H, axis=0)
    row = np.linspace(-1.0, 1.0, H)[:, np.newaxis].repeat(W, axis=1)
    return np.concatenate([px, col[..., np.newaxis], row[..., np.newaxis]], axis=2)


@lru_cache(maxsize=16)
def _gather_indices(h_in: int, w_in: int, stride: int, k: int):
    """Flat input indices sampled by each output cell, shape (n_cells, k*k).

    Output cells form the coarser equirect grid; each cell's sampling
    locations come from the spherical kernel grid at half the cell pitch
    (capped so the k x k grid stays inside a hemisphere), snapped to the
    nearest input pixel.
    """
    h_out, w_out = h_in // stride, w_in // stride
    step = min(stride * (np.pi / h_in) / 2.0, 0.9 * (np.pi / 2) / k)
    idx = np.empty((h_out * w_out, k * k), dtype=int)
    for i in range(h_out):
        # One gnomonic pattern per output row, translated in whole columns:
        # keeps the gather exactly shift-equivariant along longitude.
        center = equirect_pixel_to_latlon(i, 0, h_out, w_out)
        grid = spherical_kernel_grid(center, k, step)
        r, c = latlon_to_equirect_pixel(grid, h_in, w_in)
        r, c = r.reshape(-1), c.reshape(-1)
        for j in range(w_out):
            idx[i * w_out + j] = r * w_in + (c + j * stride) % w_in
    return idx


@lru_cache(maxsize=16)
def sampling_plan(cfg: TrainConfig):
    """Per-layer gather indices for the feature branch of one config."""
    plans = []
    h, w = cfg.image_h, cfg.image_w
    for stride in cfg.conv_strides:
        plans.append(_gather_indices(h, w, stride, cfg.conv_k))
        h, w = h // stride, w // stride
    return tuple(plans)


def _tanh_fwd(x, w, b):
    z = x @ w + b
    return np.tanh(z)


def feature_forward(x5: np.ndarray, store: ParameterStore, net: str):
    """Image branch of one network ('g' or 'd'); returns (feat, cache)."""
    cfg = store.cfg
    p = store.params
    if x5.shape != (cfg.image_h, cfg.image_w, 5):
        raise ValueError(
            f"feature_forward: expected ({cfg.image_h}, {cfg.image_w}, 5) input, got {x5.shape}"
        )
    plan = sampling_plan(cfg)
    flat = x5.reshape(-1, 5)
    g1 = flat[plan[0]].reshape(plan[0].shape[0], -1)  # (cells1, k*k*5)
    a1 = _tanh_fwd(g1, p[f"{net}_feat_conv1_w"], p[f"{net}_feat_conv1_b"])
    g2 = a1[plan[1]].reshape(plan[1].shape[0], -1)  # (cells2, k*k*c1)
    a2 = _tanh_fwd(g2, p[f"{net}_feat_conv2_w"], p[f"{net}_feat_conv2_b"])
    a2f = a2.reshape(-1)
    f1 = _tanh_fwd(a2f, p[f"{net}_feat_fc1_w"], p[f"{net}_feat_fc1_b"])
    feat = _tanh_fwd(f1, p[f"{net}_feat_fc2_w"], p[f"{net}_feat_fc2_b"])
    cache = {"g1": g1, "a1": a1, "g2": g2, "a2": a2, "a2f": a2f, "f1": f1, "feat": feat}
    return feat, cache


def feature_backward(dfeat: np.ndarray, cache: dict, store: ParameterStore, net: str) -> dict:
    """Parameter gradients of the image branch from d(loss)/d(feat)."""
    cfg = store.cfg
    p = store.params
    plan = sampling_plan(cfg)
    grads = {}
    dz = dfeat * (1.0 - cache["feat"] ** 2)
    grads[f"{net}_feat_fc2_w"] = np.outer(cache["f1"], dz)
    grads[f"{net}_feat_fc2_b"] = dz
    df1 = p[f"{net}_feat_fc2_w"] @ dz
    dz = df1 * (1.0 - cache["f1"] ** 2)
    grads[f"{net}_feat_fc1_w"] = np.outer(cache["a2f"], dz)
    grads[f"{net}_feat_fc1_b"] = dz
    da2 = (p[f"{net}_feat_fc1_w"] @ dz).reshape(cache["a2"].shape)
    dz2 = da2 * (1.0 - cache["a2"] ** 2)
    grads[f"{net}_feat_conv2_w"] = cache["g2"].T @ dz2
    grads[f"{net}_feat_conv2_b"] = dz2.sum(axis=0)
    dg2 = dz2 @ p[f"{net}_feat_conv2_w"].T
    da1 = np.zeros_like(cache["a1"])
    c1 = cache["a1"].shape[1]
    np.add.at(da1, plan[1].reshape(-1), dg2.reshape(-1, c1))
    dz1 = da1 * (1.0 - cache["a1"] ** 2)
    grads[f"{net}_feat_conv1_w"] = cache["g1"].T @ dz1
    grads[f"{net}_feat_conv1_b"] = dz1.sum(axis=0)
    return grads


def generator_forward_batch(z: np.ndarray, feat: np.ndarray, store: ParameterStore):
    """Batched generator pass; returns (points (B, T, 3), cache)."""
    cfg = store.cfg
    p = store.params
    z = np.atleast_2d(np.asarray(z, dtype=float))
    B = z.shape[0]
    inp = np.concatenate([z, np.broadcast_to(feat, (B, feat.size))], axis=1)
    h1 = _tanh_fwd(inp, p["g_fc1_w"], p["g_fc1_b"])
    h2 = _tanh_fwd(h1, p["g_fc2_w"], p["g_fc2_b"])
    raw = h2 @ p["g_out_w"] + p["g_out_b"]
    w = raw.reshape(B, cfg.path_len, 3)
    norms = np.maximum(np.linalg.norm(w, axis=2, keepdims=True), _NORM_EPS)
    points = w / norms
    cache = {"inp": inp, "h1": h1, "h2": h2, "w": w, "norms": norms}
    return points, cache


def generator_backward_batch(dpoints: np.ndarray, cache: dict, store: ParameterStore):
    """Gradients from d(loss)/d(points): (param grads, dfeat)."""
    p = store.params
    w, norms = cache["w"], cache["norms"]
    # points = w / n with n = max(|w|, eps): the normalization Jacobian.
    wd = np.sum(w * dpoints, axis=2, keepdims=True)
    draw = dpoints / norms - np.where(
        norms > _NORM_EPS, w * wd / norms**3, 0.0
    )
    draw = draw.reshape(w.shape[0], -1)
    grads = {"g_out_w": cache["h2"].T @ draw, "g_out_b": draw.sum(axis=0)}
    dh2 = draw @ p["g_out_w"].T
    dz = dh2 * (1.0 - cache["h2"] ** 2)
    grads["g_fc2_w"] = cache["h1"].T @ dz
    grads["g_fc2_b"] = dz.sum(axis=0)
    dh1 = dz @ p["g_fc2_w"].T
    dz = dh1 * (1.0 - cache["h1"] ** 2)
    grads["g_fc1_w"] = cache["inp"].T @ dz
    grads["g_fc1_b"] = dz.sum(axis=0)
    dinp = dz @ p["g_fc1_w"].T
    dfeat = dinp[:, store.cfg.d_z :].sum(axis=0)
    return grads, dfeat


def discriminator_forward_batch(points: np.ndarray, feat: np.ndarray, store: ParameterStore):
    """Batched discriminator pass; returns (probabilities (B,), cache)."""
    p = store.params
    points = np.asarray(points, dtype=float)
    if points.ndim == 2:
        points = points[np.newaxis]
    B = points.shape[0]
    inp = np.concatenate([points.reshape(B, -1), np.broadcast_to(feat, (B, feat.size))], axis=1)
    h1 = _tanh_fwd(inp, p["d_fc1_w"], p["d_fc1_b"])
    h2 = _tanh_fwd(h1, p["d_fc2_w"], p["d_fc2_b"])
    logit = (h2 @ p["d_out_w"] + p["d_out_b"]).reshape(B)
    prob = np.clip(1.0 / (1.0 + np.exp(-logit)), _PROB_EPS, 1.0 - _PROB_EPS)
    cache = {"inp": inp, "h1": h1, "h2": h2, "prob": prob}
    return prob, cache


def discriminator_backward_batch(dprob: np.ndarray, cache: dict, store: ParameterStore):
    """Gradients from d(loss)/d(prob): (param grads, dpoints, dfeat)."""
    cfg = store.cfg
    p = store.params
    prob = cache["prob"]
    dlogit = dprob * prob * (1.0 - prob)
    grads = {
        "d_out_w": cache["h2"].T @ dlogit[:, np.newaxis],
        "d_out_b": np.array([dlogit.sum()]),
    }
    dh2 = dlogit[:, np.newaxis] @ p["d_out_w"].T
    dz = dh2 * (1.0 - cache["h2"] ** 2)
    grads["d_fc2_w"] = cache["h1"].T @ dz
    grads["d_fc2_b"] = dz.sum(axis=0)
    dh1 = dz @ p["d_fc2_w"].T
    dz = dh1 * (1.0 - cache["h1"] ** 2)
    grads["d_fc1_w"] = cache["inp"].T @ dz
    grads["d_fc1_b"] = dz.sum(axis=0)
    dinp = dz @ p["d_fc1_w"].T
    n_path = 3 * cfg.path_len
    dpoints = dinp[:, :n_path].reshape(-1, cfg.path_len, 3)
    dfeat = dinp[:, n_path:].sum(axis=0)
    return grads, dpoints, dfeat


def feature_extract(x5: np.ndarray, store: ParameterStore, net: str = "g") -> np.ndarray:
    """Feature vector of one network's image branch."""
    return feature_forward(x5, store, net)[0]


def generator_forward(z: np.ndarray, feat: np.ndarray, store: ParameterStore) -> Scanpath:
    """Single-sample generation; deterministic given (z, feat, params)."""
    points, _ = generator_forward_batch(np.asarray(z, dtype=float)[np.newaxis], feat, store)
    return Scanpath(points[0])


def discriminator_forward(sp, feat: np.ndarray, store: ParameterStore) -> float:
    """Probability that a scanpath is real, in the open interval (0, 1)."""
    points = sp.points if isinstance(sp, Scanpath) else np.asarray(sp, dtype=float)
    prob, _ = discriminator_forward_batch(points[np.newaxis], feat, store)
    return float(prob[0])
