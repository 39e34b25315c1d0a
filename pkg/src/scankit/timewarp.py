"""Dynamic time warping on the sphere, hard and smoothed.

The hard variant returns the minimal-cost monotone alignment between two
gaze sequences under the great-circle ground distance. The smoothed
variant replaces the minimum with a soft-min,

    softmin_gamma(a_1..a_N) = -gamma * log sum_i exp(-a_i / gamma),

which makes the objective differentiable; gamma = 0 recovers the hard
value exactly. The gradient is obtained from the standard backward
recursion that yields the expected alignment weights, then chained
through the derivative of the chord-based ground distance.

Gradients are taken with respect to the first sequence's raw 3D
coordinates; callers that re-normalize points to the sphere apply the
normalization Jacobian themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sphere import Scanpath, spherical_distance

# Chord smoothing inside the gradient path only: keeps d(ground distance)
# bounded when a pair of points coincides, without measurably changing
# values elsewhere.
_GRAD_CHORD_EPS = 1e-8


def _as_points(x) -> np.ndarray:
    pts = x.points if isinstance(x, Scanpath) else np.asarray(x, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
        raise ValueError("expected a Scanpath or a (T, 3) point array")
    return pts


def cost_matrix_spherical(r, s) -> np.ndarray:
    """Pairwise great-circle distances, entry (i, j) = dist(r_i, s_j)."""
    rp = _as_points(r)
    sp = _as_points(s)
    return spherical_distance(rp[:, np.newaxis, :], sp[np.newaxis, :, :])


@dataclass(frozen=True)
class AlignmentPath:
    """A monotone alignment: (i, j) pairs from (0, 0) to (n-1, m-1)."""

    pairs: tuple
    n: int
    m: int

    @property
    def matrix(self) -> np.ndarray:
        """Binary n x m matrix with ones on the alignment cells."""
        a = np.zeros((self.n, self.m), dtype=int)
        for i, j in self.pairs:
            a[i, j] = 1
        return a


def dtw_hard(cost: np.ndarray):
    """Minimal monotone path cost and one path attaining it.

    Ties are broken preferring the diagonal, then vertical, then
    horizontal predecessor, so returned paths are deterministic.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.size == 0:
        raise ValueError("dtw_hard: cost must be a nonempty 2D matrix")
    n, m = cost.shape
    acc = np.full((n, m), np.inf)
    acc[0, 0] = cost[0, 0]
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + cost[i, 0]
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + cost[0, j]
    for i in range(1, n):
        for j in range(1, m):
            acc[i, j] = cost[i, j] + min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])

    pairs = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while (i, j) != (0, 0):
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            best = min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
            if acc[i - 1, j - 1] == best:
                i, j = i - 1, j - 1
            elif acc[i - 1, j] == best:
                i -= 1
            else:
                j -= 1
        pairs.append((i, j))
    pairs.reverse()
    return float(acc[n - 1, m - 1]), AlignmentPath(tuple(pairs), n, m)


def _softmin3(a, b, c, gamma):
    """Stable soft-min of three arrays; gamma = 0 gives the hard min."""
    if gamma == 0.0:
        return np.minimum(np.minimum(a, b), c)
    lo = np.minimum(np.minimum(a, b), c)
    # lo may be +/-inf on padded borders; the shifted sum stays finite there.
    lo_safe = np.where(np.isfinite(lo), lo, 0.0)
    total = (
        np.exp(-(a - lo_safe) / gamma)
        + np.exp(-(b - lo_safe) / gamma)
        + np.exp(-(c - lo_safe) / gamma)
    )
    return np.where(np.isfinite(lo), lo_safe - gamma * np.log(total), lo)


def _forward(cost: np.ndarray, gamma: float) -> np.ndarray:
    """Accumulated soft-DTW table, padded to (B, n+2, m+2) for the backward pass."""
    B, n, m = cost.shape
    R = np.full((B, n + 2, m + 2), np.inf)
    R[:, 0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            R[:, i, j] = cost[:, i - 1, j - 1] + _softmin3(
                R[:, i - 1, j - 1], R[:, i - 1, j], R[:, i, j - 1], gamma
            )
    return R


def _backward(cost: np.ndarray, R: np.ndarray, gamma: float) -> np.ndarray:
    """Expected alignment weights E, shape (B, n, m); d(value)/d(cost) = E."""
    B, n, m = cost.shape
    D = np.zeros((B, n + 2, m + 2))
    D[:, 1 : n + 1, 1 : m + 1] = cost
    R = R.copy()
    R[:, n + 1, :] = -np.inf
    R[:, :, m + 1] = -np.inf
    R[:, n + 1, m + 1] = R[:, n, m]
    E = np.zeros((B, n + 2, m + 2))
    E[:, n + 1, m + 1] = 1.0
    for i in range(n, 0, -1):
        for j in range(m, 0, -1):
            # Exponents are <= 0 by the DP inequality, so no overflow.
            a = np.exp((R[:, i + 1, j] - R[:, i, j] - D[:, i + 1, j]) / gamma)
            b = np.exp((R[:, i, j + 1] - R[:, i, j] - D[:, i, j + 1]) / gamma)
            c = np.exp((R[:, i + 1, j + 1] - R[:, i, j] - D[:, i + 1, j + 1]) / gamma)
            E[:, i, j] = a * E[:, i + 1, j] + b * E[:, i, j + 1] + c * E[:, i + 1, j + 1]
    return E[:, 1 : n + 1, 1 : m + 1]


def soft_dtw(cost: np.ndarray, gamma: float = 1.0) -> float:
    """Soft-DTW value of a cost matrix; gamma = 0 reproduces dtw_hard."""
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.size == 0:
        raise ValueError("soft_dtw: cost must be a nonempty 2D matrix")
    if gamma < 0:
        raise ValueError("soft_dtw: gamma must be >= 0")
    if gamma == 0.0:
        return dtw_hard(cost)[0]
    R = _forward(cost[np.newaxis], gamma)
    return float(R[0, cost.shape[0], cost.shape[1]])


def soft_dtw_spherical(r, s, gamma: float = 1.0) -> float:
    """Soft-DTW of two gaze sequences under the great-circle distance."""
    return soft_dtw(cost_matrix_spherical(r, s), gamma)


def soft_dtw_spherical_batch(r_stack: np.ndarray, s_stack: np.ndarray, gamma: float = 1.0) -> np.ndarray:
    """Values for a stack of pairs; r_stack, s_stack are (B, n|m, 3)."""
    r_stack = np.asarray(r_stack, dtype=float)
    s_stack = np.asarray(s_stack, dtype=float)
    cost = spherical_distance(r_stack[:, :, np.newaxis, :], s_stack[:, np.newaxis, :, :])
    if gamma == 0.0:
        B, n, m = cost.shape
        acc = np.full((B, n + 1, m + 1), np.inf)
        acc[:, 0, 0] = 0.0
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                acc[:, i, j] = cost[:, i - 1, j - 1] + np.minimum(
                    np.minimum(acc[:, i - 1, j - 1], acc[:, i - 1, j]), acc[:, i, j - 1]
                )
        return acc[:, n, m]
    R = _forward(cost, gamma)
    return R[:, cost.shape[1], cost.shape[2]]


def soft_dtw_spherical_grad_batch(r_stack: np.ndarray, s_stack: np.ndarray, gamma: float = 1.0):
    """Values and gradients w.r.t. r_stack for a stack of pairs.

    Returns (values (B,), grads (B, n, 3)). Gradients treat the points of
    r as free 3D coordinates. Not defined at gamma = 0.
    """
    if gamma <= 0:
        raise ValueError("soft_dtw_spherical_grad_batch: gamma must be > 0")
    r_stack = np.asarray(r_stack, dtype=float)
    s_stack = np.asarray(s_stack, dtype=float)
    diff = r_stack[:, :, np.newaxis, :] - s_stack[:, np.newaxis, :, :]  # (B, n, m, 3)
    chord2 = np.sum(diff * diff, axis=-1)
    cost = 2.0 * np.arcsin(np.clip(0.5 * np.sqrt(chord2), -1.0, 1.0))
    R = _forward(cost, gamma)
    values = R[:, cost.shape[1], cost.shape[2]].copy()
    E = _backward(cost, R, gamma)
    # d(dist)/d(r_i) = (r_i - s_j) / (t * sqrt(1 - t^2/4)), t^2 = chord^2 + eps^2.
    t2 = chord2 + _GRAD_CHORD_EPS**2
    denom = np.sqrt(t2) * np.sqrt(np.maximum(1.0 - 0.25 * t2, 1e-12))
    grads = np.einsum("bnm,bnmc->bnc", E / denom, diff)
    return values, grads


def soft_dtw_grad(r, s, gamma: float = 1.0) -> np.ndarray:
    """Gradient of soft_dtw_spherical(r, s) w.r.t. the raw 3D points of r."""
    rp = _as_points(r)
    sp = _as_points(s)
    _, grads = soft_dtw_spherical_grad_batch(rp[np.newaxis], sp[np.newaxis], gamma)
    return grads[0]
