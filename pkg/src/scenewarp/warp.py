"""Forward warping: rigid per-pixel motion, bilinear splatting, prediction merge.

Every source pixel is split into K+1 portions by the segmentation map; each
portion moves rigidly with its object (or stays static with the background,
modulo egomotion), lands at a generally fractional pixel position, and is
scattered to the 4 surrounding grid cells with bilinear weights. Contributions
are further weighted by exp(-beta * predicted_depth) so nearer surfaces
occlude farther ones. The warped color is the weighted average of all
contributions; warp_weight is the total landed portion (bilinear x slot
probability only, no depth factor), clamped to [0, 1].

Accumulation order is part of the contract: contributions are summed per
target in (source row, source col, slot, neighbor) order, where neighbors are
visited row-major. splat_reference implements the same arithmetic as a direct
quadruple loop and must agree with splat bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, EgoMotion, pixel_grid, pixel_to_point, yaw_matrix
from .kinematics import Kinematics

__all__ = [
    "PredictionBundle",
    "pixel_target",
    "hypothesis_landings",
    "splat",
    "splat_reference",
    "merge",
]

# Landings this close to a grid center snap onto it, so zero flow reproduces
# the source raster exactly despite project/unproject float rounding.
_SNAP_EPS = 1e-9

_MIN_FORWARD = 1e-9


@dataclass(frozen=True)
class PredictionBundle:
    """Warped, imagined, and merged predictions for one target frame."""

    warp_image: np.ndarray
    warp_depth: np.ndarray   # 0 where nothing landed (see warp_weight)
    warp_weight: np.ndarray
    imag_image: np.ndarray
    imag_depth: np.ndarray
    merged_image: np.ndarray
    merged_depth: np.ndarray


def pixel_target(points, center, velocity, omega: float, ego: EgoMotion) -> np.ndarray:
    """Predicted camera-frame location at t+1 of surface point(s) on one object.

    The point rotates about the object center by omega, advances by the object
    velocity, and is then expressed in the next camera frame. The rotation is
    computed as M @ p + (I - M) @ c, which is exactly the identity when all
    motion terms are zero. The background is the special case
    velocity = 0, omega = 0 (center is then irrelevant).
    """
    points = np.asarray(points, dtype=np.float64)
    rot_obj = yaw_matrix(omega)
    shift = (np.eye(3) - rot_obj) @ np.asarray(center, dtype=np.float64) \
        + np.asarray(velocity, dtype=np.float64) - ego.velocity
    moved = points @ rot_obj.T + shift
    return moved @ yaw_matrix(-ego.yaw_rate).T


def hypothesis_landings(depth_t: np.ndarray, locations: np.ndarray, velocities: np.ndarray,
                        omegas: np.ndarray, ego: EgoMotion, cam: CameraIntrinsics):
    """Per-slot predicted landings of every source pixel.

    Returns (cols, rows, pred_depth, valid), each of shape (K+1, H, W): the
    fractional raster coordinates where each pixel's slot-k portion lands, the
    predicted Euclidean distance of that 3D point, and whether it projects
    (in front of the camera with finite coordinates). Slot K is the background.
    """
    i, j = pixel_grid(cam)
    points = pixel_to_point(i, j, depth_t, cam)
    k_obj = len(locations)
    shape = (k_obj + 1,) + depth_t.shape
    cols = np.zeros(shape)
    rows = np.zeros(shape)
    pred_depth = np.zeros(shape)
    valid = np.zeros(shape, dtype=bool)
    zeros3 = np.zeros(3)
    for k in range(k_obj + 1):
        if k < k_obj:
            moved = pixel_target(points, locations[k], velocities[k], float(omegas[k]), ego)
        else:
            moved = pixel_target(points, zeros3, zeros3, 0.0, ego)
        x, y, z = moved[..., 0], moved[..., 1], moved[..., 2]
        ok = y > _MIN_FORWARD
        safe_y = np.where(ok, y, 1.0)
        ci = cam.focal * x / safe_y + cam.half_width
        rj = cam.half_height - cam.focal * z / safe_y
        ok &= np.isfinite(ci) & np.isfinite(rj)
        ci = np.where(np.abs(ci - np.rint(ci)) < _SNAP_EPS, np.rint(ci), ci)
        rj = np.where(np.abs(rj - np.rint(rj)) < _SNAP_EPS, np.rint(rj), rj)
        cols[k] = np.where(ok, ci, 0.0)
        rows[k] = np.where(ok, rj, 0.0)
        pred_depth[k] = np.sqrt(x * x + y * y + z * z)
        valid[k] = ok
    return cols, rows, pred_depth, valid


def _landings_for(frame_t, depth_t, seg_t, kin: Kinematics, locations, ego, cam, beta):
    frame_t = np.asarray(frame_t, dtype=np.float64)
    depth_t = np.asarray(depth_t, dtype=np.float64)
    seg_t = np.asarray(seg_t, dtype=np.float64)
    h, w = depth_t.shape
    if frame_t.shape != (h, w, 3):
        raise ValueError(f"frame shape {frame_t.shape} does not match depth {depth_t.shape}")
    if seg_t.shape != (len(locations) + 1, h, w):
        raise ValueError(f"segmentation shape {seg_t.shape} inconsistent with K+1 slots")
    cols, rows, pred_depth, valid = hypothesis_landings(
        depth_t, locations, kin.velocity, kin.omega_point, ego, cam)
    occlusion = np.exp(-beta * pred_depth)
    return frame_t, depth_t, seg_t, cols, rows, pred_depth, valid, occlusion


def splat(frame_t, depth_t, seg_t, kin: Kinematics, locations, ego: EgoMotion,
          cam: CameraIntrinsics, beta: float):
    """Forward-splat frame t into the next frame.

    Returns (warp_image, warp_depth, warp_weight). warp_depth is 0 where no
    portion landed; those pixels also have warp_weight 0 and a black
    warp_image per the normalization's zero-denominator branch.
    """
    frame_t, depth_t, seg_t, cols, rows, pred_depth, valid, occlusion = _landings_for(
        frame_t, depth_t, seg_t, kin, locations, ego, cam, beta)
    h, w = depth_t.shape

    # Contribution arrays ordered (source row, source col, slot, neighbor).
    cp = cols.transpose(1, 2, 0)[..., None]            # (H, W, K+1, 1)
    rp = rows.transpose(1, 2, 0)[..., None]
    c0 = np.floor(cp)
    r0 = np.floor(rp)
    ncol = np.concatenate([c0, c0 + 1.0, c0, c0 + 1.0], axis=-1)   # (H, W, K+1, 4)
    nrow = np.concatenate([r0, r0, r0 + 1.0, r0 + 1.0], axis=-1)
    wx = np.maximum(1.0 - np.abs(cp - ncol), 0.0)
    wy = np.maximum(1.0 - np.abs(rp - nrow), 0.0)
    pi = seg_t.transpose(1, 2, 0)[..., None]
    occ = occlusion.transpose(1, 2, 0)[..., None]
    weight = ((pi * occ) * wx) * wy
    portion = (pi * wx) * wy

    keep = (valid.transpose(1, 2, 0)[..., None]
            & (ncol >= 0) & (ncol <= w - 1) & (nrow >= 0) & (nrow <= h - 1))
    keep = np.broadcast_to(keep, weight.shape).ravel()
    target = (nrow * w + ncol).astype(np.int64).ravel()[keep]

    weight_flat = weight.ravel()[keep]
    portion_flat = portion.ravel()[keep]
    depth_flat = np.broadcast_to(
        pred_depth.transpose(1, 2, 0)[..., None], weight.shape).ravel()[keep]

    size = h * w
    den = np.bincount(target, weights=weight_flat, minlength=size)
    num = np.empty((size, 3))
    for ch in range(3):
        color = np.broadcast_to(frame_t[:, :, ch][:, :, None, None], weight.shape)
        num[:, ch] = np.bincount(target, weights=weight_flat * color.ravel()[keep],
                                 minlength=size)
    num_depth = np.bincount(target, weights=weight_flat * depth_flat, minlength=size)
    coverage = np.bincount(target, weights=portion_flat, minlength=size)

    covered = den > 0.0
    warp_image = np.zeros((size, 3))
    warp_image[covered] = num[covered] / den[covered, None]
    warp_depth = np.zeros(size)
    warp_depth[covered] = num_depth[covered] / den[covered]
    warp_weight = np.minimum(1.0, coverage)
    return (warp_image.reshape(h, w, 3), warp_depth.reshape(h, w),
            warp_weight.reshape(h, w))


def splat_reference(frame_t, depth_t, seg_t, kin: Kinematics, locations, ego: EgoMotion,
                    cam: CameraIntrinsics, beta: float):
    """Direct quadruple-loop splat over (target pixel, source pixel, slot).

    Same landing geometry and per-term arithmetic as splat, with per-target
    sums accumulated in (source row, source col, slot) order; used by the
    self-test suite as the bit-for-bit oracle for the production splat.
    """
    frame_t, depth_t, seg_t, cols, rows, pred_depth, valid, occlusion = _landings_for(
        frame_t, depth_t, seg_t, kin, locations, ego, cam, beta)
    h, w = depth_t.shape
    n_slots = seg_t.shape[0]
    warp_image = np.zeros((h, w, 3))
    warp_depth = np.zeros((h, w))
    warp_weight = np.zeros((h, w))
    for q in range(h):
        for p in range(w):
            den = 0.0
            num = np.zeros(3)
            num_depth = 0.0
            coverage = 0.0
            for r in range(h):
                for c in range(w):
                    for k in range(n_slots):
                        if not valid[k, r, c]:
                            continue
                        wx = max(1.0 - abs(cols[k, r, c] - p), 0.0)
                        wy = max(1.0 - abs(rows[k, r, c] - q), 0.0)
                        if wx <= 0.0 or wy <= 0.0:
                            continue
                        pi = seg_t[k, r, c]
                        weight = ((pi * occlusion[k, r, c]) * wx) * wy
                        den += weight
                        num += weight * frame_t[r, c]
                        num_depth += weight * pred_depth[k, r, c]
                        coverage += (pi * wx) * wy
            if den > 0.0:
                warp_image[q, p] = num / den
                warp_depth[q, p] = num_depth / den
            warp_weight[q, p] = min(1.0, coverage)
    return warp_image, warp_depth, warp_weight


def merge(warp: np.ndarray, warp_weight: np.ndarray, imagined: np.ndarray) -> np.ndarray:
    """Pixel-wise convex combination: warp where covered, imagination elsewhere."""
    warp = np.asarray(warp, dtype=np.float64)
    imagined = np.asarray(imagined, dtype=np.float64)
    warp_weight = np.asarray(warp_weight, dtype=np.float64)
    if warp.shape != imagined.shape:
        raise ValueError(f"shape mismatch: {warp.shape} vs {imagined.shape}")
    if warp_weight.shape != warp.shape[: warp_weight.ndim] or np.any(
            (warp_weight < 0) | (warp_weight > 1)):
        raise ValueError("warp_weight must match the raster shape with values in [0, 1]")
    wgt = warp_weight if warp.ndim == warp_weight.ndim else warp_weight[..., None]
    return warp * wgt + imagined * (1.0 - wgt)
