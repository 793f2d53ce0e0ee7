"""Training-objective suite: prediction error, self-consistency, regularizers.

total = image + lambda * (location + pose + center + collapse)

These are diagnostics and acceptance instruments here, not optimization
targets; there is no gradient path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, pixel_grid, pixel_to_point

__all__ = [
    "LossReport",
    "js_divergence",
    "image_loss",
    "location_loss",
    "pose_loss",
    "center_loss",
    "collapse_loss",
    "total_loss",
]

_CENTER_EPS = 1e-6


@dataclass(frozen=True)
class LossReport:
    image: float
    location: float
    pose: float
    center: float
    collapse: float
    total: float
    loss_lambda: float

    def to_dict(self) -> dict:
        return {
            "image": self.image,
            "location": self.location,
            "pose": self.pose,
            "center": self.center,
            "collapse": self.collapse,
            "total": self.total,
            "lambda": self.loss_lambda,
        }


def image_loss(pred: np.ndarray, truth: np.ndarray) -> float:
    """MSE over all pixels and channels."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    diff = pred - truth
    return float(np.mean(diff * diff))


def location_loss(pred_locations: np.ndarray, inferred_locations: np.ndarray,
                  match: np.ndarray) -> float:
    """Sum over foreground objects of ||match-mixed prediction - inference||^2.

    pred_locations: (K+1, 3) predicted t+1 locations for the K objects and the
    background slot (zero vector by convention). inferred_locations: (K, 3)
    t+1 inferences. match: (K+1, K+1) rows matching t+1 entities against t.
    """
    pred_locations = np.asarray(pred_locations, dtype=np.float64)
    inferred_locations = np.asarray(inferred_locations, dtype=np.float64)
    match = np.asarray(match, dtype=np.float64)
    total = 0.0
    for k in range(len(inferred_locations)):
        mixed = match[k] @ pred_locations
        delta = mixed - inferred_locations[k]
        total += float(delta @ delta)
    return total


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence, natural log, midpoint mixture. Bounded by ln 2."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("distributions must have equal shape")
    m = 0.5 * (p + q)
    def half_kl(a):
        mask = a > 0
        return float(np.sum(a[mask] * np.log(a[mask] / m[mask])))
    return 0.5 * half_kl(p) + 0.5 * half_kl(q)


def pose_loss(pred_poses: np.ndarray, inferred_poses: np.ndarray,
              match: np.ndarray) -> float:
    """Sum over foreground objects of JS(inferred || match-mixed prediction).

    pred_poses: (K+1, b) with a uniform background slot; inferred_poses: (K, b).
    """
    pred_poses = np.asarray(pred_poses, dtype=np.float64)
    inferred_poses = np.asarray(inferred_poses, dtype=np.float64)
    match = np.asarray(match, dtype=np.float64)
    total = 0.0
    for k in range(len(inferred_poses)):
        mixed = match[k] @ pred_poses
        total += js_divergence(inferred_poses[k], mixed)
    return total


def center_loss(locations: np.ndarray, seg: np.ndarray, depth: np.ndarray,
                cam: CameraIntrinsics) -> float:
    """Squared distance between each object's location and its pixel centroid.

    The centroid averages the 3D locations of all pixels weighted by the
    object's segmentation probability (normalized by the total mass + eps);
    objects with total mass below eps contribute nothing.
    """
    locations = np.asarray(locations, dtype=np.float64)
    seg = np.asarray(seg, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    i, j = pixel_grid(cam)
    points = pixel_to_point(i, j, depth, cam)
    total = 0.0
    for k in range(len(locations)):
        mass = float(seg[k].sum())
        if mass < _CENTER_EPS:
            continue
        centroid = (seg[k][..., None] * points).sum(axis=(0, 1)) / (mass + _CENTER_EPS)
        delta = locations[k] - centroid
        total += float(delta @ delta)
    return total


def collapse_loss(locations: np.ndarray, shuffled_locations: np.ndarray,
                  delta: float) -> float:
    """-sum_k min(delta, L1 distance to the paired shuffled object).

    Always <= 0; saturates at -K*delta when all pairs are at least delta apart
    and degenerates to 0 for coincident locations (the worst case it penalizes).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    locations = np.asarray(locations, dtype=np.float64)
    shuffled_locations = np.asarray(shuffled_locations, dtype=np.float64)
    if locations.shape != shuffled_locations.shape:
        raise ValueError("location arrays must have equal shape")
    l1 = np.abs(locations - shuffled_locations).sum(axis=-1)
    return float(-np.minimum(delta, l1).sum())


def total_loss(image: float, location: float, pose: float, center: float,
               collapse: float, loss_lambda: float) -> LossReport:
    total = image + loss_lambda * (location + pose + center + collapse)
    return LossReport(image=float(image), location=float(location), pose=float(pose),
                      center=float(center), collapse=float(collapse),
                      total=float(total), loss_lambda=float(loss_lambda))
