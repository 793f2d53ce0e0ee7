"""Pinhole camera geometry: pixel/ray/3D-point mappings and yaw-induced apparent motion.

COORDINATE CONVENTIONS (used throughout the package):

Camera frame (right-handed):
  - x-axis: right
  - y-axis: forward, along the optical axis (points with y > 0 are in front)
  - z-axis: up

Pixel coordinates:
  - Continuous, unit-spaced grid centers, symmetric about the image center:
    |i| <= (width-1)/2 and |j| <= (height-1)/2.
    For width 128 the column centers are -63.5, -62.5, ..., +63.5; for odd
    widths they are integers.
  - i increases to the right, j increases UPWARD (so j maps to +z).
  - Raster arrays are indexed [row, col] with row 0 the TOP of the image:
        i = col - (width-1)/2,      j = (height-1)/2 - row.

Depth means Euclidean distance from the camera center to the surface point,
not the y (optical-axis) component.

A pixel (i, j) with depth D maps to the 3D point D/sqrt(i^2+j^2+f^2) * [i, f, j];
conversely a point (x, y, z) with y > 0 appears at [i, j] = (f/y)[x, z] with
depth sqrt(x^2+y^2+z^2).

Yaw rotations: yaw_matrix(theta) rotates counter-clockwise (viewed from above,
i.e. from +z) by theta, mapping +x toward +y. It leaves z fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CameraIntrinsics",
    "EgoMotion",
    "focal_from_fov",
    "pixel_grid",
    "pixel_to_point",
    "point_to_pixel",
    "yaw_matrix",
    "apparent_location",
]


@dataclass(frozen=True)
class CameraIntrinsics:
    """Image size in pixels and focal length in pixel units."""

    width: int
    height: int
    focal: float

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be >= 1, got {self.width}x{self.height}")
        if not self.focal > 0:
            raise ValueError(f"focal length must be positive, got {self.focal}")

    @property
    def half_width(self) -> float:
        return (self.width - 1) / 2.0

    @property
    def half_height(self) -> float:
        return (self.height - 1) / 2.0


@dataclass(frozen=True)
class EgoMotion:
    """Camera motion between two frames, expressed in the earlier camera frame.

    velocity: translation per frame step (camera axes: x right, y forward, z up).
    yaw_rate: radians per frame step, positive counter-clockwise seen from above.
    """

    velocity: np.ndarray
    yaw_rate: float

    def __post_init__(self):
        v = np.asarray(self.velocity, dtype=np.float64)
        if v.shape != (3,):
            raise ValueError(f"velocity must be a 3-vector, got shape {v.shape}")
        if not (np.all(np.isfinite(v)) and np.isfinite(self.yaw_rate)):
            raise ValueError("egomotion components must be finite")
        object.__setattr__(self, "velocity", v)

    @classmethod
    def zero(cls) -> "EgoMotion":
        return cls(np.zeros(3), 0.0)


def focal_from_fov(width: int, fov: float) -> float:
    """Focal length in pixels for a horizontal field of view.

    Uses the grid-center half-width (width-1)/2, matching the symmetric pixel
    coordinate range, so focal = ((width-1)/2) / tan(fov/2).
    """
    if not 0.0 < fov < np.pi:
        raise ValueError(f"fov must be in (0, pi), got {fov}")
    return ((width - 1) / 2.0) / np.tan(fov / 2.0)


def pixel_grid(cam: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """(i, j) coordinate rasters of shape (height, width), row 0 at the top."""
    cols = np.arange(cam.width, dtype=np.float64) - cam.half_width
    rows = cam.half_height - np.arange(cam.height, dtype=np.float64)
    i = np.broadcast_to(cols[None, :], (cam.height, cam.width))
    j = np.broadcast_to(rows[:, None], (cam.height, cam.width))
    return i, j


def pixel_to_point(i, j, depth, cam: CameraIntrinsics) -> np.ndarray:
    """3D camera-frame point(s) for pixel coordinate(s) at the given depth.

    Broadcasts over array inputs; the returned array has shape (..., 3) and
    Euclidean norm equal to ``depth``.
    """
    i = np.asarray(i, dtype=np.float64)
    j = np.asarray(j, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(depth <= 0):
        raise ValueError("depth must be strictly positive")
    f = cam.focal
    scale = depth / np.sqrt(i * i + j * j + f * f)
    return np.stack([i * scale, f * scale, j * scale], axis=-1)


def point_to_pixel(p, cam: CameraIntrinsics):
    """Project camera-frame point(s) to (i, j, depth).

    Points may project outside the pixel range; clipping is the caller's
    decision. Raises for points not strictly in front of the camera (y <= 0).
    """
    p = np.asarray(p, dtype=np.float64)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    if np.any(y <= 0):
        raise ValueError("point is behind the camera (y <= 0)")
    i = cam.focal * x / y
    j = cam.focal * z / y
    depth = np.sqrt(x * x + y * y + z * z)
    return i, j, depth


def yaw_matrix(theta: float) -> np.ndarray:
    """3x3 rotation about the vertical (z) axis by theta, CCW from above."""
    if not np.isfinite(theta):
        raise ValueError(f"yaw angle must be finite, got {theta}")
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def apparent_location(x, ego: EgoMotion) -> np.ndarray:
    """Where a static point observed at t-1 appears in the camera frame at t.

    Applies yaw_matrix(-yaw_rate) @ (x - velocity): the camera translated by
    ``velocity`` and yawed by ``yaw_rate`` between the frames. Broadcasts over
    trailing-(3,) arrays.
    """
    x = np.asarray(x, dtype=np.float64)
    rot = yaw_matrix(-ego.yaw_rate)
    return (x - ego.velocity) @ rot.T
