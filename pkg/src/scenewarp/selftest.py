"""Built-in verification suites pitting fast paths against brute-force oracles.

Run via `scenewarp selftest`. Each suite prints one PASS/FAIL line; run()
returns the number of failures.
"""

from __future__ import annotations

import numpy as np

from .camera import CameraIntrinsics, EgoMotion, focal_from_fov, pixel_to_point, point_to_pixel, yaw_matrix
from .config import Config
from .kinematics import Kinematics, angular_likelihood, speed_values
from .pipeline import camera_for
from .scenesim import generate_scene, render
from .warp import hypothesis_landings, splat, splat_reference

__all__ = ["run"]


def _random_instance(rng: np.random.Generator, size: int, k_obj: int):
    cam = CameraIntrinsics(size, size, focal_from_fov(size, np.pi / 2))
    frame = rng.uniform(0.0, 1.0, (size, size, 3))
    depth = rng.uniform(1.0, 5.0, (size, size))
    raw = rng.uniform(0.05, 1.0, (k_obj + 1, size, size))
    seg = raw / raw.sum(axis=0, keepdims=True)
    locations = np.column_stack([
        rng.uniform(-1.0, 1.0, k_obj),
        rng.uniform(2.0, 4.0, k_obj),
        rng.uniform(-0.5, 0.5, k_obj),
    ]).reshape(k_obj, 3)
    velocities = rng.uniform(-0.2, 0.2, (k_obj, 3))
    omegas = rng.uniform(-0.4, 0.4, k_obj)
    angular = np.zeros((k_obj, 16))
    angular[:, 7] = 1.0
    kin = Kinematics(velocity=velocities, angular=angular, omega_point=omegas)
    ego = EgoMotion(rng.uniform(-0.2, 0.2, 3), float(rng.uniform(-0.3, 0.3)))
    return frame, depth, seg, kin, locations, ego, cam


def splat_bitexact(trials: int = 100, seed: int = 2024) -> bool:
    """Production splat == quadruple-loop reference, bit for bit."""
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        size = int(rng.integers(3, 9))
        k_obj = int(rng.integers(0, 3))
        frame, depth, seg, kin, locations, ego, cam = _random_instance(rng, size, k_obj)
        fast = splat(frame, depth, seg, kin, locations, ego, cam, beta=1.0)
        slow = splat_reference(frame, depth, seg, kin, locations, ego, cam, beta=1.0)
        for a, b_ in zip(fast, slow):
            if not np.array_equal(a, b_):
                return False
    return True


def contributed_portions(depth, seg, kin, locations, ego, cam):
    """Per-source-pixel total splatted portion and the all-slots-interior mask.

    Sums pi * max(1-|i'-p|,0) * max(1-|j'-q|,0) over the 4 neighbor cells of
    every slot's landing, using the same expressions as the splat kernels.
    """
    size_h, size_w = depth.shape
    cols, rows, _, valid = hypothesis_landings(
        depth, locations, kin.velocity, kin.omega_point, ego, cam)
    c0 = np.floor(cols)
    r0 = np.floor(rows)
    interior = valid & (c0 >= 0) & (c0 + 1 <= size_w - 1) & (r0 >= 0) & (r0 + 1 <= size_h - 1)
    total = np.zeros_like(depth)
    for dr in (0.0, 1.0):
        for dc in (0.0, 1.0):
            wx = np.maximum(1.0 - np.abs(cols - (c0 + dc)), 0.0)
            wy = np.maximum(1.0 - np.abs(rows - (r0 + dr)), 0.0)
            total += (seg * (wx * wy)).sum(axis=0)
    return total, interior.all(axis=0)


def mass_conservation(trials: int = 50, seed: int = 77) -> bool:
    """Fully-interior source pixels contribute a total portion of 1 +- 1e-6."""
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        size = int(rng.integers(4, 10))
        k_obj = int(rng.integers(0, 3))
        frame, depth, seg, kin, locations, ego, cam = _random_instance(rng, size, k_obj)
        total, all_interior = contributed_portions(depth, seg, kin, locations, ego, cam)
        if not np.any(all_interior):
            continue
        if np.max(np.abs(total[all_interior] - 1.0)) > 1e-6:
            return False
    return True


def angular_bruteforce(seed: int = 11) -> bool:
    """Cross-correlation likelihood equals the O(b^2) enumeration exactly."""
    rng = np.random.default_rng(seed)
    for b in (8, 16, 32):
        speeds = speed_values(b)
        residues = (np.round(speeds * b / (2 * np.pi)).astype(int)) % b
        for _ in range(100):
            prev = rng.uniform(0, 1, b)
            prev /= prev.sum()
            cur = rng.uniform(0, 1, b)
            cur /= cur.sum()
            brute = np.zeros(b)
            index_of = {int(r): s for s, r in enumerate(residues)}
            for l in range(b):
                for m in range(b):
                    brute[index_of[(m - l) % b]] += prev[l] * cur[m]
            if not np.array_equal(angular_likelihood(cur, prev), brute):
                return False
    return True


def geometry_roundtrip(samples: int = 100_000, seed: int = 5) -> bool:
    """Pixel<->point roundtrips < 1e-6 relative; yaw group laws < 1e-9."""
    rng = np.random.default_rng(seed)
    cam = CameraIntrinsics(128, 128, focal_from_fov(128, np.pi / 2))
    i = rng.uniform(-cam.half_width, cam.half_width, samples)
    j = rng.uniform(-cam.half_height, cam.half_height, samples)
    depth = rng.uniform(0.1, 50.0, samples)
    points = pixel_to_point(i, j, depth, cam)
    if np.max(np.abs(np.linalg.norm(points, axis=-1) - depth) / depth) > 1e-12:
        return False
    i2, j2, d2 = point_to_pixel(points, cam)
    err = max(
        np.max(np.abs(i2 - i) / np.maximum(1.0, np.abs(i))),
        np.max(np.abs(j2 - j) / np.maximum(1.0, np.abs(j))),
        np.max(np.abs(d2 - depth) / depth),
    )
    if err > 1e-6:
        return False
    angles = rng.uniform(-10, 10, (samples // 100, 2))
    for a, b_ in angles:
        if np.max(np.abs(yaw_matrix(a) @ yaw_matrix(b_) - yaw_matrix(a + b_))) > 1e-9:
            return False
        if np.max(np.abs(yaw_matrix(a) @ yaw_matrix(-a) - np.eye(3))) > 1e-9:
            return False
    return True


def render_consistency(seed: int = 9) -> bool:
    """Rendered depth is Euclidean (unprojection lands on the surface) and
    labels match an independent nearest-hit query per pixel."""
    config = Config(resolution=32, seed=seed)
    spec = generate_scene(config, seed)
    cam = camera_for(config)
    out = render(spec, 0, cam)
    i = np.arange(cam.width) - cam.half_width
    j = cam.half_height - np.arange(cam.height)
    from .scenesim import step_scene
    cam_pos, cam_yaw, poses = step_scene(spec, 0)
    rot = yaw_matrix(cam_yaw)
    rng = np.random.default_rng(seed)
    for _ in range(500):
        r = int(rng.integers(0, cam.height))
        c = int(rng.integers(0, cam.width))
        point_cam = pixel_to_point(i[c], j[r], out.depth[r, c], cam)
        point_world = rot @ point_cam + cam_pos
        label = out.labels[r, c]
        if label == 0:
            dist_wall = min(
                spec.room_half - abs(point_world[0]),
                spec.room_half - abs(point_world[1]),
                abs(point_world[2]),
                abs(spec.room_height - point_world[2]),
            )
            if dist_wall > 1e-4:
                return False
        else:
            obj = spec.objects[label - 1]
            center, yaw = poses[label - 1]
            local = yaw_matrix(-yaw) @ (point_world - center)
            if obj.shape == "sphere":
                if abs(np.linalg.norm(local) - obj.half_size) > 1e-4:
                    return False
            else:
                if abs(np.max(np.abs(local)) - obj.half_size) > 1e-4:
                    return False
    return True


_SUITES = [
    ("geometry roundtrip (1e5 samples)", geometry_roundtrip),
    ("splat bit-for-bit vs quadruple loop (100 instances)", splat_bitexact),
    ("splat mass conservation", mass_conservation),
    ("angular likelihood vs O(b^2) enumeration", angular_bruteforce),
    ("render depth/label consistency", render_consistency),
]


def run(verbose: bool = True) -> int:
    failures = 0
    for name, fn in _SUITES:
        ok = fn()
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1
    return failures
