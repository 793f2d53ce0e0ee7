"""Procedural scenes and the ground-truth ray-cast renderer.

A scene is a closed textured box room (walls at x,y = +-room_half, floor z=0,
ceiling z=room_height) containing K rigid objects (spheres or yaw-rotated
cubes) that translate horizontally with constant velocity and spin with
constant yaw rate. The camera translates and pans with random per-frame steps
at a fixed height. Rendering casts one ray per pixel (direction [i, f, j] in
the camera frame, rotated by the camera yaw) and keeps the nearest hit; depth
is the Euclidean distance to that hit, labels are 0 for the room and the
object id (1..K) otherwise. Everything is unlit procedural texture, so renders
are exact and deterministic.

World frame: x east, y north, z up. A camera with yaw 0 looks along +y;
positive yaw pans counter-clockwise (seen from above).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraIntrinsics, EgoMotion, pixel_grid, yaw_matrix
from .config import Config
from .kinematics import ObjectState, one_hot_pose
from .matching import identity_code
from .textures import Texture

__all__ = [
    "ObjectSpec",
    "SceneSpec",
    "RenderOutput",
    "Triplet",
    "SceneGenerationError",
    "generate_scene",
    "step_scene",
    "render",
    "render_sequence",
    "make_triplets",
    "bounding_radius",
    "world_to_camera",
    "camera_ego_motion",
    "scene_to_dict",
    "scene_from_dict",
]

SPHERE = "sphere"
BOX = "box"

_HIT_EPS = 1e-9


class SceneGenerationError(RuntimeError):
    """Raised when a scene cannot be populated within the retry budget."""


@dataclass(frozen=True)
class ObjectSpec:
    object_id: int
    shape: str
    half_size: float
    center0: np.ndarray
    yaw0: float
    velocity: np.ndarray
    yaw_rate: float
    texture: Texture

    def __post_init__(self):
        if self.shape not in (SPHERE, BOX):
            raise ValueError(f"unknown shape {self.shape!r}")
        if not self.half_size > 0:
            raise ValueError("half_size must be positive")
        c = np.asarray(self.center0, dtype=np.float64)
        v = np.asarray(self.velocity, dtype=np.float64)
        if c.shape != (3,) or v.shape != (3,):
            raise ValueError("center0 and velocity must be 3-vectors")
        if v[2] != 0.0:
            raise ValueError("objects move horizontally only (zero z-velocity)")
        object.__setattr__(self, "center0", c)
        object.__setattr__(self, "velocity", v)


@dataclass(frozen=True)
class SceneSpec:
    room_half: float
    room_height: float
    room_textures: tuple[Texture, ...]  # +x, -x, +y, -y walls, floor, ceiling
    objects: tuple[ObjectSpec, ...]
    camera_path: tuple[tuple[np.ndarray, float], ...]  # (position, yaw) per frame
    seed: int

    def __post_init__(self):
        if len(self.room_textures) != 6:
            raise ValueError("a room needs 6 face textures")


@dataclass(frozen=True)
class RenderOutput:
    image: np.ndarray   # (H, W, 3) RGB in [0, 1]
    depth: np.ndarray   # (H, W) Euclidean camera distance
    labels: np.ndarray  # (H, W) int: 0 background, 1..K object ids


@dataclass(frozen=True)
class Triplet:
    frames: tuple[RenderOutput, RenderOutput, RenderOutput]
    ego: tuple[EgoMotion, EgoMotion]
    truth: tuple[tuple[ObjectState, ...], ...]  # per frame, camera coordinates
    indices: tuple[int, int, int]
    camera: tuple[tuple[np.ndarray, float], ...]
    spec: SceneSpec = field(repr=False, compare=False, default=None)


def bounding_radius(obj: ObjectSpec) -> float:
    return obj.half_size * (math.sqrt(3.0) if obj.shape == BOX else 1.0)


def step_scene(spec: SceneSpec, t: int):
    """(camera position, camera yaw, [(object center, object yaw), ...]) at frame t."""
    if not 0 <= t < len(spec.camera_path):
        raise ValueError(f"frame index {t} outside sequence of {len(spec.camera_path)}")
    cam_pos, cam_yaw = spec.camera_path[t]
    poses = [(obj.center0 + t * obj.velocity, obj.yaw0 + t * obj.yaw_rate)
             for obj in spec.objects]
    return cam_pos, cam_yaw, poses


def world_to_camera(point: np.ndarray, cam_pos: np.ndarray, cam_yaw: float) -> np.ndarray:
    """World point into the camera frame (x right, y forward, z up)."""
    return yaw_matrix(-cam_yaw) @ (np.asarray(point, dtype=np.float64) - cam_pos)


def camera_ego_motion(pos_a, yaw_a, pos_b, yaw_b) -> EgoMotion:
    """Egomotion between two camera poses, expressed in the earlier camera frame."""
    velocity = yaw_matrix(-yaw_a) @ (np.asarray(pos_b, dtype=np.float64) - pos_a)
    return EgoMotion(velocity, yaw_b - yaw_a)


# ---------------------------------------------------------------------------
# generation


def generate_scene(config: Config, seed: int) -> SceneSpec:
    """Deterministic scene for (config, seed); objects never overlap or leave
    the room over the whole sequence."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    room_half, room_height = config.room_half, config.room_height
    room_textures = tuple(Texture.random(rng, config.texture_freq) for _ in range(6))

    # Camera: spawn on a ring facing roughly toward the room center, then take
    # random translation/pan steps, clamped away from the walls.
    radius = rng.uniform(1.5, max(1.6, room_half - 1.0))
    angle = rng.uniform(0.0, 2.0 * math.pi)
    pos = np.array([radius * math.cos(angle), radius * math.sin(angle), config.camera_height])
    toward_center = -pos[:2]
    yaw = math.atan2(-toward_center[0], toward_center[1]) + rng.uniform(-0.25, 0.25)
    path = [(pos.copy(), yaw)]
    wall_margin = 0.6
    # One lateral side per scene: per-step side flips would cancel out over a
    # sequence and leave a net forward/backward drift.
    side = math.pi if rng.uniform() < 0.5 else 0.0
    for _ in range(config.sequence_length - 1):
        if config.camera_heading_sector >= math.pi / 2:
            heading = rng.uniform(0.0, 2.0 * math.pi)
        else:
            # Sideways of the facing direction plus a bounded deviation; a
            # heading equal to yaw moves the camera to its right because yaw 0
            # looks along +y.
            offset = rng.uniform(-config.camera_heading_sector, config.camera_heading_sector)
            heading = yaw + side + offset
        step = rng.uniform(*config.camera_step)
        pos = pos + np.array([math.cos(heading) * step, math.sin(heading) * step, 0.0])
        pos[0] = np.clip(pos[0], -(room_half - wall_margin), room_half - wall_margin)
        pos[1] = np.clip(pos[1], -(room_half - wall_margin), room_half - wall_margin)
        yaw = yaw + rng.uniform(-config.camera_pan, config.camera_pan)
        path.append((pos.copy(), yaw))

    objects: list[ObjectSpec] = []
    max_tries = 200
    for k in range(1, config.num_objects + 1):
        placed = False
        for _ in range(max_tries):
            half_size = rng.uniform(*config.half_size)
            shape = SPHERE if rng.uniform() < 0.5 else BOX
            span = 0.55 * room_half
            zlim = (half_size, max(half_size + 1e-6, room_height - half_size))
            center0 = np.array([
                rng.uniform(-span, span),
                rng.uniform(-span, span),
                rng.uniform(*zlim),
            ])
            speed = rng.uniform(*config.object_speed)
            heading = rng.uniform(0.0, 2.0 * math.pi)
            velocity = np.array([math.cos(heading) * speed, math.sin(heading) * speed, 0.0])
            yaw0 = rng.uniform(0.0, 2.0 * math.pi)
            yaw_rate = rng.uniform(-config.object_spin, config.object_spin)
            texture = Texture.random(rng, config.texture_freq)
            candidate = ObjectSpec(k, shape, half_size, center0, yaw0, velocity, yaw_rate, texture)
            if _placement_ok(candidate, objects, path, config):
                objects.append(candidate)
                placed = True
                break
        if not placed:
            raise SceneGenerationError(
                f"could not place object {k} of {config.num_objects} in {max_tries} tries"
            )
    return SceneSpec(room_half, room_height, room_textures, tuple(objects),
                     tuple((p.copy(), y) for p, y in path), int(seed))


def _placement_ok(candidate: ObjectSpec, placed: list[ObjectSpec],
                  camera_path, config: Config) -> bool:
    r_c = bounding_radius(candidate)
    inner = config.room_half - r_c - 0.05
    for t in range(config.sequence_length):
        center = candidate.center0 + t * candidate.velocity
        if abs(center[0]) > inner or abs(center[1]) > inner:
            return False
        cam_pos, _ = camera_path[t]
        if np.linalg.norm(center - cam_pos) <= r_c + config.camera_clearance + 0.05:
            return False
        for other in placed:
            other_center = other.center0 + t * other.velocity
            min_gap = r_c + bounding_radius(other) + config.spawn_margin
            if np.linalg.norm(center - other_center) <= min_gap:
                return False
    return True


# ---------------------------------------------------------------------------
# rendering


def _room_hits(origin, dirs, spec: SceneSpec):
    """Nearest room-face hit per pixel: (t, face_index); the room is closed."""
    h, w = dirs.shape[:2]
    half, height = spec.room_half, spec.room_height
    # face: (axis, plane coordinate)
    faces = [(0, half), (0, -half), (1, half), (1, -half), (2, 0.0), (2, height)]
    best_t = np.full((h, w), np.inf)
    best_face = np.zeros((h, w), dtype=np.int64)
    for idx, (axis, coord) in enumerate(faces):
        d = dirs[..., axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (coord - origin[axis]) / d
        t = np.where(np.isfinite(t) & (t > _HIT_EPS), t, np.inf)
        with np.errstate(invalid="ignore"):
            hit = origin[None, None, :] + t[..., None] * dirs
            ok = np.ones((h, w), dtype=bool)
            for other in range(3):
                if other == axis:
                    continue
                lo, hi = (0.0, height) if other == 2 else (-half, half)
                ok &= (hit[..., other] >= lo - 1e-9) & (hit[..., other] <= hi + 1e-9)
        t = np.where(ok, t, np.inf)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_face = np.where(closer, idx, best_face)
    return best_t, best_face


def _room_uv(hit, face_idx, spec: SceneSpec):
    half, height = spec.room_half, spec.room_height
    x, y, z = hit[..., 0], hit[..., 1], hit[..., 2]
    span = 2.0 * half
    u = np.empty_like(x)
    v = np.empty_like(x)
    for idx in range(6):
        m = face_idx == idx
        if not np.any(m):
            continue
        if idx in (0, 1):      # x walls: u along y, v up
            u[m] = (y[m] + half) / span
            v[m] = z[m] / height
        elif idx in (2, 3):    # y walls: u along x, v up
            u[m] = (x[m] + half) / span
            v[m] = z[m] / height
        else:                  # floor / ceiling
            u[m] = (x[m] + half) / span
            v[m] = (y[m] + half) / span
    return u, v


def _sphere_hit(origin, dirs, center, radius):
    oc = origin - center
    b = dirs @ oc
    c = float(oc @ oc - radius * radius)
    disc = b * b - c
    sq = np.sqrt(np.maximum(disc, 0.0))
    t_near, t_far = -b - sq, -b + sq
    t = np.where(t_near > _HIT_EPS, t_near, np.where(t_far > _HIT_EPS, t_far, np.inf))
    return np.where(disc > 0.0, t, np.inf)


def _box_hit(origin, dirs, center, yaw, half_size):
    rot = yaw_matrix(-yaw)
    o = rot @ (origin - center)
    d = dirs @ rot.T
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
    lo = (-half_size - o) * inv
    hi = (half_size - o) * inv
    t1 = np.minimum(lo, hi)
    t2 = np.maximum(lo, hi)
    # Rays parallel to a slab (d == 0) give +-inf or NaN; the origin is never
    # on the surface, so NaN only arises from 0 * inf and means "no bound".
    t1 = np.where(np.isnan(t1), -np.inf, t1)
    t2 = np.where(np.isnan(t2), np.inf, t2)
    tmin = t1.max(axis=-1)
    tmax = t2.min(axis=-1)
    inside_ok = (tmax >= tmin) & (tmax > _HIT_EPS)
    t = np.where(tmin > _HIT_EPS, tmin, tmax)
    return np.where(inside_ok, t, np.inf)


def _object_uv(obj: ObjectSpec, hit_world, center, yaw):
    rot = yaw_matrix(-yaw)
    local = (hit_world - center) @ rot.T
    if obj.shape == SPHERE:
        u = np.mod(np.arctan2(local[..., 1], local[..., 0]) / (2.0 * np.pi), 1.0)
        v = (np.clip(local[..., 2] / obj.half_size, -1.0, 1.0) + 1.0) / 2.0
        return u, v
    h = obj.half_size
    face_axis = np.argmax(np.abs(local), axis=-1)
    u = np.empty(local.shape[:-1])
    v = np.empty(local.shape[:-1])
    for axis, (ua, va) in enumerate([(1, 2), (0, 2), (0, 1)]):
        m = face_axis == axis
        if not np.any(m):
            continue
        u[m] = (local[..., ua][m] + h) / (2.0 * h)
        v[m] = (local[..., va][m] + h) / (2.0 * h)
    return u, v


def render(spec: SceneSpec, t: int, cam: CameraIntrinsics) -> RenderOutput:
    """Ray-cast frame t: nearest surface per pixel, unlit procedural color."""
    cam_pos, cam_yaw, poses = step_scene(spec, t)
    i, j = pixel_grid(cam)
    dirs_cam = np.stack([i, np.full_like(i, cam.focal), j], axis=-1)
    dirs_cam /= np.linalg.norm(dirs_cam, axis=-1, keepdims=True)
    dirs = dirs_cam @ yaw_matrix(cam_yaw).T

    room_t, room_face = _room_hits(cam_pos, dirs, spec)
    all_t = [room_t]
    for obj, (center, yaw) in zip(spec.objects, poses):
        if obj.shape == SPHERE:
            all_t.append(_sphere_hit(cam_pos, dirs, center, obj.half_size))
        else:
            all_t.append(_box_hit(cam_pos, dirs, center, yaw, obj.half_size))
    stacked = np.stack(all_t, axis=0)
    winner = np.argmin(stacked, axis=0)
    depth = np.take_along_axis(stacked, winner[None], axis=0)[0]

    labels = winner.astype(np.int64)  # room slot is 0; objects are 1..K already
    image = np.zeros(depth.shape + (3,))
    hit = cam_pos[None, None, :] + depth[..., None] * dirs

    mask = winner == 0
    if np.any(mask):
        u, v = _room_uv(hit[mask], room_face[mask], spec)
        face_tex = np.asarray([room_face[mask] == f for f in range(6)])
        colors = np.zeros(u.shape + (3,))
        for f in range(6):
            fm = face_tex[f]
            if np.any(fm):
                colors[fm] = spec.room_textures[f].sample(u[fm], v[fm])
        image[mask] = colors
    for k, (obj, (center, yaw)) in enumerate(zip(spec.objects, poses), start=1):
        mask = winner == k
        if not np.any(mask):
            continue
        u, v = _object_uv(obj, hit[mask], center, yaw)
        image[mask] = obj.texture.sample(u, v)
    return RenderOutput(image=image, depth=depth, labels=labels)


def render_sequence(spec: SceneSpec, cam: CameraIntrinsics) -> list[RenderOutput]:
    return [render(spec, t, cam) for t in range(len(spec.camera_path))]


# ---------------------------------------------------------------------------
# triplets


def _frame_valid(spec: SceneSpec, t: int, config: Config) -> bool:
    """Collision filter plus the inference-state limits for one frame."""
    cam_pos, cam_yaw, poses = step_scene(spec, t)
    objs = spec.objects
    for a in range(len(objs)):
        center_a = poses[a][0]
        r_a = bounding_radius(objs[a])
        if np.linalg.norm(center_a - cam_pos) <= r_a + config.camera_clearance:
            return False
        for b_ in range(a + 1, len(objs)):
            if np.linalg.norm(center_a - poses[b_][0]) <= r_a + bounding_radius(objs[b_]):
                return False
        loc = world_to_camera(center_a, cam_pos, cam_yaw)
        dist = np.linalg.norm(loc)
        if dist > config.max_state_distance:
            return False
        if math.acos(np.clip(loc[1] / dist, -1.0, 1.0)) > config.max_view_angle:
            return False
    return True


def _truth_states(spec: SceneSpec, t: int, config: Config) -> tuple[ObjectState, ...]:
    cam_pos, cam_yaw, poses = step_scene(spec, t)
    states = []
    for obj, (center, yaw) in zip(spec.objects, poses):
        location = world_to_camera(center, cam_pos, cam_yaw)
        pose = one_hot_pose((yaw - cam_yaw) % (2.0 * math.pi), config.pose_bins)
        states.append(ObjectState(location, pose, identity_code(obj.object_id)))
    return tuple(states)


def make_triplets(spec: SceneSpec, frames: list[RenderOutput], config: Config) -> list[Triplet]:
    """All valid (a, a+s, a+2s) triplets of the rendered sequence.

    A triplet is valid when, in each of its three frames, no objects collide
    with each other or the camera and every object lies within the
    viewing-angle/distance limits that inference states must satisfy.
    """
    n = len(frames)
    if n != len(spec.camera_path):
        raise ValueError("need one rendered frame per camera pose")
    valid = [_frame_valid(spec, t, config) for t in range(n)]
    triplets = []
    for stride in sorted(set(config.strides)):
        for a in range(n - 2 * stride):
            idx = (a, a + stride, a + 2 * stride)
            if not all(valid[t] for t in idx):
                continue
            cam_poses = [spec.camera_path[t] for t in idx]
            ego = tuple(
                camera_ego_motion(cam_poses[i][0], cam_poses[i][1],
                                  cam_poses[i + 1][0], cam_poses[i + 1][1])
                for i in range(2)
            )
            truth = tuple(_truth_states(spec, t, config) for t in idx)
            triplets.append(Triplet(
                frames=tuple(frames[t] for t in idx),
                ego=ego,
                truth=truth,
                indices=idx,
                camera=tuple((p.copy(), y) for p, y in cam_poses),
                spec=spec,
            ))
    return triplets


# ---------------------------------------------------------------------------
# (de)serialization for dataset metadata


def _texture_to_dict(tex: Texture) -> dict:
    return {"kind": tex.kind, "color_a": tex.color_a.tolist(),
            "color_b": tex.color_b.tolist(), "freq": tex.freq}


def _texture_from_dict(d: dict) -> Texture:
    return Texture(d["kind"], np.array(d["color_a"]), np.array(d["color_b"]), d["freq"])


def scene_to_dict(spec: SceneSpec) -> dict:
    return {
        "room_half": spec.room_half,
        "room_height": spec.room_height,
        "room_textures": [_texture_to_dict(t) for t in spec.room_textures],
        "objects": [
            {
                "object_id": o.object_id,
                "shape": o.shape,
                "half_size": o.half_size,
                "center0": o.center0.tolist(),
                "yaw0": o.yaw0,
                "velocity": o.velocity.tolist(),
                "yaw_rate": o.yaw_rate,
                "texture": _texture_to_dict(o.texture),
            }
            for o in spec.objects
        ],
        "camera_path": [{"position": p.tolist(), "yaw": y} for p, y in spec.camera_path],
        "seed": spec.seed,
    }


def scene_from_dict(d: dict) -> SceneSpec:
    objects = tuple(
        ObjectSpec(o["object_id"], o["shape"], o["half_size"], np.array(o["center0"]),
                   o["yaw0"], np.array(o["velocity"]), o["yaw_rate"],
                   _texture_from_dict(o["texture"]))
        for o in d["objects"]
    )
    path = tuple((np.array(c["position"]), c["yaw"]) for c in d["camera_path"])
    textures = tuple(_texture_from_dict(t) for t in d["room_textures"])
    return SceneSpec(d["room_half"], d["room_height"], textures, objects, path, d["seed"])
