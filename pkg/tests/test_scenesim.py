"""Scene generation and the ray-cast oracle renderer.

The renderer's label/depth checks use an independent scalar ray tracer
(plain math, no shared numpy kernels) as the oracle.
"""

import dataclasses
import math

import numpy as np
import numpy.testing as npt
import pytest

from scenewarp.camera import CameraIntrinsics, focal_from_fov, pixel_to_point, yaw_matrix
from scenewarp.config import Config
from scenewarp.pipeline import camera_for
from scenewarp.scenesim import (
    BOX,
    SPHERE,
    ObjectSpec,
    SceneSpec,
    bounding_radius,
    camera_ego_motion,
    generate_scene,
    make_triplets,
    render,
    render_sequence,
    scene_from_dict,
    scene_to_dict,
    step_scene,
    world_to_camera,
)
from scenewarp.textures import Texture


def solid(r, g, b):
    return Texture("solid", np.array([r, g, b]), np.array([0.0, 0.0, 0.0]))


def plain_room(half=4.0, height=3.0, objects=(), camera_path=((np.zeros(3), 0.0),)):
    textures = tuple(solid(0.1 * (i + 1), 0.2, 0.3) for i in range(6))
    path = tuple((np.asarray(p, float), y) for p, y in camera_path)
    return SceneSpec(half, height, textures, tuple(objects), path, seed=0)


# --- independent scalar ray oracle -----------------------------------------

def ray_sphere(origin, d, center, radius):
    oc = origin - center
    b = float(np.dot(d, oc))
    c = float(np.dot(oc, oc) - radius * radius)
    disc = b * b - c
    if disc <= 0:
        return math.inf
    sq = math.sqrt(disc)
    for t in (-b - sq, -b + sq):
        if t > 1e-9:
            return t
    return math.inf


def ray_box(origin, d, center, yaw, half_size):
    rot = yaw_matrix(-yaw)
    o = rot @ (origin - center)
    dd = rot @ d
    tmin, tmax = -math.inf, math.inf
    for axis in range(3):
        if abs(dd[axis]) < 1e-15:
            if abs(o[axis]) > half_size:
                return math.inf
            continue
        t1 = (-half_size - o[axis]) / dd[axis]
        t2 = (half_size - o[axis]) / dd[axis]
        tmin = max(tmin, min(t1, t2))
        tmax = min(tmax, max(t1, t2))
    if tmax < tmin or tmax <= 1e-9:
        return math.inf
    return tmin if tmin > 1e-9 else tmax


def ray_room(origin, d, half, height):
    best = math.inf
    for axis, coord in ((0, half), (0, -half), (1, half), (1, -half), (2, 0.0), (2, height)):
        if abs(d[axis]) < 1e-15:
            continue
        t = (coord - origin[axis]) / d[axis]
        if t <= 1e-9 or t >= best:
            continue
        hit = origin + t * d
        ok = True
        for other in range(3):
            if other == axis:
                continue
            lo, hi = (0.0, height) if other == 2 else (-half, half)
            if not (lo - 1e-9 <= hit[other] <= hi + 1e-9):
                ok = False
        if ok:
            best = t
    return best


def oracle_trace(spec, t, cam, row, col):
    """(label, depth) for one pixel via the scalar tracer."""
    cam_pos, cam_yaw, poses = step_scene(spec, t)
    i = col - cam.half_width
    j = cam.half_height - row
    d = np.array([i, cam.focal, j])
    d = yaw_matrix(cam_yaw) @ (d / np.linalg.norm(d))
    best_t, best_label = ray_room(cam_pos, d, spec.room_half, spec.room_height), 0
    for k, (obj, (center, yaw)) in enumerate(zip(spec.objects, poses), start=1):
        if obj.shape == SPHERE:
            t_hit = ray_sphere(cam_pos, d, center, obj.half_size)
        else:
            t_hit = ray_box(cam_pos, d, center, yaw, obj.half_size)
        if t_hit < best_t:
            best_t, best_label = t_hit, k
    return best_label, best_t


# --- tests ------------------------------------------------------------------

class TestGenerateScene:
    def test_deterministic(self, small_config):
        a = generate_scene(small_config, 7)
        b = generate_scene(small_config, 7)
        assert scene_to_dict(a) == scene_to_dict(b)

    def test_zero_objects(self):
        config = Config(resolution=16, num_objects=0)
        spec = generate_scene(config, 1)
        assert spec.objects == ()
        out = render(spec, 0, camera_for(config))
        assert np.all(out.labels == 0)

    def test_three_objects_never_overlap(self, small_config):
        spec = generate_scene(small_config, 3)
        assert len(spec.objects) == 3
        for t in range(small_config.sequence_length):
            _, _, poses = step_scene(spec, t)
            for a in range(3):
                for b in range(a + 1, 3):
                    gap = np.linalg.norm(poses[a][0] - poses[b][0])
                    min_gap = (bounding_radius(spec.objects[a])
                               + bounding_radius(spec.objects[b]))
                    assert gap > min_gap

    def test_objects_stay_in_room(self, small_config):
        for seed in range(5):
            spec = generate_scene(small_config, seed)
            for t in range(small_config.sequence_length):
                _, _, poses = step_scene(spec, t)
                for obj, (center, _) in zip(spec.objects, poses):
                    r = bounding_radius(obj)
                    assert abs(center[0]) < spec.room_half - r
                    assert abs(center[1]) < spec.room_half - r

    def test_roundtrip_serialization(self, small_config):
        spec = generate_scene(small_config, 11)
        assert scene_to_dict(scene_from_dict(scene_to_dict(spec))) == scene_to_dict(spec)

    def test_infeasible_config_raises(self):
        from scenewarp.scenesim import SceneGenerationError
        # Objects with bounding radius larger than the room's usable interior
        # can never be placed.
        config = Config(resolution=16, room_half=1.0, half_size=(0.9, 0.95),
                        camera_clearance=0.0)
        with pytest.raises(SceneGenerationError):
            generate_scene(config, 0)


class TestStepScene:
    def _spec(self):
        obj = ObjectSpec(1, SPHERE, 0.5, np.array([1.0, 0.0, 1.0]), 0.25,
                         np.array([1.0, 0.0, 0.0]), math.pi / 8, solid(1, 0, 0))
        path = [(np.array([0.0, -3.0, 1.0]), 0.1 * t) for t in range(7)]
        return plain_room(objects=[obj], camera_path=path)

    def test_initial_pose(self):
        cam_pos, cam_yaw, poses = step_scene(self._spec(), 0)
        npt.assert_array_equal(poses[0][0], [1.0, 0.0, 1.0])
        assert poses[0][1] == 0.25

    def test_constant_velocity(self):
        _, _, poses = step_scene(self._spec(), 2)
        npt.assert_array_equal(poses[0][0], [3.0, 0.0, 1.0])

    def test_constant_spin(self):
        _, _, poses = step_scene(self._spec(), 4)
        assert poses[0][1] == pytest.approx(0.25 + math.pi / 2)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            step_scene(self._spec(), 7)
        with pytest.raises(ValueError):
            step_scene(self._spec(), -1)


class TestRender:
    def test_wall_depth_at_center_pixel(self):
        # Camera at y=-1 facing the +y wall at y=4: distance 5 on the axis.
        # Odd resolution so the exact center pixel exists.
        spec = plain_room(camera_path=[(np.array([0.0, -1.0, 1.5]), 0.0)])
        cam = CameraIntrinsics(33, 33, focal_from_fov(33, math.pi / 2))
        out = render(spec, 0, cam)
        assert out.depth[16, 16] == pytest.approx(5.0)
        assert out.labels[16, 16] == 0
        npt.assert_allclose(out.image[16, 16], [0.3, 0.2, 0.3])  # +y wall texture

    def test_sphere_on_axis(self):
        obj = ObjectSpec(1, SPHERE, 1.0, np.array([0.0, 2.0, 1.5]), 0.0,
                         np.zeros(3), 0.0, solid(1, 0, 0))
        spec = plain_room(objects=[obj],
                          camera_path=[(np.array([0.0, -1.0, 1.5]), 0.0)])
        cam = CameraIntrinsics(33, 33, focal_from_fov(33, math.pi / 2))
        out = render(spec, 0, cam)
        assert out.depth[16, 16] == pytest.approx(2.0)
        assert out.labels[16, 16] == 1
        npt.assert_allclose(out.image[16, 16], [1.0, 0.0, 0.0])

    def test_repeat_render_identical(self, small_config):
        spec = generate_scene(small_config, 2)
        cam = camera_for(small_config)
        a = render(spec, 3, cam)
        b = render(spec, 3, cam)
        npt.assert_array_equal(a.image, b.image)
        npt.assert_array_equal(a.depth, b.depth)
        npt.assert_array_equal(a.labels, b.labels)

    def test_depth_positive_everywhere(self, small_config):
        spec = generate_scene(small_config, 4)
        out = render(spec, 0, camera_for(small_config))
        assert np.all(out.depth > 0)
        assert np.all(np.isfinite(out.depth))

    def test_depth_is_euclidean_distance(self, small_config):
        # Unprojecting each pixel at its depth lands on the intersected surface.
        spec = generate_scene(small_config, 5)
        cam = camera_for(small_config)
        out = render(spec, 1, cam)
        cam_pos, cam_yaw, poses = step_scene(spec, 1)
        rot = yaw_matrix(cam_yaw)
        rng = np.random.default_rng(0)
        for _ in range(300):
            r = int(rng.integers(cam.height))
            c = int(rng.integers(cam.width))
            p_cam = pixel_to_point(c - cam.half_width, cam.half_height - r,
                                   out.depth[r, c], cam)
            p_world = rot @ p_cam + cam_pos
            label = out.labels[r, c]
            if label == 0:
                dist = min(spec.room_half - abs(p_world[0]),
                           spec.room_half - abs(p_world[1]),
                           p_world[2], spec.room_height - p_world[2])
                assert abs(dist) < 1e-4
            else:
                obj = spec.objects[label - 1]
                center, yaw = poses[label - 1]
                local = yaw_matrix(-yaw) @ (p_world - center)
                if obj.shape == SPHERE:
                    assert abs(np.linalg.norm(local) - obj.half_size) < 1e-4
                else:
                    assert abs(np.max(np.abs(local)) - obj.half_size) < 1e-4

    def test_labels_match_bruteforce_nearest_hit(self, small_config):
        spec = generate_scene(small_config, 6)
        cam = camera_for(small_config)
        out = render(spec, 2, cam)
        rng = np.random.default_rng(1)
        for _ in range(400):
            r = int(rng.integers(cam.height))
            c = int(rng.integers(cam.width))
            label, t_hit = oracle_trace(spec, 2, cam, r, c)
            assert label == out.labels[r, c]
            assert t_hit == pytest.approx(out.depth[r, c], abs=1e-9)


class TestMakeTriplets:
    def _static_spec(self, small_config):
        objs = [
            ObjectSpec(1, SPHERE, 0.4, np.array([-1.0, 1.5, 1.0]), 0.0,
                       np.zeros(3), 0.0, solid(1, 0, 0)),
            ObjectSpec(2, BOX, 0.4, np.array([1.0, 1.5, 1.0]), 0.2,
                       np.zeros(3), 0.0, solid(0, 1, 0)),
        ]
        path = [(np.array([0.0, -2.0, 1.2]), 0.0)] * 7
        return plain_room(objects=objs, camera_path=path)

    def test_stride_patterns(self, small_config):
        spec = self._static_spec(small_config)
        cam = camera_for(small_config)
        config = dataclasses.replace(small_config, num_objects=2)
        frames = render_sequence(spec, cam)
        triplets = make_triplets(spec, frames, config)
        indices = {t.indices for t in triplets}
        # 5 stride-1, 3 stride-2, 1 stride-3 triplets when nothing is filtered
        assert len([i for i in indices if i[1] - i[0] == 1]) == 5
        assert (0, 2, 4) in indices and (0, 3, 6) in indices
        assert len(indices) == 9

    def test_collision_excludes_triplet(self, small_config):
        # Two objects on a head-on collision course meet around frame 3.
        objs = [
            ObjectSpec(1, SPHERE, 0.4, np.array([-1.2, 1.5, 1.0]), 0.0,
                       np.array([0.4, 0.0, 0.0]), 0.0, solid(1, 0, 0)),
            ObjectSpec(2, SPHERE, 0.4, np.array([1.2, 1.5, 1.0]), 0.0,
                       np.array([-0.4, 0.0, 0.0]), 0.0, solid(0, 1, 0)),
        ]
        path = [(np.array([0.0, -2.0, 1.2]), 0.0)] * 7
        spec = plain_room(objects=objs, camera_path=path)
        config = dataclasses.replace(small_config, num_objects=2)
        frames = render_sequence(spec, camera_for(small_config))
        triplets = make_triplets(spec, frames, config)
        colliding = {t for t in range(7)
                     if np.linalg.norm((np.array([-1.2 + 0.4 * t]) - np.array([1.2 - 0.4 * t]))) <= 0.8}
        assert colliding, "test setup should produce collisions"
        for triplet in triplets:
            assert not (set(triplet.indices) & colliding)

    def test_truth_states_in_camera_frame(self, small_triplets):
        for triplet in small_triplets:
            for t, states in enumerate(triplet.truth):
                cam_pos, cam_yaw = triplet.camera[t]
                frame_idx = triplet.indices[t]
                _, _, poses = step_scene(triplet.spec, frame_idx)
                for state, (center, yaw) in zip(states, poses):
                    npt.assert_allclose(state.location,
                                        world_to_camera(center, cam_pos, cam_yaw),
                                        atol=1e-12)

    def test_inertia_consistency(self, small_triplets):
        # Ground-truth location at t, advanced by the known world velocity and
        # egomotion, reproduces the ground truth at t+1.
        from scenewarp.kinematics import predict_location
        for triplet in small_triplets:
            stride = triplet.indices[1] - triplet.indices[0]
            for step in (0, 1):
                cam_pos, cam_yaw = triplet.camera[step]
                for obj, state, state_next in zip(triplet.spec.objects,
                                                  triplet.truth[step],
                                                  triplet.truth[step + 1]):
                    v_cam = yaw_matrix(-cam_yaw) @ (obj.velocity * stride)
                    predicted = predict_location(state, v_cam, triplet.ego[step])
                    npt.assert_allclose(predicted, state_next.location, atol=1e-6)

    def test_ego_motion_definition(self, small_triplets):
        # A static world point's camera-frame track obeys apparent_location.
        from scenewarp.camera import apparent_location
        point = np.array([0.5, 1.0, 0.7])
        for triplet in small_triplets:
            for step in (0, 1):
                pos_a, yaw_a = triplet.camera[step]
                pos_b, yaw_b = triplet.camera[step + 1]
                ego = camera_ego_motion(pos_a, yaw_a, pos_b, yaw_b)
                npt.assert_allclose(ego.velocity, triplet.ego[step].velocity)
                seen_a = world_to_camera(point, pos_a, yaw_a)
                seen_b = world_to_camera(point, pos_b, yaw_b)
                npt.assert_allclose(apparent_location(seen_a, ego), seen_b, atol=1e-12)
