"""Dataset directory layout and metadata.

    <root>/scene_SSSS/triplet_TTTT/
        frame0.ppm frame1.ppm frame2.ppm      rendered RGB (P6)
        depth0.pfm depth1.pfm depth2.pfm      Euclidean depth (Pf, little-endian)
        labels0.pgm labels1.pgm labels2.pgm   0 background, 1..K objects (P5)
        meta.json                             everything needed to reconstruct the run

meta.json echoes the full config, the scene spec, camera poses, egomotions,
and per-frame ground-truth object states; written deterministically (sorted
keys) so reruns are byte-identical.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from . import __version__
from .camera import EgoMotion
from .config import Config
from .formats import atomic_write_bytes, read_pfm, read_pgm, read_ppm, write_pfm, write_pgm, write_ppm
from .kinematics import ObjectState, one_hot_pose
from .matching import identity_code
from .scenesim import RenderOutput, SceneSpec, Triplet, scene_from_dict, scene_to_dict
from .warp import PredictionBundle

__all__ = [
    "triplet_dir",
    "write_triplet",
    "read_triplet",
    "iter_triplet_dirs",
    "write_prediction",
    "write_json",
]

PIXEL_CONVENTION = {
    "i_axis": "right",
    "j_axis": "up",
    "row0": "top",
    "center": "symmetric grid, |i| <= (width-1)/2",
}


def write_json(path: str, payload: dict) -> None:
    data = json.dumps(payload, sort_keys=True, indent=1).encode("utf-8")
    atomic_write_bytes(path, data + b"\n")


def triplet_dir(root: str, scene_index: int, triplet_index: int) -> str:
    return os.path.join(root, f"scene_{scene_index:04d}", f"triplet_{triplet_index:04d}")


def _state_to_dict(obj_id: int, state: ObjectState, pose_angle: float) -> dict:
    return {
        "id": obj_id,
        "location": state.location.tolist(),
        "pose_angle": pose_angle,
    }


def write_triplet(directory: str, triplet: Triplet, config: Config,
                  scene_index: int, triplet_index: int) -> None:
    os.makedirs(directory, exist_ok=True)
    for t, frame in enumerate(triplet.frames):
        write_ppm(os.path.join(directory, f"frame{t}.ppm"), frame.image)
        write_pfm(os.path.join(directory, f"depth{t}.pfm"), frame.depth)
        write_pgm(os.path.join(directory, f"labels{t}.pgm"), frame.labels)

    spec = triplet.spec
    truth = []
    for t, frame_idx in enumerate(triplet.indices):
        cam_pos, cam_yaw = triplet.camera[t]
        objects = []
        for obj, state in zip(spec.objects, triplet.truth[t]):
            pose_angle = (obj.yaw0 + frame_idx * obj.yaw_rate - cam_yaw) % (2.0 * math.pi)
            objects.append(_state_to_dict(obj.object_id, state, pose_angle))
        truth.append({"objects": objects})

    meta = {
        "version": __version__,
        "config": config.to_dict(),
        "pixel_convention": PIXEL_CONVENTION,
        "intrinsics": {
            "width": config.resolution,
            "height": config.resolution,
            "fov": config.fov,
        },
        "scene_index": scene_index,
        "triplet_index": triplet_index,
        "scene_seed": spec.seed,
        "frame_indices": list(triplet.indices),
        "camera": [{"position": pos.tolist(), "yaw": yaw} for pos, yaw in triplet.camera],
        "ego": [{"velocity": e.velocity.tolist(), "yaw_rate": e.yaw_rate}
                for e in triplet.ego],
        "truth": truth,
        "scene": scene_to_dict(spec),
    }
    write_json(os.path.join(directory, "meta.json"), meta)


def read_triplet(directory: str) -> tuple[Triplet, Config]:
    meta_path = os.path.join(directory, "meta.json")
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    config = Config.from_dict(meta["config"])
    frames = []
    for t in range(3):
        frames.append(RenderOutput(
            image=read_ppm(os.path.join(directory, f"frame{t}.ppm")),
            depth=read_pfm(os.path.join(directory, f"depth{t}.pfm")),
            labels=read_pgm(os.path.join(directory, f"labels{t}.pgm")),
        ))
    ego = tuple(EgoMotion(np.array(e["velocity"]), e["yaw_rate"]) for e in meta["ego"])
    truth = []
    for frame_meta in meta["truth"]:
        states = []
        for obj in frame_meta["objects"]:
            states.append(ObjectState(
                np.array(obj["location"]),
                one_hot_pose(obj["pose_angle"], config.pose_bins),
                identity_code(obj["id"]),
            ))
        truth.append(tuple(states))
    camera = tuple((np.array(c["position"]), c["yaw"]) for c in meta["camera"])
    spec: SceneSpec = scene_from_dict(meta["scene"])
    triplet = Triplet(frames=tuple(frames), ego=ego, truth=tuple(truth),
                      indices=tuple(meta["frame_indices"]), camera=camera, spec=spec)
    return triplet, config


def iter_triplet_dirs(root: str) -> list[str]:
    """All triplet directories under a dataset root, sorted for determinism."""
    found = []
    for scene in sorted(os.listdir(root)):
        scene_path = os.path.join(root, scene)
        if not (scene.startswith("scene_") and os.path.isdir(scene_path)):
            continue
        for trip in sorted(os.listdir(scene_path)):
            trip_path = os.path.join(scene_path, trip)
            if trip.startswith("triplet_") and os.path.isdir(trip_path):
                found.append(trip_path)
    return found


def write_prediction(directory: str, bundle: PredictionBundle, summary: dict) -> None:
    os.makedirs(directory, exist_ok=True)
    write_ppm(os.path.join(directory, "warp_image.ppm"), bundle.warp_image)
    write_ppm(os.path.join(directory, "imag_image.ppm"), bundle.imag_image)
    write_ppm(os.path.join(directory, "merged_image.ppm"), bundle.merged_image)
    write_pfm(os.path.join(directory, "warp_depth.pfm"), bundle.warp_depth)
    write_pfm(os.path.join(directory, "imag_depth.pfm"), bundle.imag_depth)
    write_pfm(os.path.join(directory, "merged_depth.pfm"), bundle.merged_depth)
    write_pfm(os.path.join(directory, "warp_weight.pfm"), bundle.warp_weight)
    write_json(os.path.join(directory, "summary.json"), summary)
