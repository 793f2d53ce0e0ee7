"""End-to-end prediction, loss, and evaluation pipelines over triplets.

predict: infer at t-1 and t -> soft-match identities -> estimate kinematics ->
forward-splat frame t -> imagination -> merge. Losses additionally infer at
t+1 and compare against the predictions; evaluation scores segmentation,
depth, and localization per frame.
"""

from __future__ import annotations

import numpy as np

from .camera import CameraIntrinsics, focal_from_fov
from .config import Config
from .kinematics import (
    Kinematics,
    ObjectState,
    background_state,
    angular_likelihood,
    angular_posterior,
    estimate_velocity,
    population_vector,
    predict_location,
    predict_pose,
    shift_pose,
    soft_angular_posterior,
    speed_values,
    uniform_pose,
)
from .losses import center_loss, collapse_loss, image_loss, location_loss, pose_loss, total_loss
from .matching import background_code, match_scores
from .metrics import labels_from_seg, pearson, polar_decompose, seg_eval
from .providers import (
    ImaginationProvider,
    InferenceProvider,
    InvariantViolation,
    masked_slices,
    validate_inference,
)
from .scenesim import Triplet
from .warp import PredictionBundle, merge, splat

__all__ = [
    "camera_for",
    "infer_frame",
    "estimate_kinematics",
    "predict_triplet",
    "triplet_loss_parts",
    "assemble_loss_report",
    "evaluate_triplet",
]


def camera_for(config: Config) -> CameraIntrinsics:
    return CameraIntrinsics(config.resolution, config.resolution,
                            focal_from_fov(config.resolution, config.fov))


def infer_frame(provider: InferenceProvider, image: np.ndarray,
                cam: CameraIntrinsics, config: Config):
    """Run both inference heads on one frame and enforce the data contracts."""
    depth = np.asarray(provider.infer_depth(image), dtype=np.float64)
    seg, states = provider.infer_objects(image)
    seg = np.asarray(seg, dtype=np.float64)
    validate_inference(depth, seg, states, cam, config)
    return depth, seg, list(states)


def _codes(states: list[ObjectState]) -> np.ndarray:
    return np.stack([s.identity for s in states] + [background_code()])


def _background_speed_delta(b: int) -> np.ndarray:
    delta = np.zeros(b)
    delta[b // 2 - 1] = 1.0  # index of speed 0 on the rotation-speed grid
    return delta


def _nearest_speed_delta(b: int, speed: float) -> np.ndarray:
    """One-hot over the rotation-speed grid at the bin nearest to ``speed``."""
    width = 2.0 * np.pi / b
    n = int(np.rint(speed / width)) % b
    delta = np.zeros(b)
    delta[(n + b // 2 - 1) % b] = 1.0
    return delta


def estimate_kinematics(states_prev: list[ObjectState], states_t: list[ObjectState],
                        match: np.ndarray, ego_prev, config: Config) -> Kinematics:
    """Per-object velocity and rotation-speed posterior from two frames.

    The posterior distribution compensates the camera's own pan by shifting
    the previous pose by -ego yaw (its apparent pose now, had the object not
    spun) before the cross-correlation. The point estimate compensates the pan
    exactly instead: it cross-correlates the raw poses, applies the slowness
    prior recentred at -ego yaw, and adds ego yaw to the population vector.
    Shifts commute with cross-correlation, so the two routes agree up to the
    interpolation kernel's discretization; the scalar route keeps the point
    estimate free of kernel bias, which the one-bin recovery guarantee needs.
    The background candidate votes a static hypothesis in both routes.
    """
    b = config.pose_bins
    kappa_interp = config.interp_kappa
    n_obj = len(states_t)
    prev_with_bg = list(states_prev) + [background_state(b)]
    apparent_poses = [shift_pose(s.pose, -ego_prev.yaw_rate, kappa_interp)
                      for s in states_prev]
    bg_delta = _background_speed_delta(b)
    speeds = speed_values(b)
    raw_prior = np.exp(config.kappa_prior
                       * (np.cos(speeds + ego_prev.yaw_rate) - 1.0))
    raw_bg_delta = _nearest_speed_delta(b, -ego_prev.yaw_rate)

    velocity = np.zeros((n_obj, 3))
    angular = np.zeros((n_obj, b))
    omega = np.zeros(n_obj)
    for k, state in enumerate(states_t):
        row = match[k]
        velocity[k] = estimate_velocity(state, prev_with_bg, row, ego_prev)
        posteriors = [
            angular_posterior(angular_likelihood(state.pose, apparent), config.kappa_prior)
            for apparent in apparent_poses
        ]
        posteriors.append(bg_delta)
        angular[k] = soft_angular_posterior(np.stack(posteriors), row)
        raw_posteriors = []
        for prev in states_prev:
            raw = angular_likelihood(state.pose, prev.pose) * raw_prior
            raw_posteriors.append(raw / raw.sum())
        raw_posteriors.append(raw_bg_delta)
        raw_mix = soft_angular_posterior(np.stack(raw_posteriors), row)
        omega[k] = population_vector(raw_mix, speeds) + ego_prev.yaw_rate
    return Kinematics(velocity=velocity, angular=angular, omega_point=omega)


def predict_triplet(triplet: Triplet, provider: InferenceProvider,
                    imagination: ImaginationProvider, config: Config):
    """Predict frame t+1 from frames t-1 and t. Returns (bundle, context)."""
    cam = camera_for(config)
    image_prev = triplet.frames[0].image
    image_t = triplet.frames[1].image

    seg_prev, states_prev = provider.infer_objects(image_prev)
    seg_prev = np.asarray(seg_prev, dtype=np.float64)
    depth_prev = np.asarray(provider.infer_depth(image_prev), dtype=np.float64)
    validate_inference(depth_prev, seg_prev, states_prev, cam, config)
    depth_t, seg_t, states_t = infer_frame(provider, image_t, cam, config)

    match = match_scores(_codes(states_t), _codes(states_prev), config.sigma_rbf)
    kin = estimate_kinematics(states_prev, states_t, match, triplet.ego[0], config)

    locations_t = np.stack([s.location for s in states_t]) if states_t else np.zeros((0, 3))
    warp_image, warp_depth, warp_weight = splat(
        image_t, depth_t, seg_t, kin, locations_t, triplet.ego[1], cam, config.beta)

    frame_slices, logdepth_slices = masked_slices(image_t, depth_t, seg_t)
    imag_image, imag_depth, imag_seg = imagination.imagine(
        frame_slices, logdepth_slices, kin, triplet.ego[1])
    imag_seg = np.asarray(imag_seg, dtype=np.float64)
    if np.max(np.abs(imag_seg.sum(axis=0) - 1.0)) > 1e-6 or np.any(imag_seg < -1e-12):
        raise InvariantViolation("imagination segmentation must be a per-pixel simplex")

    bundle = PredictionBundle(
        warp_image=warp_image,
        warp_depth=warp_depth,
        warp_weight=warp_weight,
        imag_image=np.asarray(imag_image, dtype=np.float64),
        imag_depth=np.asarray(imag_depth, dtype=np.float64),
        merged_image=merge(warp_image, warp_weight, imag_image),
        merged_depth=merge(warp_depth, warp_weight, imag_depth),
    )
    context = {
        "depth_t": depth_t,
        "seg_t": seg_t,
        "states_prev": states_prev,
        "states_t": states_t,
        "match": match,
        "kinematics": kin,
    }
    return bundle, context


def triplet_loss_parts(triplet: Triplet, provider: InferenceProvider,
                       imagination: ImaginationProvider, config: Config) -> dict:
    """All loss ingredients for one triplet except the batch-paired collapse term."""
    cam = camera_for(config)
    bundle, ctx = predict_triplet(triplet, provider, imagination, config)
    depth_next, seg_next, states_next = infer_frame(
        provider, triplet.frames[2].image, cam, config)
    states_t = ctx["states_t"]
    kin: Kinematics = ctx["kinematics"]
    b = config.pose_bins

    pred_locations = np.vstack([
        np.stack([predict_location(states_t[l], kin.velocity[l], triplet.ego[1])
                  for l in range(len(states_t))]) if states_t else np.zeros((0, 3)),
        np.zeros((1, 3)),  # background slot: static, no location of its own
    ])
    pred_poses = np.vstack([
        np.stack([predict_pose(states_t[l].pose, kin.angular[l],
                               triplet.ego[1].yaw_rate, config.interp_kappa)
                  for l in range(len(states_t))]) if states_t else np.zeros((0, b)),
        uniform_pose(b)[None, :],
    ])
    match_next = match_scores(_codes(states_next), _codes(states_t), config.sigma_rbf)

    inferred_locations = (np.stack([s.location for s in states_next])
                          if states_next else np.zeros((0, 3)))
    inferred_poses = (np.stack([s.pose for s in states_next])
                      if states_next else np.zeros((0, b)))
    return {
        "image": image_loss(bundle.merged_image, triplet.frames[2].image),
        "location": location_loss(pred_locations, inferred_locations, match_next),
        "pose": pose_loss(pred_poses, inferred_poses, match_next),
        "center": center_loss(inferred_locations, seg_next, depth_next, cam),
        "next_locations": inferred_locations,
        "bundle": bundle,
    }


def assemble_loss_report(parts: dict, paired_locations, config: Config):
    collapse = 0.0
    if paired_locations is not None and len(parts["next_locations"]):
        collapse = collapse_loss(parts["next_locations"], paired_locations,
                                 config.delta_collapse)
    return total_loss(parts["image"], parts["location"], parts["pose"],
                      parts["center"], collapse, config.loss_lambda)


def evaluate_triplet(triplet: Triplet, provider: InferenceProvider,
                     config: Config) -> dict:
    """Segmentation, depth, and localization metrics over the triplet's frames.

    Per-triplet values average its three frames; the pooled pair arrays let the
    caller compute dataset-level correlations.
    """
    cam = camera_for(config)
    aris, ious = [], []
    depth_pred, depth_true = [], []
    angle_pred, angle_true = [], []
    dist_pred, dist_true = [], []
    for frame, truth_states in zip(triplet.frames, triplet.truth):
        depth, seg, states = infer_frame(provider, frame.image, cam, config)
        result = seg_eval(labels_from_seg(seg), frame.labels)
        aris.append(result.ari_fg)
        ious.append(result.mean_iou)
        depth_pred.append(depth.ravel())
        depth_true.append(frame.depth.ravel())
        for state, truth in zip(states, truth_states):
            pa, pd = polar_decompose(state.location)
            ta, td = polar_decompose(truth.location)
            angle_pred.append(pa)
            angle_true.append(ta)
            dist_pred.append(pd)
            dist_true.append(td)
    depth_pred = np.concatenate(depth_pred)
    depth_true = np.concatenate(depth_true)
    out = {
        "ari_fg": float(np.mean(aris)),
        "mean_iou": float(np.mean(ious)),
        "depth_pearson": pearson(depth_true, depth_pred),
        "pairs": {
            "depth": (depth_true, depth_pred),
            "angle": (np.array(angle_true), np.array(angle_pred)),
            "distance": (np.array(dist_true), np.array(dist_pred)),
        },
    }
    if len(angle_pred) >= 2 and np.var(angle_true) > 0 and np.var(angle_pred) > 0:
        out["angle_pearson"] = pearson(angle_true, angle_pred)
    if len(dist_pred) >= 2 and np.var(dist_true) > 0 and np.var(dist_pred) > 0:
        out["distance_pearson"] = pearson(dist_true, dist_pred)
    return out
