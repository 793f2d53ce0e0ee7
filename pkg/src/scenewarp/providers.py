"""Inference and imagination providers.

The prediction pipeline consumes per-frame inferences (depth map,
probabilistic segmentation, per-object states) through the InferenceProvider
interface and fills warp-uncovered regions through the ImaginationProvider
interface. Learned models would implement these; here we provide:

  * OracleProvider      ground truth from the simulator (exact)
  * NoisyOracleProvider seeded, deterministic degradation of the oracle
  * BaselineImagination persistence baseline: carries frame t forward
  * FileProvider        reads third-party model outputs from a directory

Every provider output is checked against the data-contract invariants before
use; violations raise InvariantViolation (CLI exit code 4).
"""

from __future__ import annotations

import json
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace

import numpy as np

from .camera import CameraIntrinsics
from .config import Config
from .formats import read_pfm
from .kinematics import ObjectState, circular_smooth, validate_distribution
from .matching import CODE_DIM

__all__ = [
    "InvariantViolation",
    "InferenceProvider",
    "ImaginationProvider",
    "OracleProvider",
    "NoiseConfig",
    "NoisyOracleProvider",
    "BaselineImagination",
    "FileProvider",
    "validate_inference",
    "provider_from_spec",
    "masked_slices",
]


class InvariantViolation(ValueError):
    """Provider output breaks a data-contract invariant."""


class InferenceProvider(ABC):
    """Single-image inference: depth and object decomposition."""

    @abstractmethod
    def infer_depth(self, image: np.ndarray) -> np.ndarray:
        """Per-pixel Euclidean camera distance, shape (H, W), strictly positive."""

    @abstractmethod
    def infer_objects(self, image: np.ndarray):
        """(seg, states): (K+1, H, W) per-pixel simplex with background last,
        and one ObjectState per foreground object."""


class ImaginationProvider(ABC):
    """Predicts image/depth/segmentation for regions warping cannot reach."""

    @abstractmethod
    def imagine(self, frame_slices: np.ndarray, logdepth_slices: np.ndarray,
                kinematics, ego):
        """(imag_image, imag_depth, imag_seg) for the next frame.

        frame_slices: (K+1, H, W, 3) current frame masked per slot;
        logdepth_slices: (K+1, H, W) log-depth masked per slot.
        """


def masked_slices(image: np.ndarray, depth: np.ndarray, seg: np.ndarray):
    """Per-slot masked image and log-depth stacks fed to imagination."""
    frame_slices = image[None, :, :, :] * seg[:, :, :, None]
    logdepth_slices = np.log(depth)[None, :, :] * seg
    return frame_slices, logdepth_slices


# ---------------------------------------------------------------------------
# validation seam


def validate_inference(depth: np.ndarray, seg: np.ndarray, states,
                       cam: CameraIntrinsics, config: Config) -> None:
    """Check DepthMap/SegMap/ObjectState invariants; raise InvariantViolation."""
    shape = (cam.height, cam.width)
    if depth.shape != shape:
        raise InvariantViolation(f"depth shape {depth.shape}, expected {shape}")
    if not np.all(np.isfinite(depth)) or np.any(depth <= 0):
        raise InvariantViolation("depth must be finite and strictly positive")
    if seg.ndim != 3 or seg.shape[1:] != shape:
        raise InvariantViolation(f"segmentation shape {seg.shape}, expected (K+1,)+{shape}")
    if np.any(seg < -1e-12) or not np.all(np.isfinite(seg)):
        raise InvariantViolation("segmentation probabilities must be finite and >= 0")
    sums = seg.sum(axis=0)
    if np.max(np.abs(sums - 1.0)) > 1e-6:
        raise InvariantViolation("segmentation must be a per-pixel simplex (sum 1 within 1e-6)")
    if len(states) != seg.shape[0] - 1:
        raise InvariantViolation(
            f"{len(states)} object states for {seg.shape[0] - 1} foreground slots")
    for idx, state in enumerate(states):
        loc = state.location
        if not np.all(np.isfinite(loc)):
            raise InvariantViolation(f"object {idx}: non-finite location")
        dist = float(np.linalg.norm(loc))
        if dist > config.max_state_distance * (1 + 1e-9):
            raise InvariantViolation(f"object {idx}: distance {dist:.3f} beyond limit")
        if dist > 0:
            angle = float(np.arccos(np.clip(loc[1] / dist, -1.0, 1.0)))
            if angle > config.max_view_angle + 1e-9:
                raise InvariantViolation(f"object {idx}: viewing angle {angle:.3f} beyond limit")
        try:
            validate_distribution(state.pose, tol=1e-6)
        except ValueError as exc:
            raise InvariantViolation(f"object {idx}: bad pose distribution: {exc}") from exc
        if state.pose.size != config.pose_bins:
            raise InvariantViolation(
                f"object {idx}: pose over {state.pose.size} bins, expected {config.pose_bins}")
        if not np.all(np.isfinite(state.identity)):
            raise InvariantViolation(f"object {idx}: non-finite identity code")


# ---------------------------------------------------------------------------
# oracle


class OracleProvider(InferenceProvider):
    """Ground truth from a simulator triplet, standing in for trained networks."""

    def __init__(self, triplet):
        self._triplet = triplet

    def _frame_index(self, image: np.ndarray) -> int:
        for idx, frame in enumerate(self._triplet.frames):
            if image is frame.image or np.array_equal(image, frame.image):
                return idx
        raise ValueError("image is not one of this triplet's frames")

    def infer_depth(self, image: np.ndarray) -> np.ndarray:
        return self._triplet.frames[self._frame_index(image)].depth.copy()

    def infer_objects(self, image: np.ndarray):
        idx = self._frame_index(image)
        frame = self._triplet.frames[idx]
        n_objects = len(self._triplet.truth[idx])
        seg = np.zeros((n_objects + 1,) + frame.labels.shape)
        for k in range(n_objects):
            seg[k] = frame.labels == k + 1
        seg[n_objects] = frame.labels == 0
        return seg, list(self._triplet.truth[idx])


# ---------------------------------------------------------------------------
# noisy oracle


@dataclass(frozen=True)
class NoiseConfig:
    """Noise scales; a scale of exactly 0 leaves that channel bit-identical."""

    depth_sigma: float = 0.0     # multiplicative log-normal on depth
    location_sigma: float = 0.0  # additive Gaussian on object locations
    pose_sigma: float = 0.0      # Von Mises smoothing width (rad) on poses
    seg_sigma: float = 0.0       # Gaussian logit noise on segmentation

    def __post_init__(self):
        for name in ("depth_sigma", "location_sigma", "pose_sigma", "seg_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def scaled(self, factor: float) -> "NoiseConfig":
        return replace(self,
                       depth_sigma=self.depth_sigma * factor,
                       location_sigma=self.location_sigma * factor,
                       pose_sigma=self.pose_sigma * factor,
                       seg_sigma=self.seg_sigma * factor)


class NoisyOracleProvider(InferenceProvider):
    """Oracle plus seeded, per-frame deterministic noise.

    Noisy locations are projected back inside the viewing-angle/distance
    limits so outputs always satisfy the state invariants (mirroring how the
    inference architecture restricts its own outputs).
    """

    def __init__(self, triplet, noise: NoiseConfig, seed: int, config: Config):
        self._oracle = OracleProvider(triplet)
        self._noise = noise
        self._seed = int(seed)
        self._config = config

    def _rng(self, frame_idx: int, channel: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence((self._seed, frame_idx, channel)))

    def infer_depth(self, image: np.ndarray) -> np.ndarray:
        depth = self._oracle.infer_depth(image)
        if self._noise.depth_sigma == 0:
            return depth
        rng = self._rng(self._oracle._frame_index(image), 0)
        return depth * np.exp(self._noise.depth_sigma * rng.standard_normal(depth.shape))

    def _clamp_location(self, loc: np.ndarray) -> np.ndarray:
        cfg = self._config
        dist = float(np.linalg.norm(loc))
        if dist == 0.0:
            return np.array([0.0, 1e-3, 0.0])
        if dist > cfg.max_state_distance:
            loc = loc * (cfg.max_state_distance / dist)
            dist = cfg.max_state_distance
        axis = np.array([0.0, 1.0, 0.0])
        angle = float(np.arccos(np.clip(loc[1] / dist, -1.0, 1.0)))
        if angle > cfg.max_view_angle:
            perp = loc - loc[1] * axis
            norm = np.linalg.norm(perp)
            perp = perp / norm if norm > 1e-12 else np.array([1.0, 0.0, 0.0])
            loc = dist * (np.cos(cfg.max_view_angle) * axis
                          + np.sin(cfg.max_view_angle) * perp)
        return loc

    def infer_objects(self, image: np.ndarray):
        seg, states = self._oracle.infer_objects(image)
        idx = self._oracle._frame_index(image)
        noise = self._noise
        if noise.location_sigma > 0:
            rng = self._rng(idx, 1)
            states = [
                ObjectState(
                    self._clamp_location(
                        s.location + noise.location_sigma * rng.standard_normal(3)),
                    s.pose, s.identity)
                for s in states
            ]
        if noise.pose_sigma > 0:
            kappa = 1.0 / (noise.pose_sigma ** 2)
            states = [ObjectState(s.location, circular_smooth(s.pose, kappa), s.identity)
                      for s in states]
        if noise.seg_sigma > 0:
            # The 0.25 floor keeps one-hot logit gaps at ln(5) so sigma around
            # 0.5-2 produces a graded rate of argmax flips.
            rng = self._rng(idx, 2)
            logits = np.log(seg + 0.25) + noise.seg_sigma * rng.standard_normal(seg.shape)
            logits -= logits.max(axis=0, keepdims=True)
            seg = np.exp(logits)
            seg /= seg.sum(axis=0, keepdims=True)
        return seg, states


# ---------------------------------------------------------------------------
# imagination


class BaselineImagination(ImaginationProvider):
    """Persistence baseline: reassembles frame t from its slices and carries it
    forward unchanged. Its segmentation output is uninformative (uniform)."""

    def imagine(self, frame_slices: np.ndarray, logdepth_slices: np.ndarray,
                kinematics, ego):
        image = frame_slices.sum(axis=0)
        depth = np.exp(logdepth_slices.sum(axis=0))
        n_slots = frame_slices.shape[0]
        seg = np.full(logdepth_slices.shape, 1.0 / n_slots)
        return image, depth, seg


# ---------------------------------------------------------------------------
# file provider


class FileProvider(InferenceProvider):
    """Reads inference outputs for each frame of a triplet from a directory.

    Layout (frame index t in 0..2, slot k in 0..K with K the background):
        depth{t}.pfm      Euclidean depth (Pf)
        seg{t}_{k}.pfm    per-slot segmentation probability (Pf)
        states{t}.json    [{"location": [x,y,z], "pose": [...b], "identity": [...10]}]
    """

    def __init__(self, directory: str, frames, num_objects: int):
        self._dir = directory
        self._frames = list(frames)
        self._num_objects = int(num_objects)

    def _frame_index(self, image: np.ndarray) -> int:
        for idx, ref in enumerate(self._frames):
            if image is ref or np.array_equal(image, ref):
                return idx
        raise ValueError("image is not one of this provider's frames")

    def _path(self, name: str) -> str:
        path = os.path.join(self._dir, name)
        if not os.path.exists(path):
            raise FileNotFoundError(f"file provider input missing: {path}")
        return path

    def infer_depth(self, image: np.ndarray) -> np.ndarray:
        return read_pfm(self._path(f"depth{self._frame_index(image)}.pfm"))

    def infer_objects(self, image: np.ndarray):
        idx = self._frame_index(image)
        seg = np.stack([read_pfm(self._path(f"seg{idx}_{k}.pfm"))
                        for k in range(self._num_objects + 1)])
        with open(self._path(f"states{idx}.json"), "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        states = [
            ObjectState(np.asarray(s["location"], dtype=np.float64),
                        np.asarray(s["pose"], dtype=np.float64),
                        np.asarray(s.get("identity", [0.0] * CODE_DIM), dtype=np.float64))
            for s in raw
        ]
        return seg, states


def provider_from_spec(spec: str, triplet, config: Config) -> InferenceProvider:
    """Build a provider from a CLI spec: 'oracle', 'noisy:k=v,...', 'files:DIR'."""
    if spec == "oracle":
        return OracleProvider(triplet)
    if spec.startswith("noisy:") or spec == "noisy":
        params = {}
        if ":" in spec:
            for item in spec.split(":", 1)[1].split(","):
                if not item:
                    continue
                key, _, value = item.partition("=")
                params[key.strip()] = float(value)
        noise = NoiseConfig(depth_sigma=params.pop("depth", 0.0),
                            location_sigma=params.pop("location", 0.0),
                            pose_sigma=params.pop("pose", 0.0),
                            seg_sigma=params.pop("seg", 0.0))
        seed = int(params.pop("seed", config.seed))
        if params:
            raise ValueError(f"unknown noise parameters: {sorted(params)}")
        return NoisyOracleProvider(triplet, noise, seed, config)
    if spec.startswith("files:"):
        return FileProvider(spec.split(":", 1)[1],
                            [frame.image for frame in triplet.frames],
                            config.num_objects)
    raise ValueError(f"unknown provider spec {spec!r}; expected oracle|noisy:...|files:DIR")
