"""scenewarp: geometric next-frame prediction with a built-in ground-truth simulator.

A library and CLI that predicts the next camera frame from the previous two by
(1) inferring per-frame depth, object segmentation, and object states through a
pluggable provider interface, (2) soft-matching objects across frames by their
identity codes, (3) estimating per-object translational velocity and a Bayesian
rotation-speed posterior over discrete yaw bins, (4) forward-splatting the
current frame along the predicted per-pixel rigid motion, and (5) blending with
an imagination provider where warping has no coverage. A procedural ray-cast
room simulator supplies exact ground truth for verification, and the full
training-loss and evaluation-metric suite is included.
"""

__version__ = "0.1.0"

from .camera import (
    CameraIntrinsics,
    EgoMotion,
    apparent_location,
    focal_from_fov,
    pixel_to_point,
    point_to_pixel,
    yaw_matrix,
)
from .config import Config
from .kinematics import (
    Kinematics,
    ObjectState,
    angular_likelihood,
    angular_posterior,
    estimate_velocity,
    population_vector,
    predict_location,
    predict_pose,
    soft_angular_posterior,
)
from .losses import (
    LossReport,
    center_loss,
    collapse_loss,
    image_loss,
    location_loss,
    pose_loss,
    total_loss,
)
from .matching import identity_code, match_scores
from .metrics import SegEvalResult, ari_fg, matched_iou, pearson, polar_decompose, seg_eval
from .pipeline import evaluate_triplet, predict_triplet
from .providers import (
    BaselineImagination,
    FileProvider,
    ImaginationProvider,
    InferenceProvider,
    InvariantViolation,
    NoiseConfig,
    NoisyOracleProvider,
    OracleProvider,
)
from .scenesim import (
    ObjectSpec,
    RenderOutput,
    SceneSpec,
    Triplet,
    generate_scene,
    make_triplets,
    render,
    render_sequence,
    step_scene,
)
from .warp import PredictionBundle, merge, pixel_target, splat, splat_reference

__all__ = [
    "__version__",
    "CameraIntrinsics", "EgoMotion", "apparent_location", "focal_from_fov",
    "pixel_to_point", "point_to_pixel", "yaw_matrix",
    "Config",
    "Kinematics", "ObjectState", "angular_likelihood", "angular_posterior",
    "estimate_velocity", "population_vector", "predict_location", "predict_pose",
    "soft_angular_posterior",
    "LossReport", "center_loss", "collapse_loss", "image_loss", "location_loss",
    "pose_loss", "total_loss",
    "identity_code", "match_scores",
    "SegEvalResult", "ari_fg", "matched_iou", "pearson", "polar_decompose", "seg_eval",
    "evaluate_triplet", "predict_triplet",
    "BaselineImagination", "FileProvider", "ImaginationProvider", "InferenceProvider",
    "InvariantViolation", "NoiseConfig", "NoisyOracleProvider", "OracleProvider",
    "ObjectSpec", "RenderOutput", "SceneSpec", "Triplet", "generate_scene",
    "make_triplets", "render", "render_sequence", "step_scene",
    "PredictionBundle", "merge", "pixel_target", "splat", "splat_reference",
]
