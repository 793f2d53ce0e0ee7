"""Object kinematics from two frames' inferred states.

Translational velocity is a match-weighted average of egomotion-compensated
spatial offsets. Rotation is handled on b discrete yaw bins: the likelihood of
each discrete rotation speed is the circular cross-correlation of the two
frames' pose distributions, combined with a Von Mises prior favoring slow
rotation, soft-mixed over match candidates, and reduced to a point estimate by
a population vector.

Pose bins cover (0, 2pi] with centers 2*pi*m/b for m = 1..b (array index m-1).
Rotation-speed bins are 2*pi*n/b for n = -(b/2-1) .. b/2; note the grid is
asymmetric about zero (it contains +pi but not -pi, the same angle mod 2pi).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import EgoMotion, apparent_location, yaw_matrix
from .matching import CODE_DIM, background_code

__all__ = [
    "ObjectState",
    "Kinematics",
    "bin_centers",
    "bin_width",
    "speed_values",
    "one_hot_pose",
    "uniform_pose",
    "circular_smooth",
    "shift_pose",
    "angular_likelihood",
    "angular_posterior",
    "soft_angular_posterior",
    "population_vector",
    "estimate_velocity",
    "predict_location",
    "predict_pose",
    "background_state",
]


@dataclass(frozen=True)
class ObjectState:
    """One object's inferred camera-frame location, pose distribution, identity code."""

    location: np.ndarray
    pose: np.ndarray
    identity: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.location, dtype=np.float64)
        pose = np.asarray(self.pose, dtype=np.float64)
        code = np.asarray(self.identity, dtype=np.float64)
        if loc.shape != (3,):
            raise ValueError(f"location must be a 3-vector, got {loc.shape}")
        if pose.ndim != 1:
            raise ValueError("pose must be a 1-D distribution over yaw bins")
        if code.shape != (CODE_DIM,):
            raise ValueError(f"identity code must have dimension {CODE_DIM}")
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "pose", pose)
        object.__setattr__(self, "identity", code)


@dataclass(frozen=True)
class Kinematics:
    """Per-object motion estimates in the camera frame at t.

    velocity: (K, 3); angular: (K, b) posterior over rotation-speed bins
    (speed_values order); omega_point: (K,) population-vector point estimates.
    """

    velocity: np.ndarray
    angular: np.ndarray
    omega_point: np.ndarray


def bin_centers(b: int) -> np.ndarray:
    return 2.0 * np.pi * (np.arange(b) + 1) / b


def bin_width(b: int) -> float:
    return 2.0 * np.pi / b


def speed_values(b: int) -> np.ndarray:
    """Discrete rotation speeds 2*pi*n/b, n = -(b/2-1) .. b/2."""
    n = np.arange(b) - (b // 2 - 1)
    return 2.0 * np.pi * n / b


def _speed_residues(b: int) -> np.ndarray:
    """Residue class (bin-difference index mod b) of each speed bin."""
    return (np.arange(b) - (b // 2 - 1)) % b


def one_hot_pose(angle: float, b: int) -> np.ndarray:
    """Probability 1 at the yaw bin whose center is nearest to ``angle``."""
    m = int(np.rint(angle * b / (2.0 * np.pi)))
    pose = np.zeros(b)
    pose[(m - 1) % b] = 1.0
    return pose


def uniform_pose(b: int) -> np.ndarray:
    return np.full(b, 1.0 / b)


def validate_distribution(probs: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size < 2:
        raise ValueError("expected a 1-D distribution over at least 2 bins")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ValueError("distribution entries must be finite and non-negative")
    if abs(probs.sum() - 1.0) > tol:
        raise ValueError(f"distribution must sum to 1 within {tol}, got {probs.sum()!r}")
    return probs


def _vm_kernel(b: int, offset: float, kappa: float) -> np.ndarray:
    """Normalized Von Mises weights over bin offsets, centered at ``offset``.

    exp is taken of kappa*(cos - 1) so large concentrations cannot overflow.
    """
    angles = 2.0 * np.pi * np.arange(b) / b
    kernel = np.exp(kappa * (np.cos(angles - offset) - 1.0))
    return kernel / kernel.sum()


def circular_smooth(probs: np.ndarray, kappa: float) -> np.ndarray:
    """Circular convolution with a zero-centered Von Mises kernel."""
    probs = np.asarray(probs, dtype=np.float64)
    b = probs.size
    kernel = _vm_kernel(b, 0.0, kappa)
    out = np.zeros(b)
    for o in range(b):
        out += kernel[o] * np.roll(probs, o)
    return out / out.sum()


def shift_pose(probs: np.ndarray, delta: float, kappa: float) -> np.ndarray:
    """Distribution of (X + delta) for X distributed over the circular bins.

    Whole-bin parts of the shift are exact circular rolls; only the fractional
    remainder is redistributed through a Von Mises kernel of concentration
    ``kappa``, so bin-multiple shifts (including zero) stay exact.
    """
    probs = np.asarray(probs, dtype=np.float64)
    b = probs.size
    width = 2.0 * np.pi / b
    steps = int(np.rint(delta / width))
    frac = delta - steps * width
    rolled = np.roll(probs, steps % b)
    if abs(frac) < 1e-12:
        return rolled
    kernel = _vm_kernel(b, frac, kappa)
    out = np.zeros(b)
    for o in range(b):
        out += kernel[o] * np.roll(rolled, o)
    return out / out.sum()


def angular_likelihood(pose_t: np.ndarray, pose_prev: np.ndarray) -> np.ndarray:
    """Unnormalized likelihood of each discrete rotation speed (speed_values order).

    L(2*pi*n/b) sums pose_prev[l] * pose_t[m] over all bin pairs with
    m - l = n (mod b): the circular cross-correlation of the two pose
    distributions. The per-speed accumulation runs in increasing l so an
    enumeration of all b^2 pairs reproduces it bit-for-bit.
    """
    pose_t = np.asarray(pose_t, dtype=np.float64)
    pose_prev = np.asarray(pose_prev, dtype=np.float64)
    if pose_t.shape != pose_prev.shape or pose_t.ndim != 1:
        raise ValueError("pose distributions must be 1-D and of equal length")
    b = pose_t.size
    corr = np.zeros(b)
    for l in range(b):
        corr += pose_prev[l] * np.roll(pose_t, -l)
    return corr[_speed_residues(b)]


def angular_posterior(likelihood: np.ndarray, kappa: float) -> np.ndarray:
    """Likelihood times a Von Mises(0, kappa) prior over the speed bins, normalized."""
    likelihood = np.asarray(likelihood, dtype=np.float64)
    if np.any(likelihood < 0):
        raise ValueError("likelihood must be non-negative")
    prior = np.exp(kappa * (np.cos(speed_values(likelihood.size)) - 1.0))
    post = likelihood * prior
    total = post.sum()
    if total <= 0:
        raise ValueError("likelihood is zero everywhere; posterior undefined")
    return post / total


def soft_angular_posterior(posteriors: np.ndarray, match_row: np.ndarray) -> np.ndarray:
    """Match-weighted mixture of per-candidate posteriors, renormalized."""
    posteriors = np.asarray(posteriors, dtype=np.float64)
    match_row = np.asarray(match_row, dtype=np.float64)
    if posteriors.shape[0] != match_row.size:
        raise ValueError("need one posterior per match candidate")
    mix = match_row @ posteriors
    return mix / mix.sum()


def population_vector(probs: np.ndarray, angles: np.ndarray, eps: float = 1e-9) -> float:
    """Angle of the probability-weighted sum of unit vectors at ``angles``."""
    probs = np.asarray(probs, dtype=np.float64)
    angles = np.asarray(angles, dtype=np.float64)
    x = float(np.dot(probs, np.cos(angles)))
    y = float(np.dot(probs, np.sin(angles)))
    if np.hypot(x, y) < eps:
        raise ValueError("resultant vector is (near) zero; direction undefined")
    return float(np.arctan2(y, x))


def background_state(b: int) -> ObjectState:
    """The degenerate background entity: zero code, origin location, uniform pose."""
    return ObjectState(np.zeros(3), uniform_pose(b), background_code())


def estimate_velocity(
    state_t: ObjectState,
    states_prev: list[ObjectState],
    match_row: np.ndarray,
    ego_prev: EgoMotion,
) -> np.ndarray:
    """Match-weighted velocity of one object in the camera frame at t.

    Each foreground candidate l votes the offset between the object's current
    location and where candidate l would appear now if it were static
    (apparent_location absorbs the camera's own motion). The background
    candidate (last row entry) votes a zero offset: matching the background
    means the object is static.
    """
    match_row = np.asarray(match_row, dtype=np.float64)
    if match_row.size != len(states_prev):
        raise ValueError("match row length must equal the number of candidates")
    velocity = np.zeros(3)
    for l, prev in enumerate(states_prev[:-1]):
        offset = state_t.location - apparent_location(prev.location, ego_prev)
        velocity += match_row[l] * offset
    return velocity


def predict_location(state: ObjectState, velocity: np.ndarray, ego: EgoMotion) -> np.ndarray:
    """Camera-frame location at t+1 under inertia and the known egomotion."""
    return yaw_matrix(-ego.yaw_rate) @ (state.location + velocity - ego.velocity)


def predict_pose(
    pose: np.ndarray,
    angular: np.ndarray,
    ego_yaw: float,
    kappa: float,
) -> np.ndarray:
    """Pose distribution at t+1: pose (x) rotation speed, then the camera's yaw.

    The circular convolution advances the pose by one step of object rotation;
    the camera's own yaw shifts the result by -ego_yaw, interpolated back onto
    the bin grid with shift_pose (exact for whole-bin shifts).
    """
    pose = np.asarray(pose, dtype=np.float64)
    b = pose.size
    ang_residue = np.empty(b)
    ang_residue[_speed_residues(b)] = np.asarray(angular, dtype=np.float64)
    conv = np.zeros(b)
    for i in range(b):
        conv += pose[i] * np.roll(ang_residue, i)
    out = shift_pose(conv, -ego_yaw, kappa)
    return out / out.sum()
