"""Run configuration: camera, scene-generation ranges, and model knobs.

Every numeric default that is not dictated by the prediction pipeline itself
(field of view 90 degrees, 3 objects, 7-frame sequences, loss weight 1.0) is a
documented choice; the dataset writer echoes the full config into meta.json so
runs are reproducible from their outputs alone.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass

__all__ = ["Config", "load_config", "thread_count", "THREADS_ENV_VAR"]

THREADS_ENV_VAR = "SCENEWARP_THREADS"


@dataclass(frozen=True)
class Config:
    # core
    seed: int = 0
    resolution: int = 64
    fov: float = math.pi / 2.0  # horizontal field of view, radians
    num_objects: int = 3
    pose_bins: int = 16
    sequence_length: int = 7
    strides: tuple[int, ...] = (1, 2, 3)

    # model knobs
    beta: float = 1.0            # occlusion sharpness, per world unit of depth
    sigma_rbf: float = 0.1       # identity-code matching bandwidth
    kappa_prior: float = 1.0     # Von Mises prior concentration over rotation speeds
    kappa_interp: float | None = None  # pose-shift kernel concentration; None -> pose_bins^2 / 4
    delta_collapse: float = 1.0  # clamp distance in the anti-collapse regularizer
    loss_lambda: float = 1.0     # weight on the consistency/regularizer losses

    # room and camera
    room_half: float = 4.0
    room_height: float = 3.0
    camera_height: float = 1.2
    camera_step: tuple[float, float] = (0.03, 0.12)    # per-frame translation magnitude
    camera_pan: float = 0.06                           # max |pan| per frame, radians
    # Translation headings stay within this angle of pure-lateral (relative to
    # the current facing), maximizing motion parallax; >= pi/2 allows any heading.
    camera_heading_sector: float = 0.35
    camera_clearance: float = 1.2                      # min camera-object distance

    # objects
    half_size: tuple[float, float] = (0.25, 0.50)
    object_speed: tuple[float, float] = (0.02, 0.07)   # per-frame horizontal speed
    object_spin: float = 0.035                         # max |yaw rate| per frame, radians
    texture_freq: tuple[float, float] = (2.0, 4.0)
    spawn_margin: float = 0.25                         # extra spacing between spawned objects

    # inference-state limits (provider outputs must respect these)
    view_angle_factor: float = 1.2                     # times fov/2
    max_state_distance: float = 20.0

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")
        if not 0 < self.fov < math.pi:
            raise ValueError("fov must be in (0, pi)")
        if self.num_objects < 0 or self.num_objects > 10:
            raise ValueError("num_objects must be in 0..10")
        if self.pose_bins < 2 or self.pose_bins % 2 != 0:
            raise ValueError("pose_bins must be an even integer >= 2")
        if self.sequence_length < 3:
            raise ValueError("sequence_length must be >= 3")
        if any(s < 1 for s in self.strides):
            raise ValueError("strides must be positive")
        for name in ("beta", "sigma_rbf", "kappa_prior", "delta_collapse",
                     "room_half", "room_height", "camera_height", "camera_clearance",
                     "object_spin", "camera_pan", "max_state_distance", "spawn_margin",
                     "camera_heading_sector"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.sigma_rbf == 0:
            raise ValueError("sigma_rbf must be positive")
        for name in ("camera_step", "half_size", "object_speed", "texture_freq"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise ValueError(f"{name} range must satisfy 0 <= lo <= hi")
        if self.kappa_interp is not None and self.kappa_interp <= 0:
            raise ValueError("kappa_interp must be positive")

    @property
    def interp_kappa(self) -> float:
        if self.kappa_interp is not None:
            return self.kappa_interp
        return self.pose_bins ** 2 / 4.0

    @property
    def max_view_angle(self) -> float:
        return self.view_angle_factor * self.fov / 2.0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key, value in d.items():
            if isinstance(value, tuple):
                d[key] = list(value)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in fields:
                raise ValueError(f"unknown config key {key!r}")
            if isinstance(value, list):
                value = tuple(value)
            kwargs[key] = value
        return cls(**kwargs)


def _parse_scalar(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path: str) -> Config:
    """Read a config file: JSON object, or `key=value` lines (values in JSON form)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    stripped = raw.lstrip()
    if stripped.startswith("{"):
        return Config.from_dict(json.loads(raw))
    data = {}
    for lineno, line in enumerate(raw.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        data[key.strip()] = _parse_scalar(value)
    return Config.from_dict(data)


def thread_count() -> int:
    """Default worker count, controlled only by the SCENEWARP_THREADS env var."""
    raw = os.environ.get(THREADS_ENV_VAR, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)
