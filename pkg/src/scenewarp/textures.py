"""Procedural unlit textures (checker / stripe / solid) over (u, v) in [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Texture", "CHECKER", "STRIPE", "SOLID"]

CHECKER = "checker"
STRIPE = "stripe"
SOLID = "solid"

_KINDS = (CHECKER, STRIPE, SOLID)


@dataclass(frozen=True)
class Texture:
    kind: str
    color_a: np.ndarray
    color_b: np.ndarray
    freq: float = 3.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown texture kind {self.kind!r}")
        for name in ("color_a", "color_b"):
            c = np.asarray(getattr(self, name), dtype=np.float64)
            if c.shape != (3,) or np.any(c < 0) or np.any(c > 1):
                raise ValueError(f"{name} must be an RGB triple in [0, 1]")
            object.__setattr__(self, name, c)
        if not self.freq > 0:
            raise ValueError("texture frequency must be positive")

    def sample(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Colors of shape u.shape + (3,); u, v wrap outside [0, 1]."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        if self.kind == SOLID:
            return np.broadcast_to(self.color_a, u.shape + (3,)).copy()
        cu = np.floor(u * self.freq).astype(np.int64)
        if self.kind == STRIPE:
            pick_b = cu % 2 == 1
        else:
            cv = np.floor(v * self.freq).astype(np.int64)
            pick_b = (cu + cv) % 2 == 1
        return np.where(pick_b[..., None], self.color_b, self.color_a)

    @staticmethod
    def random(rng: np.random.Generator, freq_range=(2.0, 4.0)) -> "Texture":
        kind = rng.choice(_KINDS, p=[0.5, 0.3, 0.2])
        color_a = rng.uniform(0.05, 0.95, size=3)
        color_b = rng.uniform(0.05, 0.95, size=3)
        freq = float(np.floor(rng.uniform(freq_range[0], freq_range[1] + 1.0)))
        return Texture(str(kind), color_a, color_b, freq)
