"""Soft matching of objects across frames via an RBF over identity codes."""

from __future__ import annotations

import numpy as np

__all__ = ["CODE_DIM", "identity_code", "background_code", "match_scores"]

CODE_DIM = 10


def identity_code(object_id: int) -> np.ndarray:
    """Deterministic unit-norm code for a ground-truth object id (>= 1).

    Ids hash onto standard basis vectors, so distinct ids (up to 10 concurrent
    objects) are separated by sqrt(2) and every code sits at distance 1 from
    the zero background code.
    """
    if object_id < 1:
        raise ValueError(f"object ids start at 1, got {object_id}")
    code = np.zeros(CODE_DIM)
    code[(object_id - 1) % CODE_DIM] = 1.0
    return code


def background_code() -> np.ndarray:
    """The background's fixed identity code: the zero vector."""
    return np.zeros(CODE_DIM)


def match_scores(codes_t: np.ndarray, codes_prev: np.ndarray, sigma: float) -> np.ndarray:
    """Row-stochastic matching matrix between two frames' identity codes.

    Entry (k, l) scores how well entity k of the current frame matches entity
    l of the previous frame: a Gaussian RBF exp(-||z_k - z_l||^2 / (2 sigma^2))
    normalized over l. Both code lists must have the same length (K+1, with
    the background code last) and dimension.
    """
    codes_t = np.atleast_2d(np.asarray(codes_t, dtype=np.float64))
    codes_prev = np.atleast_2d(np.asarray(codes_prev, dtype=np.float64))
    if codes_t.shape != codes_prev.shape:
        raise ValueError(
            f"code lists must match in shape, got {codes_t.shape} vs {codes_prev.shape}"
        )
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    diff = codes_t[:, None, :] - codes_prev[None, :, :]
    d2 = np.sum(diff * diff, axis=-1)
    # Shift by the row minimum before exponentiating: normalization is
    # unaffected and rows cannot underflow to all-zero at small sigma.
    logits = -(d2 - d2.min(axis=1, keepdims=True)) / (2.0 * sigma * sigma)
    scores = np.exp(logits)
    return scores / scores.sum(axis=1, keepdims=True)
