"""Segmentation and regression metrics: foreground ARI, best-match IoU, Pearson."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SegEvalResult",
    "labels_from_seg",
    "ari_fg",
    "matched_iou",
    "seg_eval",
    "pearson",
    "polar_decompose",
]


@dataclass(frozen=True)
class SegEvalResult:
    ari_fg: float
    mean_iou: float
    per_entity_iou: tuple[float, ...]


def labels_from_seg(seg: np.ndarray) -> np.ndarray:
    """Hard labels from a probabilistic segmentation: argmax over slots.

    Slot k < K maps to object label k+1; the last (background) slot maps to 0.
    """
    seg = np.asarray(seg)
    winner = np.argmax(seg, axis=0)
    labels = winner + 1
    labels[winner == seg.shape[0] - 1] = 0
    return labels.astype(np.int64)


def _contingency(a: np.ndarray, b: np.ndarray):
    a_ids, a_inv = np.unique(a, return_inverse=True)
    b_ids, b_inv = np.unique(b, return_inverse=True)
    counts = np.zeros((a_ids.size, b_ids.size), dtype=np.int64)
    np.add.at(counts, (a_inv, b_inv), 1)
    return counts


def ari_fg(pred_labels: np.ndarray, true_labels: np.ndarray) -> float:
    """Adjusted Rand Index restricted to pixels whose TRUE label is foreground (> 0)."""
    pred_labels = np.asarray(pred_labels)
    true_labels = np.asarray(true_labels)
    if pred_labels.shape != true_labels.shape:
        raise ValueError("label rasters must have equal shape")
    fg = true_labels > 0
    if fg.sum() < 2:
        raise ValueError("need at least 2 foreground pixels for ARI")
    pred = pred_labels[fg].ravel()
    true = true_labels[fg].ravel()
    counts = _contingency(true, pred)
    n = counts.sum()

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(counts).sum()
    sum_a = comb2(counts.sum(axis=1)).sum()
    sum_b = comb2(counts.sum(axis=0)).sum()
    expected = sum_a * sum_b / comb2(n)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # Both partitions are trivial (single cluster each way): perfect agreement.
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def matched_iou(pred_labels: np.ndarray, true_labels: np.ndarray,
                include_background: bool = True) -> tuple[float, tuple[float, ...]]:
    """Greedy one-to-one matching of truth entities to predicted classes by IoU.

    Repeatedly takes the unmatched (truth entity, predicted class) pair with
    the highest IoU; truth entities left unmatched score 0. Returns the mean
    over truth entities (background included unless disabled) and the
    per-entity values in truth-label order.
    """
    pred_labels = np.asarray(pred_labels)
    true_labels = np.asarray(true_labels)
    if pred_labels.shape != true_labels.shape:
        raise ValueError("label rasters must have equal shape")
    true_ids = [t for t in np.unique(true_labels) if include_background or t != 0]
    pred_ids = list(np.unique(pred_labels))
    if not true_ids:
        raise ValueError("no truth entities to match")
    iou = np.zeros((len(true_ids), len(pred_ids)))
    for a, t in enumerate(true_ids):
        t_mask = true_labels == t
        t_size = t_mask.sum()
        for b, p in enumerate(pred_ids):
            p_mask = pred_labels == p
            inter = np.logical_and(t_mask, p_mask).sum()
            union = t_size + p_mask.sum() - inter
            iou[a, b] = inter / union if union > 0 else 0.0
    scores = {t: 0.0 for t in true_ids}
    open_t = set(range(len(true_ids)))
    open_p = set(range(len(pred_ids)))
    while open_t and open_p:
        best = max(((iou[a, b], -a, -b, a, b) for a in sorted(open_t)
                    for b in sorted(open_p)))
        _, _, _, a, b = best
        scores[true_ids[a]] = float(iou[a, b])
        open_t.remove(a)
        open_p.remove(b)
    per_entity = tuple(scores[t] for t in true_ids)
    return float(np.mean(per_entity)), per_entity


def seg_eval(pred_labels: np.ndarray, true_labels: np.ndarray,
             include_background: bool = True) -> SegEvalResult:
    mean_iou, per_entity = matched_iou(pred_labels, true_labels, include_background)
    return SegEvalResult(ari_fg=ari_fg(pred_labels, true_labels),
                         mean_iou=mean_iou, per_entity_iou=per_entity)


def pearson(xs, ys) -> float:
    """Sample Pearson correlation; raises on degenerate input."""
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if xs.size != ys.size:
        raise ValueError("xs and ys must have equal length")
    if xs.size < 2:
        raise ValueError("need at least 2 pairs")
    if np.var(xs) == 0.0 or np.var(ys) == 0.0:
        raise ValueError("zero variance; correlation undefined")
    return float(np.corrcoef(xs, ys)[0, 1])


def polar_decompose(p) -> tuple:
    """(viewing angle from the central line, Euclidean distance).

    The angle is signed in the horizontal plane: atan2(x, y), positive to the
    right of the optical axis. Distance is the full 3D norm. Vectorizes over
    arrays with trailing dimension 3.
    """
    p = np.asarray(p, dtype=np.float64)
    angle = np.arctan2(p[..., 0], p[..., 1])
    distance = np.linalg.norm(p, axis=-1)
    if p.ndim == 1:
        return float(angle), float(distance)
    return angle, distance
