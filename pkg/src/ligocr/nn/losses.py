from __future__ import annotations

import warnings

import numpy as np

PROB_FLOOR = 1e-12


def weighted_cross_entropy(probs: np.ndarray, labels: np.ndarray, weights: np.ndarray | None = None):
    """Mean of w[y_i] * -log p[i, y_i] over the batch.

    ``labels`` are output indices, ``weights`` a per-index vector (None for
    all ones). Returns (loss, d loss / d probs).
    """
    probs = np.asarray(probs)
    labels = np.asarray(labels, dtype=np.int64)
    b, k = probs.shape
    if labels.shape != (b,) or labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise ValueError(f"labels must be {b} indices in [0, {k})")
    w = np.ones(k, probs.dtype) if weights is None else np.asarray(weights, probs.dtype)
    rows = np.arange(b)
    p = probs[rows, labels]
    if (p < PROB_FLOOR).any():
        warnings.warn(f"probability below {PROB_FLOOR} at a true label; clamped", RuntimeWarning, stacklevel=2)
        p = np.maximum(p, PROB_FLOOR)
    wy = w[labels]
    loss = float(np.sum(wy * -np.log(p)) / b)
    grad = np.zeros_like(probs)
    grad[rows, labels] = -wy / (p * b)
    return loss, grad
