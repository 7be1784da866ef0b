"""K-nearest-neighbors by exhaustive Euclidean search.

Tie rules: equal-distance neighbors are admitted in ascending training-index
order (stable sort on squared distance); an equal vote split yields label 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class KnnState:
    X: np.ndarray  # stored training inputs, already scaled
    y: np.ndarray
    k: int


def fit_knn(X: np.ndarray, y: np.ndarray, k: int) -> KnnState:
    if k > X.shape[0]:
        raise ValueError(f"k={k} exceeds the {X.shape[0]} training points")
    return KnnState(X=X.astype(np.float64, copy=True), y=y.astype(np.int8, copy=True), k=k)


def knn_vote_fraction(state: KnnState, Q: np.ndarray) -> np.ndarray:
    """Fraction of the k nearest neighbors labeled 1, per query row."""
    # Direct (q - x)^2 sums; the expanded |q|^2 + |x|^2 - 2qx form rounds
    # differently and could reorder genuinely tied distances.
    out = np.empty(Q.shape[0], dtype=np.float64)
    for i, q in enumerate(Q):
        d2 = ((state.X - q) ** 2).sum(axis=1)
        nearest = np.argsort(d2, kind="stable")[: state.k]
        out[i] = state.y[nearest].sum() / state.k
    return out


def knn_to_dict(state: KnnState) -> dict:
    return {"X": state.X.tolist(), "y": state.y.tolist(), "k": state.k}


def knn_from_dict(payload: dict) -> KnnState:
    return KnnState(
        X=np.asarray(payload["X"], dtype=np.float64),
        y=np.asarray(payload["y"], dtype=np.int8),
        k=int(payload["k"]),
    )
