"""Four classifier families behind one train/predict contract.

``fit`` standardizes numeric inputs per feature for KNN/SVM/LR (binary 0/1
inputs pass through untouched, and random forests always consume raw
values), freezes the scaling into the returned model, and dispatches to the
family trainer. Single-class training labels produce a degenerate
constant-predictor model without running any solver.

Decision values and label thresholds per family: SVM margin (label 1 iff
value > 0), LR probability and RF/KNN vote fraction (label 1 iff value >
0.5; an exact 0.5 yields label 0).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import forest, knn, logreg, svm
from .specs import (FAMILIES, FAMILY_RANK, LearnerSpec, SpecError, knn_spec,
                    lr_spec, rf_spec, spec_from_dict, svm_spec)
from .svm import rbf_kernel

__all__ = [
    "FAMILIES", "FAMILY_RANK", "LearnerSpec", "SpecError", "TrainedModel",
    "DegenerateModelError", "fit", "predict", "predict_many", "decision_value",
    "decision_values", "rf_spec", "knn_spec", "svm_spec", "lr_spec",
    "spec_from_dict", "rbf_kernel", "model_from_dict",
]

MODEL_FORMAT_VERSION = 1


class DegenerateModelError(RuntimeError):
    """Raised when a margin/probability is requested from a constant model."""


@dataclass(frozen=True)
class TrainedModel:
    spec: LearnerSpec
    n_features: int
    scale_mean: np.ndarray | None  # None means identity scaling
    scale_std: np.ndarray | None
    degenerate: bool
    constant_label: int | None
    state: object | None

    def _scale(self, X: np.ndarray) -> np.ndarray:
        if self.scale_mean is None:
            return X
        return (X - self.scale_mean) / self.scale_std

    def to_dict(self) -> dict:
        if self.state is None:
            state_payload = None
        elif self.spec.family == "rf":
            state_payload = forest.forest_to_dict(self.state)
        elif self.spec.family == "knn":
            state_payload = knn.knn_to_dict(self.state)
        elif self.spec.family == "svm":
            state_payload = svm.svm_to_dict(self.state)
        else:
            state_payload = logreg.logreg_to_dict(self.state)
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "family": self.spec.family,
            "params": self.spec.params,
            "n_features": self.n_features,
            "scale_mean": None if self.scale_mean is None else self.scale_mean.tolist(),
            "scale_std": None if self.scale_std is None else self.scale_std.tolist(),
            "degenerate": self.degenerate,
            "constant_label": self.constant_label,
            "state": state_payload,
        }

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def model_from_dict(payload: dict) -> TrainedModel:
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version: {version!r}")
    spec = spec_from_dict(payload)
    state_payload = payload["state"]
    if state_payload is None:
        state = None
    elif spec.family == "rf":
        state = forest.forest_from_dict(state_payload)
    elif spec.family == "knn":
        state = knn.knn_from_dict(state_payload)
    elif spec.family == "svm":
        state = svm.svm_from_dict(state_payload)
    else:
        state = logreg.logreg_from_dict(state_payload)
    mean = payload["scale_mean"]
    std = payload["scale_std"]
    return TrainedModel(
        spec=spec,
        n_features=int(payload["n_features"]),
        scale_mean=None if mean is None else np.asarray(mean, dtype=np.float64),
        scale_std=None if std is None else np.asarray(std, dtype=np.float64),
        degenerate=bool(payload["degenerate"]),
        constant_label=payload["constant_label"],
        state=state,
    )


def _is_binary(X: np.ndarray) -> bool:
    return bool(np.isin(X, (0.0, 1.0)).all())


def fit(spec: LearnerSpec, X: np.ndarray, y: np.ndarray, seed: int = 0) -> TrainedModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training rows")
    if not np.isfinite(X).all():
        raise ValueError("training inputs contain non-finite values")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    y = y.astype(np.int8)

    classes = np.unique(y)
    if classes.size == 1:
        return TrainedModel(spec=spec, n_features=X.shape[1], scale_mean=None,
                            scale_std=None, degenerate=True,
                            constant_label=int(classes[0]), state=None)

    scale_mean = scale_std = None
    Xs = X
    if spec.family != "rf" and not _is_binary(X):
        scale_mean = X.mean(axis=0)
        scale_std = X.std(axis=0)
        scale_std = np.where(scale_std < 1e-12, 1.0, scale_std)
        Xs = (X - scale_mean) / scale_std

    p = spec.params
    if spec.family == "rf":
        rf_seed = p["seed"] if p.get("seed") is not None else seed
        state = forest.fit_forest(Xs, y, p["n_estimators"], p["max_depth"], rf_seed)
    elif spec.family == "knn":
        state = knn.fit_knn(Xs, y, p["k"])
    elif spec.family == "svm":
        state = svm.fit_svm(Xs, y, p["kernel"], p["c"], p["gamma"])
    elif spec.family == "lr":
        state = logreg.fit_logreg(Xs, y, p["l2_strength"], p["max_iterations"],
                                  p["tolerance"])
    else:
        raise SpecError(f"unknown learner family {spec.family!r}")

    return TrainedModel(spec=spec, n_features=X.shape[1], scale_mean=scale_mean,
                        scale_std=scale_std, degenerate=False, constant_label=None,
                        state=state)


def _check_query(model: TrainedModel, Q: np.ndarray) -> np.ndarray:
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[1] != model.n_features:
        raise ValueError(
            f"query has {Q.shape[-1] if Q.ndim else 0} features, model expects {model.n_features}"
        )
    return Q


def decision_values(model: TrainedModel, Q: np.ndarray) -> np.ndarray:
    """Margins (SVM), probabilities (LR) or vote fractions (RF/KNN) per query row."""
    if model.degenerate:
        raise DegenerateModelError(
            "constant model trained on single-class labels has no decision values"
        )
    Q = model._scale(_check_query(model, Q))
    if model.spec.family == "rf":
        return forest.forest_vote_fraction(model.state, Q)
    if model.spec.family == "knn":
        return knn.knn_vote_fraction(model.state, Q)
    if model.spec.family == "svm":
        return svm.svm_decision(model.state, Q)
    return logreg.logreg_probability(model.state, Q)


def decision_value(model: TrainedModel, x: np.ndarray) -> float:
    return float(decision_values(model, np.atleast_2d(x))[0])


def predict_many(model: TrainedModel, Q: np.ndarray) -> np.ndarray:
    """Batch labels; strict-inequality thresholds mean every tie resolves to 0."""
    if model.degenerate:
        _check_query(model, np.atleast_2d(Q))
        return np.full(np.atleast_2d(Q).shape[0], model.constant_label, dtype=np.int8)
    values = decision_values(model, Q)
    cut = 0.0 if model.spec.family == "svm" else 0.5
    return (values > cut).astype(np.int8)


def predict(model: TrainedModel, x: np.ndarray) -> int:
    return int(predict_many(model, np.atleast_2d(x))[0])
