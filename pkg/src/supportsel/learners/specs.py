"""Learner specifications: family tag plus validated hyperparameters."""

from __future__ import annotations

from dataclasses import dataclass

FAMILIES = ("rf", "knn", "svm", "lr")

# Tie-breaking order when two configurations score identically.
FAMILY_RANK = {"rf": 0, "knn": 1, "svm": 2, "lr": 3}


class SpecError(ValueError):
    """Invalid learner family or hyperparameter set."""


@dataclass(frozen=True)
class LearnerSpec:
    family: str
    params: dict

    def key(self) -> str:
        """Canonical string form, stable across runs (used for seeding and caching)."""
        inner = ",".join(f"{k}={self.params[k]}" for k in sorted(self.params))
        return f"{self.family}({inner})"

    def hyper_sort_key(self) -> tuple:
        """Numeric tuple ordering 'smaller hyperparameters first' within a family."""
        p = self.params
        if self.family == "rf":
            depth = p["max_depth"]
            return (p["n_estimators"], float("inf") if depth is None else depth)
        if self.family == "knn":
            return (p["k"],)
        if self.family == "svm":
            gamma = p["gamma"]
            return (
                0 if p["kernel"] == "linear" else 1,
                p["c"],
                -1.0 if gamma == "scale" else gamma,
            )
        return (p["l2_strength"], p["max_iterations"])

    def display_name(self) -> str:
        """Table-facing model name, e.g. 'RF, 50 estimators' or 'KNN K=7'."""
        if self.family == "rf":
            return f"RF, {self.params['n_estimators']} estimators"
        if self.family == "knn":
            return f"KNN K={self.params['k']}"
        if self.family == "svm":
            return "SVM Linear" if self.params["kernel"] == "linear" else "SVM RBF"
        return "LR"


def rf_spec(n_estimators: int = 50, max_depth: int | None = None,
            seed: int | None = None) -> LearnerSpec:
    if not isinstance(n_estimators, int) or n_estimators <= 0:
        raise SpecError(f"n_estimators must be a positive integer, got {n_estimators!r}")
    if max_depth is not None and (not isinstance(max_depth, int) or max_depth <= 0):
        raise SpecError(f"max_depth must be a positive integer or None, got {max_depth!r}")
    return LearnerSpec("rf", {"n_estimators": n_estimators, "max_depth": max_depth,
                              "seed": seed})


def knn_spec(k: int = 5) -> LearnerSpec:
    if not isinstance(k, int) or k <= 0 or k % 2 == 0:
        raise SpecError(f"k must be an odd positive integer, got {k!r}")
    return LearnerSpec("knn", {"k": k})


def svm_spec(kernel: str = "linear", c: float = 1.0, gamma: float | str = "scale") -> LearnerSpec:
    if kernel not in ("linear", "rbf"):
        raise SpecError(f"kernel must be 'linear' or 'rbf', got {kernel!r}")
    if not c > 0:
        raise SpecError(f"cost c must be positive, got {c!r}")
    if gamma != "scale" and not (isinstance(gamma, (int, float)) and gamma > 0):
        raise SpecError(f"gamma must be positive or 'scale', got {gamma!r}")
    return LearnerSpec("svm", {"kernel": kernel, "c": float(c), "gamma": gamma})


def lr_spec(l2_strength: float = 1.0, max_iterations: int = 1000,
            tolerance: float = 1e-6) -> LearnerSpec:
    if l2_strength < 0:
        raise SpecError(f"l2_strength must be non-negative, got {l2_strength!r}")
    if not isinstance(max_iterations, int) or max_iterations <= 0:
        raise SpecError(f"max_iterations must be a positive integer, got {max_iterations!r}")
    if not tolerance > 0:
        raise SpecError(f"tolerance must be positive, got {tolerance!r}")
    return LearnerSpec("lr", {"l2_strength": float(l2_strength),
                              "max_iterations": max_iterations,
                              "tolerance": float(tolerance)})


def spec_from_dict(payload: dict) -> LearnerSpec:
    family = payload.get("family")
    params = dict(payload.get("params", {}))
    if family == "rf":
        return rf_spec(params.get("n_estimators", 50), params.get("max_depth"),
                       params.get("seed"))
    if family == "knn":
        return knn_spec(params.get("k", 5))
    if family == "svm":
        return svm_spec(params.get("kernel", "linear"), params.get("c", 1.0),
                        params.get("gamma", "scale"))
    if family == "lr":
        return lr_spec(params.get("l2_strength", 1.0), params.get("max_iterations", 1000),
                       params.get("tolerance", 1e-6))
    raise SpecError(f"unknown learner family {family!r}")
