"""Serialized per-target models: the hand-off from evaluation to prediction.

A registry directory holds one JSON file per target (a single model, or a
consensus ensemble with its members' CV scores for tie-breaking) plus an
index. Prediction only loads and applies these files; it never retrains.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import learners
from .learners import TrainedModel, model_from_dict
from .selection import PipelineConfig, consensus_predict, derive_seed
from .survey import BinaryView, Dataset, binarize

REGISTRY_FORMAT_VERSION = 1


@dataclass
class RegistryEntry:
    target: str
    kind: str  # "single" | "consensus"
    models: list[TrainedModel]
    threshold: int
    inputs_binarized: bool
    member_ccrs: list[float] | None = None

    def predict_raw(self, x: np.ndarray) -> int:
        """Predict from a raw 0-5 difficulty vector, applying the entry's
        input encoding first."""
        x = np.asarray(x, dtype=np.float64)
        if self.inputs_binarized:
            x = (x > self.threshold).astype(np.float64)
        if self.kind == "single":
            return learners.predict(self.models[0], x)
        return consensus_predict(self.models, x, self.member_ccrs)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "kind": self.kind,
            "models": [m.to_dict() for m in self.models],
            "threshold": self.threshold,
            "inputs_binarized": self.inputs_binarized,
            "member_ccrs": self.member_ccrs,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RegistryEntry":
        return cls(
            target=payload["target"],
            kind=payload["kind"],
            models=[model_from_dict(m) for m in payload["models"]],
            threshold=int(payload["threshold"]),
            inputs_binarized=bool(payload["inputs_binarized"]),
            member_ccrs=payload.get("member_ccrs"),
        )


def save_registry(entries: list[RegistryEntry], root: str | Path,
                  metadata: dict | None = None) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    index = {
        "format_version": REGISTRY_FORMAT_VERSION,
        "targets": {},
        "metadata": metadata or {},
    }
    for entry in entries:
        filename = f"model_{entry.target}.json"
        (root / filename).write_text(
            json.dumps(entry.to_dict(), sort_keys=True, separators=(",", ":")) + "\n",
            encoding="utf-8",
        )
        index["targets"][entry.target] = filename
    (root / "registry.json").write_text(
        json.dumps(index, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def build_final_entries(dataset: Dataset, report, seed: int,
                        impute_policy: str = "drop") -> list[RegistryEntry]:
    """Refit each target's winning configuration on the full dataset.

    Consensus winners refit every recorded member and keep the members' CV
    scores for the vote tie rule.
    """
    views: dict[tuple[int, bool], BinaryView] = {}
    entries: list[RegistryEntry] = []
    for result in report.results:
        config = result.best_config
        key = (config.threshold, config.inputs_binarized)
        if key not in views:
            views[key] = binarize(dataset, config.threshold, config.inputs_binarized,
                                  impute_policy)
        view = views[key]
        X, y = view.X, view.y[result.target]
        if config.use_consensus:
            models, ccrs = [], []
            for member in result.diagnostics["consensus_members"]:
                member_config = PipelineConfig.from_dict(member["config_dict"])
                fit_seed = derive_seed(seed, "final", result.target, member_config.key())
                models.append(learners.fit(member_config.learner, X, y, fit_seed))
                ccrs.append(member["mean_ccr"])
            entries.append(RegistryEntry(result.target, "consensus", models,
                                         config.threshold, config.inputs_binarized, ccrs))
        else:
            fit_seed = derive_seed(seed, "final", result.target, config.key())
            model = learners.fit(config.learner, X, y, fit_seed)
            entries.append(RegistryEntry(result.target, "single", [model],
                                         config.threshold, config.inputs_binarized))
    return entries


def load_registry(root: str | Path) -> dict[str, RegistryEntry]:
    root = Path(root)
    index_path = root / "registry.json"
    if not index_path.exists():
        raise FileNotFoundError(f"no registry index at {index_path}")
    index = json.loads(index_path.read_text(encoding="utf-8"))
    version = index.get("format_version")
    if version != REGISTRY_FORMAT_VERSION:
        raise ValueError(f"unsupported registry format version: {version!r}")
    entries = {}
    for target, filename in index["targets"].items():
        payload = json.loads((root / filename).read_text(encoding="utf-8"))
        entries[target] = RegistryEntry.from_dict(payload)
    return entries
