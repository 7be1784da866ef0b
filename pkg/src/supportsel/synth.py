"""Planted-structure synthetic survey data with a known best achievable CCR.

Each target follows a linear-threshold rule over a small random subset of the
difficulty columns (so linear separators can represent it exactly and
tree/neighbor models approximately), then an exact ``label_noise`` fraction
of rows has its label flipped: the best achievable accuracy per target is
1 - label_noise by construction, recorded in the ground-truth manifest next
to the dataset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .catalog import LIKERT_MAX, FeatureCatalog, default_catalog
from .survey import Dataset, SurveyRecord, _dropped, _missing_rates

MANIFEST_FORMAT_VERSION = 1


class _Never:
    """Stands in for an all-False missing mask."""

    def __getitem__(self, _):
        return False


_NEVER = _Never()


@dataclass
class PlantSpec:
    n_students: int = 719
    label_noise: float = 0.07
    binarize_threshold: int = 1   # raw target values are planted around this cut
    rule_size_range: tuple[int, int] = (2, 2)
    weight_range: tuple[int, int] = (1, 1)
    missing_rates: dict[str, float] = field(default_factory=lambda: {"T4": 0.6})
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_students <= 0:
            raise ValueError("n_students must be positive")
        if not 0.0 <= self.label_noise < 0.5:
            raise ValueError(f"label_noise must be in [0, 0.5), got {self.label_noise}")
        if not 0 <= self.binarize_threshold < LIKERT_MAX:
            raise ValueError("binarize_threshold must leave room above the cut")
        lo, hi = self.rule_size_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad rule size range {self.rule_size_range}")
        wlo, whi = self.weight_range
        if not 1 <= wlo <= whi:
            raise ValueError(f"bad weight range {self.weight_range}")

    def to_dict(self) -> dict:
        return {
            "n_students": self.n_students,
            "label_noise": self.label_noise,
            "binarize_threshold": self.binarize_threshold,
            "rule_size_range": list(self.rule_size_range),
            "weight_range": list(self.weight_range),
            "missing_rates": self.missing_rates,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PlantSpec":
        return cls(
            n_students=int(payload.get("n_students", 719)),
            label_noise=float(payload.get("label_noise", 0.07)),
            binarize_threshold=int(payload.get("binarize_threshold", 1)),
            rule_size_range=tuple(payload.get("rule_size_range", (2, 2))),
            weight_range=tuple(payload.get("weight_range", (1, 1))),
            missing_rates={k: float(v) for k, v in payload.get("missing_rates",
                                                               {"T4": 0.6}).items()},
            seed=int(payload.get("seed", 0)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "PlantSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _plant_rule(rng: np.random.Generator, difficulties: tuple[str, ...],
                Z: np.ndarray, spec: "PlantSpec") -> dict:
    """Pick inputs, weights and a decision cut for one target.

    The cut is placed at a shell midpoint (integer scores leave a half-unit
    gap on both sides) and, among the shells keeping the positive rate in
    roughly [0.3, 0.7], at the one with the least boundary-adjacent mass:
    planted rules should be limited by label noise, not by how many students
    sit right on the decision edge.
    """
    lo, hi = spec.rule_size_range
    wlo, whi = spec.weight_range
    size = int(rng.integers(lo, hi + 1))
    columns = sorted(rng.choice(len(difficulties), size=size, replace=False).tolist())
    weights = rng.integers(wlo, whi + 1, size=size).tolist()
    scores = Z[:, columns] @ np.asarray(weights)
    values, counts = np.unique(scores, return_counts=True)
    cumulative = np.cumsum(counts) / scores.size
    candidates = [i for i in range(1, len(values))
                  if 0.3 <= cumulative[i - 1] <= 0.7]
    if not candidates:
        candidates = [min(range(1, len(values)),
                          key=lambda i: abs(cumulative[i - 1] - 0.5))]
    edge = min(candidates, key=lambda i: counts[i - 1] + counts[i])
    cut = float(values[edge - 1] + values[edge]) / 2.0
    return {
        "inputs": [difficulties[c] for c in columns],
        "columns": columns,
        "weights": weights,
        "cut": cut,
    }


def generate(spec: PlantSpec,
             catalog: FeatureCatalog | None = None) -> tuple[Dataset, dict]:
    """Deterministically generate (dataset, ground-truth manifest) from a spec."""
    catalog = catalog or default_catalog()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = spec.n_students
    difficulties = catalog.difficulties
    Z = rng.integers(0, LIKERT_MAX + 1, size=(n, len(difficulties)))

    thr = spec.binarize_threshold
    flip_count = int(round(spec.label_noise * n))
    manifest_targets: dict[str, dict] = {}
    raw_targets: dict[str, np.ndarray] = {}
    for target in catalog.targets:
        rule = _plant_rule(rng, difficulties, Z, spec)
        scores = Z[:, rule["columns"]] @ np.asarray(rule["weights"])
        labels = (scores >= rule["cut"]).astype(np.int8)
        # flip an exact count so the planted best-achievable rate holds by
        # construction, not just in expectation
        flip_rows = rng.choice(n, size=flip_count, replace=False)
        labels[flip_rows] = 1 - labels[flip_rows]
        # Raw Likert value sits strictly above the cut iff the label is 1.
        high = rng.integers(thr + 1, LIKERT_MAX + 1, size=n)
        low = rng.integers(0, thr + 1, size=n)
        raw_targets[target] = np.where(labels == 1, high, low).astype(np.int64)
        manifest_targets[target] = {
            "inputs": rule["inputs"],
            "weights": rule["weights"],
            "cut": rule["cut"],
            "binarize_threshold": thr,
            "bayes_rate": 1.0 - spec.label_noise,
            "positive_rate": float(labels.mean()),
        }

    missing_masks = {
        column: rng.random(n) < rate
        for column, rate in spec.missing_rates.items()
    }

    records = []
    for i in range(n):
        answers = {}
        for j, ident in enumerate(difficulties):
            if not missing_masks.get(ident, _NEVER)[i]:
                answers[ident] = int(Z[i, j])
        for target in catalog.targets:
            if not missing_masks.get(target, _NEVER)[i]:
                answers[target] = int(raw_targets[target][i])
        records.append(SurveyRecord(f"s{i + 1:04d}", answers))

    rates = _missing_rates(records, catalog)
    dataset = Dataset(
        catalog=catalog,
        records=tuple(records),
        missing_rates=rates,
        dropped_targets=_dropped(rates, catalog, 0.5),
    )
    manifest = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "spec": spec.to_dict(),
        "targets": manifest_targets,
    }
    return dataset, manifest


def score_true_rule(manifest: dict, dataset: Dataset, target: str) -> float:
    """CCR of the manifest's planted rule against the generated labels.

    An independent check that the recorded best achievable rate is real: the
    rule itself should score 1 - label_noise up to binomial wiggle.
    """
    entry = manifest["targets"][target]
    thr = entry["binarize_threshold"]
    weights = np.asarray(entry["weights"], dtype=np.float64)
    agree = 0
    total = 0
    for record in dataset.records:
        raw = record.answers.get(target)
        values = [record.answers.get(i) for i in entry["inputs"]]
        if raw is None or any(v is None for v in values):
            continue
        rule_label = 1 if float(np.asarray(values, dtype=np.float64) @ weights) >= entry["cut"] else 0
        observed = 1 if raw > thr else 0
        agree += int(rule_label == observed)
        total += 1
    return agree / total
