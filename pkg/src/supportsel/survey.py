"""Survey dataset loading, validation, sparse-target dropping and binarization.

A survey file is delimited text with a header row of catalog identifiers
(plus an optional leading ``student_id`` column); one row per student; empty
cells mean "no answer". Values are Likert integers in [0, 5].

Targets whose missing rate exceeds a configurable threshold are moved to
``dropped_targets`` (the auto-discard path for barely-answered questions).
Difficulty columns are never dropped.

Binarization applies a strict-inequality rule: label 1 iff the raw value is
strictly greater than the threshold. A missing target answer binarizes to 0
(an unanswered question is never evidence that something was useful).
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .catalog import LIKERT_MAX, LIKERT_MIN, FeatureCatalog, default_catalog

ARCHIVE_FORMAT_VERSION = 1

DEFAULT_MAX_MISSING_RATE = 0.5


class SurveyError(ValueError):
    """Fatal survey-data problem (bad header, unusable configuration)."""


class InactiveTargetError(KeyError):
    def __init__(self, target: str):
        super().__init__(f"target {target!r} is not active in this view")
        self.target = target


@dataclass(frozen=True)
class SurveyRecord:
    """One student's answers, keyed by catalog identifier.

    Absent keys are missing answers. Present values are ints in [0, 5].
    """

    student_id: str
    answers: dict[str, int]

    def get(self, identifier: str) -> int | None:
        return self.answers.get(identifier)


@dataclass
class RowIssue:
    row_index: int  # 1-based data-row index in the source file
    column: str
    reason: str


@dataclass
class LoadIssues:
    unknown_columns: list[str] = field(default_factory=list)
    rejected_rows: list[RowIssue] = field(default_factory=list)


@dataclass(frozen=True)
class Dataset:
    """Immutable survey table plus per-column missing-rate bookkeeping.

    ``dropped_targets`` maps each discarded target to its missing rate;
    active targets are the catalog targets not in that map. Records keep
    every answer that parsed, including answers to dropped targets, so a
    dataset can be re-thresholded with :func:`drop_sparse_targets`.
    """

    catalog: FeatureCatalog
    records: tuple[SurveyRecord, ...]
    missing_rates: dict[str, float]
    dropped_targets: dict[str, float]
    issues: LoadIssues = field(default_factory=LoadIssues, compare=False)

    def __post_init__(self) -> None:
        if not self.records:
            raise SurveyError("dataset has no records")

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def active_targets(self) -> tuple[str, ...]:
        return tuple(t for t in self.catalog.targets if t not in self.dropped_targets)

    def fingerprint(self) -> str:
        """Stable content hash used to stamp evaluation reports."""
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    def to_dict(self) -> dict:
        return {
            "format_version": ARCHIVE_FORMAT_VERSION,
            "catalog": {
                "difficulties": list(self.catalog.difficulties),
                "tools": list(self.catalog.tools),
                "strategies": list(self.catalog.strategies),
                "labels": self.catalog.labels,
            },
            "records": [
                {"student_id": r.student_id, "answers": r.answers} for r in self.records
            ],
            "missing_rates": self.missing_rates,
            "dropped_targets": self.dropped_targets,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Dataset":
        version = payload.get("format_version")
        if version != ARCHIVE_FORMAT_VERSION:
            raise SurveyError(f"unsupported archive format version: {version!r}")
        cat = payload["catalog"]
        catalog = FeatureCatalog(
            difficulties=tuple(cat["difficulties"]),
            tools=tuple(cat["tools"]),
            strategies=tuple(cat["strategies"]),
            labels=dict(cat["labels"]),
        )
        records = tuple(
            SurveyRecord(r["student_id"], {k: int(v) for k, v in r["answers"].items()})
            for r in payload["records"]
        )
        return cls(
            catalog=catalog,
            records=records,
            missing_rates={k: float(v) for k, v in payload["missing_rates"].items()},
            dropped_targets={k: float(v) for k, v in payload["dropped_targets"].items()},
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _missing_rates(records: list[SurveyRecord], catalog: FeatureCatalog) -> dict[str, float]:
    n = len(records)
    return {
        ident: sum(1 for r in records if ident not in r.answers) / n
        for ident in catalog.all_ids
    }


def _dropped(missing_rates: dict[str, float], catalog: FeatureCatalog,
             max_missing_rate: float) -> dict[str, float]:
    if not (0.0 < max_missing_rate < 1.0):
        raise SurveyError(f"max_missing_rate must be in (0, 1), got {max_missing_rate}")
    dropped = {
        t: missing_rates[t]
        for t in catalog.targets
        if missing_rates[t] > max_missing_rate
    }
    if len(dropped) == len(catalog.targets):
        raise SurveyError("every target exceeds the missing-rate threshold; nothing to predict")
    return dropped


def load_survey(
    path: str | Path,
    catalog: FeatureCatalog | None = None,
    *,
    delimiter: str = ",",
    max_missing_rate: float = DEFAULT_MAX_MISSING_RATE,
    strict: bool = False,
) -> Dataset:
    """Load a delimited survey file into a validated Dataset.

    Rows with a non-integer or out-of-range value are rejected (recorded in
    ``dataset.issues.rejected_rows`` with row index and column) unless
    ``strict`` is set, in which case the first bad row raises. Unknown
    columns are ignored and recorded. Targets missing in more than
    ``max_missing_rate`` of rows are auto-dropped.
    """
    catalog = catalog or default_catalog()
    path = Path(path)
    if not path.exists():
        raise SurveyError(f"survey file not found: {path}")

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise SurveyError(f"survey file {path} is empty (missing header)") from None
        header = [h.strip() for h in header]
        known = set(catalog.all_ids) | {"student_id"}
        unknown = [h for h in header if h not in known]
        missing_difficulties = [d for d in catalog.difficulties if d not in header]
        if missing_difficulties:
            raise SurveyError(
                f"header is missing difficulty columns: {missing_difficulties}"
            )

        issues = LoadIssues(unknown_columns=unknown)
        records: list[SurveyRecord] = []
        seen_ids: set[str] = set()
        for row_index, row in enumerate(reader, start=1):
            if not any(cell.strip() for cell in row):
                continue
            answers: dict[str, int] = {}
            student_id = f"row{row_index}"
            bad: RowIssue | None = None
            for col, cell in zip(header, row):
                cell = cell.strip()
                if col == "student_id":
                    if cell:
                        student_id = cell
                    continue
                if col not in known or not cell:
                    continue
                try:
                    value = int(cell)
                except ValueError:
                    bad = RowIssue(row_index, col, f"non-integer value {cell!r}")
                    break
                if not (LIKERT_MIN <= value <= LIKERT_MAX):
                    bad = RowIssue(row_index, col, f"value {value} outside Likert range [0, 5]")
                    break
                answers[col] = value
            if bad is None and student_id in seen_ids:
                bad = RowIssue(row_index, "student_id", f"duplicate id {student_id!r}")
            if bad is not None:
                if strict:
                    raise SurveyError(f"row {bad.row_index}, column {bad.column}: {bad.reason}")
                issues.rejected_rows.append(bad)
                continue
            seen_ids.add(student_id)
            records.append(SurveyRecord(student_id, answers))

    if not records:
        raise SurveyError(f"survey file {path} contains no valid rows")
    rates = _missing_rates(records, catalog)
    dropped = _dropped(rates, catalog, max_missing_rate)
    return Dataset(
        catalog=catalog,
        records=tuple(records),
        missing_rates=rates,
        dropped_targets=dropped,
        issues=issues,
    )


def write_survey_csv(dataset: Dataset, path: str | Path, *, delimiter: str = ",") -> None:
    """Write the dataset back out in the survey file format (empty = missing)."""
    header = ["student_id", *dataset.catalog.all_ids]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(header)
        for record in dataset.records:
            row = [record.student_id]
            for ident in dataset.catalog.all_ids:
                value = record.answers.get(ident)
                row.append("" if value is None else str(value))
            writer.writerow(row)


def drop_sparse_targets(dataset: Dataset, max_missing_rate: float) -> Dataset:
    """Recompute the dropped-target set against a new missing-rate threshold.

    Row order and record contents are untouched; only ``dropped_targets``
    changes, so a previously dropped target reappears if the threshold is
    relaxed. Difficulty columns are never dropped.
    """
    dropped = _dropped(dataset.missing_rates, dataset.catalog, max_missing_rate)
    return Dataset(
        catalog=dataset.catalog,
        records=dataset.records,
        missing_rates=dataset.missing_rates,
        dropped_targets=dropped,
        issues=dataset.issues,
    )


@dataclass(frozen=True)
class BinaryView:
    """Thresholded 0/1 projection of a Dataset.

    ``X`` holds the 12 difficulty columns (raw 0-5 values, or 0/1 when
    ``inputs_binarized``); ``y[target]`` is 1 exactly where the raw answer is
    strictly greater than ``threshold``. ``row_ids`` records which source
    records survived the missing-difficulty policy.
    """

    source: Dataset
    threshold: int
    inputs_binarized: bool
    impute_policy: str
    X: np.ndarray
    y: dict[str, np.ndarray]
    row_ids: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def targets(self) -> tuple[str, ...]:
        return tuple(self.y)


def binarize(
    dataset: Dataset,
    threshold: int,
    inputs_binarized: bool,
    impute_policy: str = "drop",
) -> BinaryView:
    """Project a dataset to numeric inputs and 0/1 labels per active target.

    ``impute_policy`` controls rows with missing difficulty answers:
    ``"drop"`` removes the row, ``"median"`` fills with the per-column
    median of the answered values.
    """
    if not (LIKERT_MIN <= threshold <= LIKERT_MAX):
        raise SurveyError(f"threshold must be in [0, 5], got {threshold}")
    if impute_policy not in ("drop", "median"):
        raise SurveyError(f"unknown impute policy {impute_policy!r}")

    difficulties = dataset.catalog.difficulties
    raw = np.full((dataset.n, len(difficulties)), np.nan)
    for i, record in enumerate(dataset.records):
        for j, ident in enumerate(difficulties):
            value = record.answers.get(ident)
            if value is not None:
                raw[i, j] = value

    row_mask = np.ones(dataset.n, dtype=bool)
    if impute_policy == "drop":
        row_mask = ~np.isnan(raw).any(axis=1)
        raw = raw[row_mask]
    else:
        for j in range(raw.shape[1]):
            col = raw[:, j]
            holes = np.isnan(col)
            if holes.any():
                present = col[~holes]
                if present.size == 0:
                    raise SurveyError(
                        f"difficulty column {difficulties[j]} has no answered values to impute from"
                    )
                col[holes] = np.median(present)
    if raw.shape[0] == 0:
        raise SurveyError("no rows left after dropping records with missing difficulties")

    X = (raw > threshold).astype(np.float64) if inputs_binarized else raw.astype(np.float64)

    kept = [r for r, keep in zip(dataset.records, row_mask) if keep]
    y: dict[str, np.ndarray] = {}
    for target in dataset.active_targets:
        labels = np.zeros(len(kept), dtype=np.int8)
        for i, record in enumerate(kept):
            value = record.answers.get(target)
            if value is not None and value > threshold:
                labels[i] = 1
        y[target] = labels

    return BinaryView(
        source=dataset,
        threshold=threshold,
        inputs_binarized=inputs_binarized,
        impute_policy=impute_policy,
        X=X,
        y=y,
        row_ids=tuple(r.student_id for r in kept),
    )


def class_balance(view: BinaryView, target: str) -> float:
    """Fraction of positive labels for a target; errors on inactive targets."""
    if target not in view.y:
        raise InactiveTargetError(target)
    labels = view.y[target]
    return float(labels.sum()) / labels.size
