"""Feature catalog: difficulty inputs and the support-tool / learning-strategy targets.

The canonical catalog has 12 difficulty items (P1-P12), 17 support tools
(T1-T17) and 22 learning strategies (S1-S22). Survey files are keyed by these
identifiers; everything downstream (binarization, model selection, reporting)
is driven by the catalog rather than hard-coded column lists.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

_DIFFICULTY_LABELS = {
    "P1": "Reading",
    "P2": "Writing",
    "P3": "Understanding difficult words",
    "P4": "Understanding the lessons",
    "P5": "Concentration",
    "P6": "Paying attention during presential lessons",
    "P7": "Paying attention during online lessons",
    "P8": "Memorising recently studied concepts",
    "P9": "Remembering concepts studied during the exam",
    "P10": "Study time management",
    "P11": "Taking notes",
    "P12": "Limited time available to prepare a task/question/exam",
}

_TOOL_LABELS = {
    "T1": "Human voice audio book",
    "T2": "Robotic voice audio book",
    "T3": "Different colour words",
    "T4": "Using the EasyReading font",
    "T5": "Using a smart pen or tablet to take notes and record voice",
    "T6": "Clearer layout of the study material",
    "T7": "Having the key words of the text highlighted",
    "T8": "Prepared concept maps",
    "T9": "Prepared schemes",
    "T10": "Prepared summaries",
    "T11": "E-Books",
    "T12": "Digital tutor",
    "T13": "Images to help understand the meaning of difficult words",
    "T14": "Images that help to memorise a concept",
    "T15": "Audio recording of lessons",
    "T16": "Video lessons",
    "T17": "Supplementing study material with internet research",
}

_STRATEGY_LABELS = {
    "S1": "A person reading for him/her",
    "S2": "A map made by himself/herself",
    "S3": "A scheme made by himself/herself",
    "S4": "A summary made by himself/herself",
    "S5": "Repeat the studied material",
    "S6": "Marking keywords",
    "S7": "Underlining with different colours",
    "S8": "Having a study group",
    "S9": "Having a tutor",
    "S10": "Dyslexic student group to exchange resources",
    "S11": "Presential lessons",
    "S12": "Online lessons available",
    "S13": "Taking breaks during lessons",
    "S14": "Lesson slides available",
    "S15": "Recording the lesson",
    "S16": "Taking notes",
    "S17": "Having the lesson plan in advance",
    "S18": "Dividing an examination/task/question into several parts",
    "S19": "Only written tests",
    "S20": "Only oral tests",
    "S21": "Conducting the exams in the presence of the professor alone",
    "S22": "Having an online database with notes made by other students",
}

LIKERT_MIN = 0
LIKERT_MAX = 5


class CatalogError(ValueError):
    """Raised when a catalog violates its structural invariants."""


@dataclass(frozen=True)
class FeatureCatalog:
    """Ordered identifiers for difficulty inputs and prediction targets.

    ``difficulties`` are the model inputs; ``tools`` and ``strategies``
    together form the prediction targets. ``labels`` maps every identifier
    to its human-readable text.
    """

    difficulties: tuple[str, ...]
    tools: tuple[str, ...]
    strategies: tuple[str, ...]
    labels: dict[str, str] = field(compare=False)

    def __post_init__(self) -> None:
        all_ids = self.difficulties + self.tools + self.strategies
        if len(set(all_ids)) != len(all_ids):
            raise CatalogError("catalog identifiers must be unique")
        if len(self.difficulties) != 12:
            raise CatalogError(f"expected 12 difficulties, got {len(self.difficulties)}")
        if len(self.tools) != 17:
            raise CatalogError(f"expected 17 tools, got {len(self.tools)}")
        if len(self.strategies) != 22:
            raise CatalogError(f"expected 22 strategies, got {len(self.strategies)}")
        missing = [i for i in all_ids if i not in self.labels]
        if missing:
            raise CatalogError(f"identifiers without labels: {missing}")

    @property
    def targets(self) -> tuple[str, ...]:
        return self.tools + self.strategies

    @property
    def all_ids(self) -> tuple[str, ...]:
        return self.difficulties + self.targets

    def is_target(self, identifier: str) -> bool:
        return identifier in self.tools or identifier in self.strategies

    def target_kind(self, identifier: str) -> str:
        """'tool' or 'strategy'; raises for non-target identifiers."""
        if identifier in self.tools:
            return "tool"
        if identifier in self.strategies:
            return "strategy"
        raise CatalogError(f"{identifier!r} is not a target identifier")


def default_catalog() -> FeatureCatalog:
    """The canonical 12/17/22 catalog with full label text."""
    labels = {**_DIFFICULTY_LABELS, **_TOOL_LABELS, **_STRATEGY_LABELS}
    return FeatureCatalog(
        difficulties=tuple(_DIFFICULTY_LABELS),
        tools=tuple(_TOOL_LABELS),
        strategies=tuple(_STRATEGY_LABELS),
        labels=labels,
    )


def load_catalog(path: str | Path) -> FeatureCatalog:
    """Load a catalog from a two-column delimited file: identifier,label.

    Identifiers must follow the P*/T*/S* convention used by survey exports.
    """
    difficulties: list[str] = []
    tools: list[str] = []
    strategies: list[str] = []
    labels: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            ident, label = row[0].strip(), row[1].strip()
            labels[ident] = label
            if ident.startswith("P"):
                difficulties.append(ident)
            elif ident.startswith("T"):
                tools.append(ident)
            elif ident.startswith("S"):
                strategies.append(ident)
            else:
                raise CatalogError(f"unrecognized identifier {ident!r}")
    return FeatureCatalog(
        difficulties=tuple(difficulties),
        tools=tuple(tools),
        strategies=tuple(strategies),
        labels=labels,
    )


def save_catalog(catalog: FeatureCatalog, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for ident in catalog.all_ids:
            writer.writerow([ident, catalog.labels[ident]])
