"""Self-esteem questionnaire scoring and psychometric session records.

The 10-item scale is scored 1-4 per item (the unique integer scale putting
10-item totals in [10, 40]), with items {2, 5, 6, 8, 9} reverse-keyed.
Bands: High for totals 30-40, Medium for 26-29, Low for 25 and below.

Session records mirror the collection app's database: silent-reading runs
carry an error count in [0, 9] and exactly nine per-interaction timings;
questionnaire runs carry ten agreement-level answers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

AGREEMENT_LEVELS = ("strongly agree", "agree", "disagree", "strongly disagree")

_ITEM_SCORES = {"strongly agree": 4, "agree": 3, "disagree": 2, "strongly disagree": 1}

# 1-based positions of the reverse-keyed items in the 10-item scale.
REVERSED_ITEMS = frozenset({2, 5, 6, 8, 9})

N_ITEMS = 10
N_INTERACTIONS = 9
MAX_ERRORS = 9

ENVIRONMENT_IDS = ("noisy_class", "natural_landscape", "diaphanous_room", "infinite_room")
LANGUAGES = ("English", "Italian", "Spanish", "French")

ASSOCIATED_DIFFICULTIES = ("dysorthography", "dyscalculia", "dysgraphia", "other")

_EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")


class ScoringError(ValueError):
    pass


def parse_agreement(text: str) -> str:
    level = text.strip().lower().replace("_", " ")
    if level not in _ITEM_SCORES:
        raise ScoringError(f"unknown agreement level {text!r}; expected one of {AGREEMENT_LEVELS}")
    return level


def score_item(response: str, reversed_item: bool) -> int:
    """Item score in [1, 4]; reverse-keyed items mirror (4<->1, 3<->2)."""
    score = _ITEM_SCORES[parse_agreement(response)]
    return 5 - score if reversed_item else score


@dataclass(frozen=True)
class SelfEsteemScore:
    total: int
    band: str

    def __str__(self) -> str:
        return f"{self.total} {self.band}"


def band_for_total(total: int) -> str:
    if not 10 <= total <= 40:
        raise ScoringError(f"total {total} outside the attainable range [10, 40]")
    if total >= 30:
        return "High"
    if total >= 26:
        return "Medium"
    return "Low"


def score_answers(answers: list[str]) -> SelfEsteemScore:
    """Score a 10-answer response set (answers in scale order, item 1 first)."""
    if len(answers) != N_ITEMS:
        raise ScoringError(f"expected {N_ITEMS} answers, got {len(answers)}")
    total = sum(
        score_item(answer, (position in REVERSED_ITEMS))
        for position, answer in enumerate(answers, start=1)
    )
    return SelfEsteemScore(total=total, band=band_for_total(total))


@dataclass(frozen=True)
class UserRecord:
    id: str
    name: str
    surname: str
    age: int
    gender: str
    email: str
    associated_difficulties: tuple[str, ...] = ()
    additional_difficulties: str = ""
    registration_date: str = ""  # ISO calendar date


@dataclass(frozen=True)
class SilentReadingSession:
    user_id: str
    environment: str
    language: str
    start_time: str  # ISO timestamp
    error_count: int
    interaction_times: tuple[float, ...]
    voice_recognition_errors: int = 0


@dataclass(frozen=True)
class RosenbergSession:
    user_id: str
    environment: str
    start_time: str  # ISO timestamp
    elapsed_seconds: float
    answers: tuple[str, ...]


def score_rosenberg(session: RosenbergSession) -> SelfEsteemScore:
    return score_answers(list(session.answers))


@dataclass
class ValidationResult:
    ok: bool
    violations: list[str] = field(default_factory=list)


def _check(violations: list[str], ok: bool, message: str) -> None:
    if not ok:
        violations.append(message)


def validate_user(record: UserRecord) -> ValidationResult:
    v: list[str] = []
    _check(v, bool(record.id), "id: must be non-empty")
    _check(v, isinstance(record.age, int) and record.age > 0,
           f"age: must be a positive integer, got {record.age!r}")
    _check(v, bool(_EMAIL_RE.match(record.email)),
           f"email: not a valid address: {record.email!r}")
    unknown = [d for d in record.associated_difficulties if d not in ASSOCIATED_DIFFICULTIES]
    _check(v, not unknown, f"associated_difficulties: unknown entries {unknown}")
    return ValidationResult(ok=not v, violations=v)


def validate_session(record: SilentReadingSession | RosenbergSession) -> ValidationResult:
    """Field-level invariant check; violations are data, not faults."""
    v: list[str] = []
    if isinstance(record, SilentReadingSession):
        _check(v, record.environment in ENVIRONMENT_IDS,
               f"environment: unknown id {record.environment!r}")
        _check(v, record.language in LANGUAGES,
               f"language: unknown language {record.language!r}")
        _check(v, isinstance(record.error_count, int) and 0 <= record.error_count <= MAX_ERRORS,
               f"error_count: must be an integer in [0, {MAX_ERRORS}], got {record.error_count!r}")
        _check(v, len(record.interaction_times) == N_INTERACTIONS,
               f"interaction_times: expected {N_INTERACTIONS} durations, got {len(record.interaction_times)}")
        _check(v, all(t > 0 for t in record.interaction_times),
               "interaction_times: every duration must be positive")
        _check(v, isinstance(record.voice_recognition_errors, int)
               and record.voice_recognition_errors >= 0,
               "voice_recognition_errors: must be a non-negative integer")
    elif isinstance(record, RosenbergSession):
        _check(v, record.environment in ENVIRONMENT_IDS,
               f"environment: unknown id {record.environment!r}")
        _check(v, record.elapsed_seconds > 0, "elapsed_seconds: must be positive")
        _check(v, len(record.answers) == N_ITEMS,
               f"answers: expected {N_ITEMS}, got {len(record.answers)}")
        for i, answer in enumerate(record.answers, start=1):
            try:
                parse_agreement(answer)
            except ScoringError:
                v.append(f"answers[{i}]: unknown agreement level {answer!r}")
    else:
        v.append(f"unknown record type {type(record).__name__}")
    return ValidationResult(ok=not v, violations=v)
