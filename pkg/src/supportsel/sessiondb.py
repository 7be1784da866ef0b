"""Append-only six-table session store with referential integrity.

One line-delimited JSON file per logical table (users, environments,
languages, silent reading results, questionnaire results, emotional states),
each starting with a schema header line. Writes append a single line under a
per-table lock; reads re-scan the file, so they always reflect prior writes
and a reloaded store sees byte-identical records.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import asdict
from pathlib import Path

from .psychometrics import (AGREEMENT_LEVELS, ENVIRONMENT_IDS, LANGUAGES,
                            RosenbergSession, SilentReadingSession, UserRecord,
                            validate_session, validate_user)

SCHEMA_VERSION = 1

TABLES = (
    "users",
    "environments",
    "languages",
    "silent_reading_results",
    "rosenberg_results",
    "emotional_states",
)

_ENVIRONMENT_DESCRIPTIONS = {
    "noisy_class": "Classroom scene with background noise",
    "natural_landscape": "Open-air natural landscape scene",
    "diaphanous_room": "Bare, light-filled room",
    "infinite_room": "Room with no visible boundaries",
}


class SessionValidationError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class ReferentialError(ValueError):
    """A stored record references a missing user/environment/language."""


def record_from_dict(payload: dict) -> UserRecord | SilentReadingSession | RosenbergSession:
    """Build a typed record from an imported JSON object tagged with 'kind'."""
    kind = payload.get("kind")
    if kind == "user":
        return UserRecord(
            id=payload["id"], name=payload.get("name", ""),
            surname=payload.get("surname", ""), age=payload.get("age", 0),
            gender=payload.get("gender", ""), email=payload.get("email", ""),
            associated_difficulties=tuple(payload.get("associated_difficulties", ())),
            additional_difficulties=payload.get("additional_difficulties", ""),
            registration_date=payload.get("registration_date", ""),
        )
    if kind == "silent_reading":
        return SilentReadingSession(
            user_id=payload["user_id"], environment=payload["environment"],
            language=payload["language"], start_time=payload["start_time"],
            error_count=payload["error_count"],
            interaction_times=tuple(payload["interaction_times"]),
            voice_recognition_errors=payload.get("voice_recognition_errors", 0),
        )
    if kind == "rosenberg":
        return RosenbergSession(
            user_id=payload["user_id"], environment=payload["environment"],
            start_time=payload["start_time"],
            elapsed_seconds=payload["elapsed_seconds"],
            answers=tuple(payload["answers"]),
        )
    raise ValueError(f"record kind must be user/silent_reading/rosenberg, got {kind!r}")


class SessionStore:
    """Six append-only tables rooted at a directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks = {table: threading.Lock() for table in TABLES}
        for table in TABLES:
            path = self._path(table)
            if not path.exists():
                header = json.dumps({"table": table, "schema_version": SCHEMA_VERSION})
                path.write_text(header + "\n", encoding="utf-8")
        self._seed_reference_tables()

    def _path(self, table: str) -> Path:
        return self.root / f"{table}.jsonl"

    def _seed_reference_tables(self) -> None:
        if not self._rows("environments"):
            for env in ENVIRONMENT_IDS:
                self._append("environments",
                             {"id": env, "description": _ENVIRONMENT_DESCRIPTIONS[env]})
        if not self._rows("languages"):
            for language in LANGUAGES:
                self._append("languages", {"id": language})
        if not self._rows("emotional_states"):
            for level in AGREEMENT_LEVELS:
                self._append("emotional_states",
                             {"id": level.replace(" ", "_"),
                              "description": f"Agreement level: {level}"})

    def _append(self, table: str, record: dict) -> None:
        line = json.dumps(record, sort_keys=True, separators=(",", ":"))
        with self._locks[table]:
            with open(self._path(table), "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def _rows(self, table: str) -> list[dict]:
        path = self._path(table)
        if not path.exists():
            return []
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        header = json.loads(lines[0])
        if header.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(
                f"table {table}: unsupported schema version {header.get('schema_version')!r}"
            )
        return [json.loads(line) for line in lines[1:] if line]

    # -- reference data ----------------------------------------------------

    def environments(self) -> list[dict]:
        return self._rows("environments")

    def languages(self) -> list[str]:
        return [row["id"] for row in self._rows("languages")]

    def emotional_states(self) -> list[dict]:
        return self._rows("emotional_states")

    # -- users ---------------------------------------------------------------

    def store_user(self, user: UserRecord) -> None:
        result = validate_user(user)
        if not result.ok:
            raise SessionValidationError(result.violations)
        if any(row["id"] == user.id for row in self._rows("users")):
            raise SessionValidationError([f"id: duplicate user id {user.id!r}"])
        payload = asdict(user)
        payload["associated_difficulties"] = list(user.associated_difficulties)
        self._append("users", payload)

    def users(self) -> list[UserRecord]:
        return [
            UserRecord(
                id=row["id"], name=row["name"], surname=row["surname"],
                age=row["age"], gender=row["gender"], email=row["email"],
                associated_difficulties=tuple(row["associated_difficulties"]),
                additional_difficulties=row["additional_difficulties"],
                registration_date=row["registration_date"],
            )
            for row in self._rows("users")
        ]

    # -- sessions ------------------------------------------------------------

    def _check_references(self, record: SilentReadingSession | RosenbergSession) -> None:
        if not any(u.id == record.user_id for u in self.users()):
            raise ReferentialError(f"unknown user id {record.user_id!r}")
        if not any(e["id"] == record.environment for e in self.environments()):
            raise ReferentialError(f"unknown environment id {record.environment!r}")
        if isinstance(record, SilentReadingSession) and record.language not in self.languages():
            raise ReferentialError(f"unknown language {record.language!r}")

    def store_session(self, record: SilentReadingSession | RosenbergSession) -> None:
        result = validate_session(record)
        if not result.ok:
            raise SessionValidationError(result.violations)
        self._check_references(record)
        if isinstance(record, SilentReadingSession):
            payload = asdict(record)
            payload["interaction_times"] = list(record.interaction_times)
            self._append("silent_reading_results", payload)
        else:
            payload = asdict(record)
            payload["answers"] = list(record.answers)
            self._append("rosenberg_results", payload)

    def list_sessions(
        self,
        kind: str,
        user_id: str | None = None,
        environment: str | None = None,
        start: str | None = None,
        end: str | None = None,
    ) -> list[SilentReadingSession | RosenbergSession]:
        """Sessions of one kind ('silent_reading' or 'rosenberg'), optionally
        filtered by user, environment and ISO start-time range [start, end]."""
        if kind == "silent_reading":
            rows = self._rows("silent_reading_results")
            build = lambda r: SilentReadingSession(  # noqa: E731
                user_id=r["user_id"], environment=r["environment"],
                language=r["language"], start_time=r["start_time"],
                error_count=r["error_count"],
                interaction_times=tuple(r["interaction_times"]),
                voice_recognition_errors=r["voice_recognition_errors"],
            )
        elif kind == "rosenberg":
            rows = self._rows("rosenberg_results")
            build = lambda r: RosenbergSession(  # noqa: E731
                user_id=r["user_id"], environment=r["environment"],
                start_time=r["start_time"], elapsed_seconds=r["elapsed_seconds"],
                answers=tuple(r["answers"]),
            )
        else:
            raise ValueError(f"unknown session kind {kind!r}")

        out = []
        for row in rows:
            if user_id is not None and row["user_id"] != user_id:
                continue
            if environment is not None and row["environment"] != environment:
                continue
            if start is not None and row["start_time"] < start:
                continue
            if end is not None and row["start_time"] > end:
                continue
            out.append(build(row))
        return out
