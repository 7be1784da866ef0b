"""Command-line entry point orchestrating the pipeline.

Subcommands: ingest, synth, evaluate, report, predict, rosenberg-score,
sessions. All randomness flows from --seed; a declarative JSON config file
(--config) supplies flag defaults, explicit flags win. Every file-producing
run writes a run_manifest.json next to its outputs, and output files are
written atomically (temp file + rename).

Exit codes: 0 ok, 2 usage error, 3 data validation error, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .catalog import default_catalog, load_catalog
from .psychometrics import (ScoringError, UserRecord, score_answers,
                            validate_session, validate_user)
from .registry import build_final_entries, load_registry, save_registry
from .reporting import (EvaluationReport, render_chart_data, render_summary,
                        render_tables)
from .selection import PipelineConfig, SelectionError, default_grid, run_all_targets
from .sessiondb import (ReferentialError, SessionStore, SessionValidationError,
                        record_from_dict)
from .survey import Dataset, SurveyError, load_survey, write_survey_csv
from .synth import PlantSpec, generate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_manifest(out_dir: Path, command: str, params: dict,
                    inputs: list[str], outputs: list[str],
                    config_file: str | None) -> None:
    manifest = {
        "command": command,
        "config_file": config_file,
        "parameters": params,
        "inputs": inputs,
        "outputs": outputs,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    _write_atomic(out_dir / "run_manifest.json",
                  json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {path}")
    try:
        payload = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return payload


def _resolve(args: argparse.Namespace, config: dict, key: str, default):
    """Flag value if given, else config-file value, else default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _require_file(path: str | None, what: str) -> Path:
    if path is None:
        raise UsageError(f"missing required {what}")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {path}")
    return p


def _load_dataset_arg(path: Path, catalog_path: str | None,
                      max_missing_rate: float) -> Dataset:
    """Accept either a dataset archive (.json) or a raw survey file."""
    catalog = load_catalog(catalog_path) if catalog_path else default_catalog()
    if path.suffix == ".json":
        return Dataset.load(path)
    return load_survey(path, catalog, max_missing_rate=max_missing_rate)


def _load_grid(path: str | None) -> list[PipelineConfig]:
    if path is None:
        return default_grid()
    p = _require_file(path, "grid file")
    payload = json.loads(p.read_text(encoding="utf-8"))
    if not isinstance(payload, list) or not payload:
        raise UsageError(f"grid file {path} must hold a non-empty JSON list")
    return [PipelineConfig.from_dict(entry) for entry in payload]


# ---------------------------------------------------------------------------
# subcommands

def _cmd_ingest(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    survey = _require_file(_resolve(args, config, "survey", None), "survey file")
    out_dir = Path(_resolve(args, config, "out", "."))
    max_rate = float(_resolve(args, config, "max-missing-rate", 0.5))
    catalog_path = _resolve(args, config, "catalog", None)
    catalog = load_catalog(catalog_path) if catalog_path else default_catalog()

    dataset = load_survey(survey, catalog, max_missing_rate=max_rate,
                          strict=bool(args.strict))
    for issue in dataset.issues.rejected_rows:
        print(f"rejected row {issue.row_index} ({issue.column}): {issue.reason}",
              file=sys.stderr)
    if dataset.issues.unknown_columns:
        print(f"ignored unknown columns: {', '.join(dataset.issues.unknown_columns)}",
              file=sys.stderr)

    out_path = out_dir / "dataset.json"
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset.save(out_path)
    _write_manifest(out_dir, "ingest",
                    {"max_missing_rate": max_rate, "strict": bool(args.strict),
                     "seed": None},
                    inputs=[str(survey)], outputs=[str(out_path)],
                    config_file=args.config)
    print(f"ingested {dataset.n} records; "
          f"{len(dataset.active_targets)} active targets; "
          f"dropped: {sorted(dataset.dropped_targets) or 'none'}")
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    out_dir = Path(_resolve(args, config, "out", "."))
    spec_path = _resolve(args, config, "spec", None)
    spec = PlantSpec.load(_require_file(spec_path, "plant spec file")) if spec_path else PlantSpec()
    seed = _resolve(args, config, "seed", None)
    if seed is not None:
        spec.seed = int(seed)
    if args.students is not None:
        spec.n_students = args.students
    if args.noise is not None:
        spec.label_noise = args.noise
    spec = PlantSpec.from_dict(spec.to_dict())  # revalidate after overrides

    dataset, manifest = generate(spec)
    out_dir.mkdir(parents=True, exist_ok=True)
    survey_path = out_dir / "survey.csv"
    write_survey_csv(dataset, survey_path)
    manifest_path = out_dir / "truth_manifest.json"
    _write_atomic(manifest_path, json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    _write_manifest(out_dir, "synth", spec.to_dict(),
                    inputs=[spec_path] if spec_path else [],
                    outputs=[str(survey_path), str(manifest_path)],
                    config_file=args.config)
    print(f"generated {spec.n_students} students, "
          f"{len(dataset.catalog.targets)} targets "
          f"(best achievable CCR {1 - spec.label_noise:.2f}) -> {survey_path}")
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    data_path = _require_file(_resolve(args, config, "data", None), "dataset file")
    out_dir = Path(_resolve(args, config, "out", "."))
    seed = int(_resolve(args, config, "seed", 0))
    jobs = int(_resolve(args, config, "jobs", 1))
    impute = _resolve(args, config, "impute", "drop")
    grid = _load_grid(_resolve(args, config, "grid", None))

    threshold = _resolve(args, config, "threshold", None)
    if threshold is not None:
        grid = [c for c in grid if c.threshold == int(threshold)]
    inputs = _resolve(args, config, "inputs", None)
    if inputs is not None:
        if inputs not in ("numeric", "binary"):
            raise UsageError(f"--inputs must be numeric or binary, got {inputs!r}")
        grid = [c for c in grid if c.inputs_binarized == (inputs == "binary")]
    if not grid:
        raise UsageError("grid is empty after applying --threshold/--inputs filters")

    dataset = _load_dataset_arg(data_path, _resolve(args, config, "catalog", None),
                                float(_resolve(args, config, "max-missing-rate", 0.5)))
    report = run_all_targets(dataset, grid, seed=seed, jobs=jobs, impute_policy=impute)

    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    _write_atomic(report_path, report.to_json())
    outputs = [str(report_path)]

    models_out = _resolve(args, config, "models-out", None)
    if models_out:
        entries = build_final_entries(dataset, report, seed, impute)
        save_registry(entries, models_out,
                      metadata={"seed": seed,
                                "dataset_fingerprint": dataset.fingerprint()})
        outputs.append(str(Path(models_out) / "registry.json"))

    _write_manifest(out_dir, "evaluate",
                    {"seed": seed, "jobs": jobs, "impute": impute,
                     "threshold": threshold, "inputs": inputs,
                     "grid_size": len(grid)},
                    inputs=[str(data_path)], outputs=outputs,
                    config_file=args.config)
    summary = render_summary(report)
    sys.stdout.write(summary)
    if report.failures:
        return EXIT_DATA
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    report_path = _require_file(_resolve(args, config, "report", None), "report file")
    out_dir = Path(_resolve(args, config, "out", "."))
    report = EvaluationReport.load(report_path)

    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    tables = render_tables(report)
    charts = render_chart_data(report)
    for section, text in tables.items():
        path = out_dir / f"{section}_table.txt"
        _write_atomic(path, text)
        outputs.append(str(path))
    for section, text in charts.items():
        path = out_dir / f"{section}_ccr.csv"
        _write_atomic(path, text)
        outputs.append(str(path))
    summary_path = out_dir / "summary.txt"
    _write_atomic(summary_path, render_summary(report))
    outputs.append(str(summary_path))

    _write_manifest(out_dir, "report", {"seed": None},
                    inputs=[str(report_path)], outputs=outputs,
                    config_file=args.config)
    print(f"wrote {len(outputs)} files to {out_dir}")
    return EXIT_OK


def _parse_vector(args: argparse.Namespace, difficulties: tuple[str, ...]) -> np.ndarray:
    if args.vector is not None:
        parts = [p.strip() for p in args.vector.split(",")]
        if len(parts) != len(difficulties):
            raise UsageError(
                f"--vector needs {len(difficulties)} comma-separated values, got {len(parts)}"
            )
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise UsageError(f"--vector values must be numeric: {exc}") from exc
        return np.asarray(values)
    if args.input is not None:
        payload = json.loads(_require_file(args.input, "input file").read_text(encoding="utf-8"))
        missing = [d for d in difficulties if d not in payload]
        if missing:
            raise DataError(f"input file is missing difficulty values: {missing}")
        return np.asarray([float(payload[d]) for d in difficulties])
    raise UsageError("predict needs --vector or --input")


def _cmd_predict(args: argparse.Namespace) -> int:
    models_dir = _require_file(args.models, "model registry directory")
    entries = load_registry(models_dir)
    difficulties = default_catalog().difficulties
    x = _parse_vector(args, difficulties)
    labels = {target: entry.predict_raw(x) for target, entry in sorted(entries.items())}
    if args.json:
        print(json.dumps(labels, sort_keys=True))
    else:
        for target, label in labels.items():
            print(f"{target}: {'useful' if label else 'not useful'}")
    return EXIT_OK


def _cmd_rosenberg_score(args: argparse.Namespace) -> int:
    answers_path = _require_file(args.answers, "answers file")
    lines = [
        line.strip()
        for line in answers_path.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    score = score_answers(lines)
    print(score)
    return EXIT_OK


def _read_session_records(path: Path) -> list:
    records = []
    for i, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
            records.append((i, record_from_dict(payload)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise DataError(f"line {i}: cannot parse session record: {exc}") from exc
    return records


def _cmd_sessions(args: argparse.Namespace) -> int:
    if args.action == "validate":
        path = _require_file(args.file, "records file")
        failures = 0
        for line_no, record in _read_session_records(path):
            result = validate_user(record) if isinstance(record, UserRecord) \
                else validate_session(record)
            if result.ok:
                print(f"line {line_no}: ok")
            else:
                failures += 1
                for violation in result.violations:
                    print(f"line {line_no}: {violation}")
        return EXIT_DATA if failures else EXIT_OK

    if args.action == "import":
        path = _require_file(args.file, "records file")
        store = SessionStore(_require_dir(args.tables))
        count = 0
        for _, record in _read_session_records(path):
            if isinstance(record, UserRecord):
                store.store_user(record)
            else:
                store.store_session(record)
            count += 1
        print(f"imported {count} records into {args.tables}")
        return EXIT_OK

    if args.action == "list":
        store = SessionStore(_require_dir(args.tables))
        sessions = store.list_sessions(
            kind=args.kind, user_id=args.user, environment=args.environment,
            start=getattr(args, "from"), end=args.to,
        )
        for session in sessions:
            print(json.dumps(session.__dict__, default=list, sort_keys=True))
        print(f"{len(sessions)} sessions", file=sys.stderr)
        return EXIT_OK

    raise UsageError(f"unknown sessions action {args.action!r}")


def _require_dir(path: str | None) -> Path:
    if path is None:
        raise UsageError("missing --tables directory")
    return Path(path)


# ---------------------------------------------------------------------------
# parser

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supportsel",
        description="Model selection for predicting useful support tools and "
                    "learning strategies from difficulty surveys.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run file supplying flag defaults")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("ingest", help="load and validate a survey file")
    common(p)
    p.add_argument("--survey", help="delimited survey file")
    p.add_argument("--catalog", help="catalog file (identifier,label)")
    p.add_argument("--max-missing-rate", type=float, dest="max_missing_rate")
    p.add_argument("--strict", action="store_true",
                   help="fail on the first malformed row instead of rejecting it")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("synth", help="generate a planted synthetic survey")
    common(p)
    p.add_argument("--spec", help="plant spec JSON file")
    p.add_argument("--seed", type=int)
    p.add_argument("--students", type=int, help="override student count")
    p.add_argument("--noise", type=float, help="override label noise")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("evaluate", help="grid-search every target with 10-fold CV")
    common(p)
    p.add_argument("--data", help="dataset archive (.json) or survey file")
    p.add_argument("--catalog")
    p.add_argument("--grid", help="grid JSON file (default: built-in grid)")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--threshold", type=int, help="restrict grid to one threshold")
    p.add_argument("--inputs", choices=("numeric", "binary"),
                   help="restrict grid to one input encoding")
    p.add_argument("--impute", choices=("drop", "median"),
                   help="missing-difficulty policy (default drop)")
    p.add_argument("--max-missing-rate", type=float, dest="max_missing_rate")
    p.add_argument("--models-out", dest="models_out",
                   help="also refit winners on full data into this registry dir")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="render tables and chart data from a report")
    common(p)
    p.add_argument("--report", help="report.json produced by evaluate")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("predict", help="predict per-target usefulness for one student")
    p.add_argument("--models", help="model registry directory")
    p.add_argument("--vector", help="12 comma-separated difficulty values")
    p.add_argument("--input", help="JSON file of difficulty id -> value")
    p.add_argument("--json", action="store_true", help="JSON output")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("rosenberg-score", help="score a 10-answer agreement file")
    p.add_argument("--answers", help="file with one agreement level per line")
    p.set_defaults(func=_cmd_rosenberg_score)

    p = sub.add_parser("sessions", help="validate, import or list session records")
    p.add_argument("action", choices=("validate", "import", "list"))
    p.add_argument("--file", help="JSONL records file (validate/import)")
    p.add_argument("--tables", help="session store directory")
    p.add_argument("--kind", choices=("silent_reading", "rosenberg"),
                   default="silent_reading")
    p.add_argument("--user")
    p.add_argument("--environment")
    p.add_argument("--from", dest="from", help="ISO start-time lower bound")
    p.add_argument("--to", help="ISO start-time upper bound")
    p.set_defaults(func=_cmd_sessions)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SelectionError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SurveyError, ScoringError, SessionValidationError, ReferentialError,
            DataError) as exc:
        print(f"data validation error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
