"""Evaluation reports and their table / chart-data / summary renderings.

Rendering is pure: every number printed is read from the report, never
recomputed, and identical reports produce byte-identical output. Table rows
look like ``T7 | SVM Linear | 1 | Binary | No | 0.9761`` in catalog order;
chart data files carry (target id, CCR) pairs for the two bar charts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .selection import PipelineConfig, TargetResult
from .survey import Dataset

REPORT_FORMAT_VERSION = 1

TABLE_HEADER = "ID | Best Model | Thr | Input | Cons | Score"

HIGH_SCORE_CUT = 0.90


@dataclass
class EvaluationReport:
    results: list[TargetResult]
    tools_mean_ccr: float | None
    strategies_mean_ccr: float | None
    tools_above_cut: int
    strategies_above_cut: int
    tool_ids: list[str]      # active tools, catalog order
    strategy_ids: list[str]  # active strategies, catalog order
    failures: dict[str, str] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def result_for(self, target: str) -> TargetResult | None:
        for result in self.results:
            if result.target == target:
                return result
        return None

    def to_dict(self) -> dict:
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "results": [r.to_dict() for r in self.results],
            "tools_mean_ccr": self.tools_mean_ccr,
            "strategies_mean_ccr": self.strategies_mean_ccr,
            "tools_above_cut": self.tools_above_cut,
            "strategies_above_cut": self.strategies_above_cut,
            "tool_ids": self.tool_ids,
            "strategy_ids": self.strategy_ids,
            "failures": self.failures,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, payload: dict) -> "EvaluationReport":
        version = payload.get("format_version")
        if version != REPORT_FORMAT_VERSION:
            raise ValueError(f"unsupported report format version: {version!r}")
        return cls(
            results=[TargetResult.from_dict(r) for r in payload["results"]],
            tools_mean_ccr=payload["tools_mean_ccr"],
            strategies_mean_ccr=payload["strategies_mean_ccr"],
            tools_above_cut=int(payload["tools_above_cut"]),
            strategies_above_cut=int(payload["strategies_above_cut"]),
            tool_ids=list(payload["tool_ids"]),
            strategy_ids=list(payload["strategy_ids"]),
            failures=dict(payload.get("failures", {})),
            metadata=dict(payload.get("metadata", {})),
        )

    @classmethod
    def load(cls, path: str | Path) -> "EvaluationReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def build_report(dataset: Dataset, results: list[TargetResult],
                 failures: dict[str, str], seed: int,
                 grid: list[PipelineConfig]) -> EvaluationReport:
    """Aggregate per-target results into a report with section means and counts."""
    by_target = {r.target: r for r in results}
    tool_ids = [t for t in dataset.catalog.tools
                if t in dataset.active_targets and t in by_target]
    strategy_ids = [t for t in dataset.catalog.strategies
                    if t in dataset.active_targets and t in by_target]
    tool_ccrs = [by_target[t].mean_ccr for t in tool_ids]
    strategy_ccrs = [by_target[t].mean_ccr for t in strategy_ids]

    ordered = [by_target[t] for t in (*tool_ids, *strategy_ids)]
    return EvaluationReport(
        results=ordered,
        tools_mean_ccr=sum(tool_ccrs) / len(tool_ccrs) if tool_ccrs else None,
        strategies_mean_ccr=(sum(strategy_ccrs) / len(strategy_ccrs)
                             if strategy_ccrs else None),
        tools_above_cut=sum(1 for v in tool_ccrs if v > HIGH_SCORE_CUT),
        strategies_above_cut=sum(1 for v in strategy_ccrs if v > HIGH_SCORE_CUT),
        tool_ids=tool_ids,
        strategy_ids=strategy_ids,
        failures=failures,
        metadata={
            "seed": seed,
            "grid": [c.to_dict() for c in grid],
            "dataset_fingerprint": dataset.fingerprint(),
            "dropped_targets": dataset.dropped_targets,
            "n_records": dataset.n,
            "decisions": {
                "folds": "shuffled, not stratified; per-fold sizes differ by at most 1",
                "score": "mean of per-fold CCRs (pooled_ccr also recorded per target)",
                "consensus_membership": "best CV config of each family at the shared threshold/encoding",
                "tie_break": "family order RF<KNN<SVM<LR, smaller hyperparameters, lower threshold",
            },
        },
    )


def _format_row(result: TargetResult) -> str:
    config = result.best_config
    return " | ".join([
        result.target,
        config.learner.display_name(),
        str(config.threshold),
        "Binary" if config.inputs_binarized else "Numeric",
        "Yes" if config.use_consensus else "No",
        f"{result.mean_ccr:.4f}",
    ])


def _render_section(report: EvaluationReport, ids: list[str]) -> str | None:
    if not ids:
        return None
    lines = [TABLE_HEADER]
    for target in ids:
        result = report.result_for(target)
        if result is not None:
            lines.append(_format_row(result))
    return "\n".join(lines) + "\n"


def render_tables(report: EvaluationReport) -> dict[str, str]:
    """Tools and strategies tables; a section absent from the report renders
    no file. Keys are 'tools' / 'strategies'."""
    if not report.results:
        raise ValueError("cannot render an empty report")
    out: dict[str, str] = {}
    tools = _render_section(report, report.tool_ids)
    if tools is not None:
        out["tools"] = tools
    strategies = _render_section(report, report.strategy_ids)
    if strategies is not None:
        out["strategies"] = strategies
    return out


def render_chart_data(report: EvaluationReport) -> dict[str, str]:
    """Two-column (target id, CCR) chart data per section, catalog order.
    Values are printed exactly as in the table Score column."""
    if not report.results:
        raise ValueError("cannot render an empty report")
    out: dict[str, str] = {}
    for key, ids in (("tools", report.tool_ids), ("strategies", report.strategy_ids)):
        if not ids:
            continue
        lines = []
        for target in ids:
            result = report.result_for(target)
            if result is not None:
                lines.append(f"{target},{result.mean_ccr:.4f}")
        out[key] = "\n".join(lines) + "\n"
    return out


def render_summary(report: EvaluationReport) -> str:
    """One-paragraph run summary: section means and counts above the cut."""
    lines = []
    if report.tools_mean_ccr is not None:
        lines.append(
            f"Mean CCR for support tools: {report.tools_mean_ccr:.4f} "
            f"({report.tools_above_cut} of {len(report.tool_ids)} tools above "
            f"{HIGH_SCORE_CUT:.2f})."
        )
    if report.strategies_mean_ccr is not None:
        lines.append(
            f"Mean CCR for learning strategies: {report.strategies_mean_ccr:.4f} "
            f"({report.strategies_above_cut} of {len(report.strategy_ids)} strategies "
            f"above {HIGH_SCORE_CUT:.2f})."
        )
    if report.failures:
        lines.append(f"Failed targets: {', '.join(sorted(report.failures))}.")
    return "\n".join(lines) + "\n"
