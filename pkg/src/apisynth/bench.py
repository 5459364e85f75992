"""Suite runner, metric aggregation, and report rendering."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Sequence

from .config import ConfigError
from .llm import ChatBackend
from .prompting import PromptTemplateSet
from .refine import (
    FinalStatus,
    RunRecord,
    SandboxLike,
    environment_record,
    load_record,
    save_record,
    synthesize,
)
from .sandbox import OutcomeKind
from .tasks import BenchmarkSuite, resolve_dependencies, resolve_dependency


class MetricsError(Exception):
    """An aggregated count violates a structural invariant."""


@dataclass(frozen=True)
class SuiteMetrics:
    suite: str
    n_tasks: int
    compiled_without: int
    passed_without: int
    compiled_with: int
    passed_with: int
    environment_failures: int = 0
    environment_failure_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class SuiteReport:
    suites: tuple[SuiteMetrics, ...]
    total: SuiteMetrics

    def rows(self) -> tuple[SuiteMetrics, ...]:
        return self.suites + (self.total,)


def percentage(count: int, n: int) -> Decimal | None:
    """Share of n as a percentage with one decimal, half-up; None when n is 0."""
    if n == 0:
        return None
    return (Decimal(count * 100) / Decimal(n)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)


def _cell(count: int, n: int) -> str:
    pct = percentage(count, n)
    if pct is None:
        return "n/a"
    return f"{count} ({pct}%)"


def _check_invariants(m: SuiteMetrics) -> None:
    checks = [
        m.passed_without <= m.compiled_without <= m.n_tasks,
        m.passed_with <= m.compiled_with <= m.n_tasks,
        m.passed_without <= m.passed_with,
        m.compiled_without <= m.compiled_with,
        0 <= m.environment_failures <= m.n_tasks,
    ]
    if not all(checks):
        raise MetricsError(f"inconsistent counts for suite {m.suite!r}: {m}")


def _metrics(name: str, records: Sequence[RunRecord]) -> SuiteMetrics:
    compiled_without = passed_without = compiled_with = passed_with = 0
    env_ids = []
    for record in records:
        if record.final_status is FinalStatus.FAILED_ENVIRONMENT:
            # No verdict was reached; counted as neither compiling nor passing.
            env_ids.append(record.task_id)
            continue
        attempts = record.attempts
        if attempts and attempts[0].outcome.kind is not OutcomeKind.COMPILE_ERROR:
            compiled_without += 1
        if record.solved_without_followups:
            passed_without += 1
        if any(a.outcome.kind is not OutcomeKind.COMPILE_ERROR for a in attempts):
            compiled_with += 1
        if record.final_status is FinalStatus.SOLVED:
            passed_with += 1
    metrics = SuiteMetrics(
        suite=name,
        n_tasks=len(records),
        compiled_without=compiled_without,
        passed_without=passed_without,
        compiled_with=compiled_with,
        passed_with=passed_with,
        environment_failures=len(env_ids),
        environment_failure_ids=tuple(sorted(env_ids)),
    )
    _check_invariants(metrics)
    return metrics


def aggregate(records: Sequence[RunRecord]) -> SuiteReport:
    """Per-suite and total counts for the four compile/pass measures."""
    by_suite: dict[str, list[RunRecord]] = {}
    for record in records:
        by_suite.setdefault(record.task_suite, []).append(record)
    suites = tuple(_metrics(name, group) for name, group in sorted(by_suite.items()))
    total = _metrics("Total", list(records))
    return SuiteReport(suites=suites, total=total)


Baseline = dict[str, tuple[int, int]]


def load_baseline(path: Path) -> Baseline:
    """A baseline file maps suite name to {n_tasks, success_count}."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: cannot load baseline: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: baseline must be a JSON object keyed by suite name")
    baseline: Baseline = {}
    for suite, entry in data.items():
        if (
            not isinstance(entry, dict)
            or not isinstance(entry.get("n_tasks"), int)
            or not isinstance(entry.get("success_count"), int)
        ):
            raise ConfigError(
                f"{path}: baseline entry {suite!r} must have integer n_tasks and success_count"
            )
        n, k = entry["n_tasks"], entry["success_count"]
        if not 0 <= k <= n:
            raise ConfigError(f"{path}: baseline entry {suite!r} has success_count outside 0..n")
        baseline[suite] = (n, k)
    return baseline


def _baseline_cell(row: SuiteMetrics, report: SuiteReport, baseline: Baseline) -> str:
    if row.suite == "Total":
        matched = [baseline[m.suite] for m in report.suites if m.suite in baseline]
        if not matched:
            return "n/a"
        n = sum(m[0] for m in matched)
        k = sum(m[1] for m in matched)
        return _cell(k, n)
    if row.suite not in baseline:
        return "n/a"
    n, k = baseline[row.suite]
    return _cell(k, n)


def render_markdown(report: SuiteReport, baseline: Baseline | None = None) -> str:
    headers = [
        "Suite",
        "Tasks",
        "Compiled (no follow-ups)",
        "Passed (no follow-ups)",
        "Compiled (with follow-ups)",
        "Passed (with follow-ups)",
    ]
    if baseline is not None:
        headers.append("Baseline solved")
    lines = [
        "| " + " | ".join(headers) + " |",
        "| " + " | ".join("---" for _ in headers) + " |",
    ]
    for row in report.rows():
        cells = [
            row.suite,
            str(row.n_tasks),
            _cell(row.compiled_without, row.n_tasks),
            _cell(row.passed_without, row.n_tasks),
            _cell(row.compiled_with, row.n_tasks),
            _cell(row.passed_with, row.n_tasks),
        ]
        if baseline is not None:
            cells.append(_baseline_cell(row, report, baseline))
        lines.append("| " + " | ".join(cells) + " |")
    if report.total.environment_failures:
        lines.append("")
        lines.append(
            "Environment failures (counted as not compiled): "
            + ", ".join(report.total.environment_failure_ids)
        )
    return "\n".join(lines) + "\n"


def _row_values(row: SuiteMetrics, report: SuiteReport, baseline: Baseline | None) -> dict:
    def pct(count: int) -> str | None:
        value = percentage(count, row.n_tasks)
        return None if value is None else str(value)

    values: dict = {
        "suite": row.suite,
        "tasks": row.n_tasks,
        "compiled_no_followups": row.compiled_without,
        "compiled_no_followups_pct": pct(row.compiled_without),
        "passed_no_followups": row.passed_without,
        "passed_no_followups_pct": pct(row.passed_without),
        "compiled_with_followups": row.compiled_with,
        "compiled_with_followups_pct": pct(row.compiled_with),
        "passed_with_followups": row.passed_with,
        "passed_with_followups_pct": pct(row.passed_with),
        "environment_failures": row.environment_failures,
    }
    if baseline is not None:
        cell = _baseline_cell(row, report, baseline)
        if cell == "n/a":
            values["baseline_tasks"] = None
            values["baseline_solved"] = None
            values["baseline_pct"] = None
        else:
            if row.suite == "Total":
                matched = [baseline[m.suite] for m in report.suites if m.suite in baseline]
                n, k = sum(m[0] for m in matched), sum(m[1] for m in matched)
            else:
                n, k = baseline[row.suite]
            values["baseline_tasks"] = n
            values["baseline_solved"] = k
            values["baseline_pct"] = str(percentage(k, n))
    return values


def render_csv(report: SuiteReport, baseline: Baseline | None = None) -> str:
    rows = [_row_values(row, report, baseline) for row in report.rows()]
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buffer.getvalue()


def render_json(report: SuiteReport, baseline: Baseline | None = None) -> str:
    data = {
        "suites": [_row_values(row, report, baseline) for row in report.suites],
        "total": _row_values(report.total, report, baseline),
    }
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


RENDERERS = {"markdown": render_markdown, "csv": render_csv, "json": render_json}


def write_reports(
    run_dir: Path, report: SuiteReport, baseline: Baseline | None = None
) -> dict[str, Path]:
    """Write all three report formats at the run root."""
    run_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for fmt, suffix in (("markdown", "md"), ("csv", "csv"), ("json", "json")):
        path = run_dir / f"report.{suffix}"
        path.write_text(RENDERERS[fmt](report, baseline), encoding="utf-8")
        paths[fmt] = path
    return paths


def run_suite(
    suite: BenchmarkSuite,
    backend: ChatBackend,
    templates: PromptTemplateSet,
    sandbox: SandboxLike,
    run_dir: Path,
    deps_dir: Path | None = None,
    max_followups: int = 3,
    workers: int = 4,
    resume: bool = False,
) -> list[RunRecord]:
    """Run every task, bounded-parallel; returns records in task id order.

    With resume, tasks whose record already exists are skipped, except
    environment failures, which are retried so a repaired environment can
    fill them in.
    """
    records: dict[str, RunRecord] = {}
    pending = []
    for task in suite.tasks:
        record_path = run_dir / task.id / "record.json"
        if resume and record_path.is_file():
            existing = load_record(record_path)
            if existing.final_status is not FinalStatus.FAILED_ENVIRONMENT:
                records[task.id] = existing
                continue
        pending.append(task)

    def work(task):
        task_dir = run_dir / task.id
        unresolved = [d for d in task.dependencies if resolve_dependency(d, deps_dir) is None]
        if unresolved:
            record = environment_record(
                task, "unresolved dependencies: " + ", ".join(unresolved)
            )
            save_record(record, task_dir / "record.json")
            return record
        classpath = resolve_dependencies(task, deps_dir)
        return synthesize(task, backend, templates, sandbox, task_dir, classpath, max_followups)

    if pending:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(work, task): task for task in pending}
            for future in as_completed(futures):
                record = future.result()
                records[record.task_id] = record

    return [records[task.id] for task in suite.tasks]
