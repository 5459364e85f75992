"""Shared builders for tests: canned outcomes, records, and a scripted sandbox."""

from __future__ import annotations

import threading
from pathlib import Path

from apisynth.refine import AttemptRecord, FinalStatus, RunRecord
from apisynth.sandbox import AttemptOutcome, OutcomeKind, fingerprint_of


def outcome_of(
    kind: OutcomeKind, detail: str = "", ordinals: frozenset[int] = frozenset()
) -> AttemptOutcome:
    return AttemptOutcome(
        kind=kind,
        fingerprint=fingerprint_of(kind, detail, ordinals),
        failing_ordinals=ordinals,
        detail=detail,
    )


def ok() -> AttemptOutcome:
    return outcome_of(OutcomeKind.PASS)


def compile_error(detail: str = "error: ';' expected") -> AttemptOutcome:
    return outcome_of(OutcomeKind.COMPILE_ERROR, detail)


def runtime_error(detail: str = "Exception in thread \"main\" java.lang.IllegalStateException") -> AttemptOutcome:
    return outcome_of(OutcomeKind.RUNTIME_ERROR, detail)


def failing(*ordinals: int) -> AttemptOutcome:
    return outcome_of(OutcomeKind.FAILING_TESTS, ordinals=frozenset(ordinals))


class StubSandbox:
    """Replays canned outcomes instead of invoking a toolchain.

    Outcomes come either from a single shared list or from a dict keyed by
    target method name (for multi-task suites). Records every call.
    """

    def __init__(self, outcomes=None, by_target=None):
        self.outcomes = list(outcomes or [])
        self.by_target = {k: list(v) for k, v in (by_target or {}).items()}
        self.calls = []
        self._lock = threading.Lock()

    def evaluate(self, unit, target_name, all_ordinals, workdir, classpath=None):
        with self._lock:
            self.calls.append((target_name, Path(workdir), unit))
            queue = self.by_target[target_name] if self.by_target else self.outcomes
            return queue.pop(0)


def java_response(body: str, class_name: str = "Solution") -> str:
    """A plausible model reply: prose around a fenced Java block."""
    return (
        "Here is the complete implementation:\n\n"
        f"```java\npublic class {class_name} {{\n{body}\n}}\n```\n\n"
        "All test cases should pass."
    )


def simple_response(method_line: str = "double ellipseArea(Ellipse2D e) { return 1.0; }") -> str:
    return java_response(f"    {method_line}\n    void testAll() {{ }}")


def _record(task_id, suite, attempts, followups, status) -> RunRecord:
    return RunRecord(
        task_id=task_id,
        task_suite=suite,
        attempts=tuple(AttemptRecord(i + 1, o) for i, o in enumerate(attempts)),
        followups_used=followups,
        final_status=status,
        solved_without_followups=bool(attempts) and attempts[0].kind is OutcomeKind.PASS,
        wall_time_seconds=0.1,
    )


def immediate_pass(task_id: str, suite: str) -> RunRecord:
    return _record(task_id, suite, [ok()], 0, FinalStatus.SOLVED)


def solved_later(task_id: str, suite: str) -> RunRecord:
    return _record(task_id, suite, [failing(1), ok()], 1, FinalStatus.SOLVED)


def compile_then_pass(task_id: str, suite: str) -> RunRecord:
    return _record(task_id, suite, [compile_error(), ok()], 1, FinalStatus.SOLVED)


def compiled_never_solved(task_id: str, suite: str) -> RunRecord:
    return _record(task_id, suite, [failing(1), failing(1)], 1, FinalStatus.FAILED_SAME_ERROR)


def compiled_late_never_solved(task_id: str, suite: str) -> RunRecord:
    """First attempt does not compile; later ones run but never pass."""
    return _record(
        task_id, suite, [compile_error(), failing(1), failing(1)], 2, FinalStatus.FAILED_SAME_ERROR
    )


def never_compiled(task_id: str, suite: str) -> RunRecord:
    return _record(task_id, suite, [compile_error(), compile_error()], 1, FinalStatus.FAILED_SAME_ERROR)


def env_failed(task_id: str, suite: str, reason: str = "backend unreachable") -> RunRecord:
    return RunRecord(
        task_id=task_id,
        task_suite=suite,
        attempts=(),
        followups_used=0,
        final_status=FinalStatus.FAILED_ENVIRONMENT,
        solved_without_followups=False,
        wall_time_seconds=0.0,
        error=reason,
    )


def table_rows_records() -> list[RunRecord]:
    """A synthetic record population reproducing the reference result table.

    frangel: 90 tasks, 88 compiled / 83 passed without follow-ups,
    90 compiled / 88 passed with follow-ups. sypet: 30 tasks, one task needed
    follow-ups. additional: 15 tasks, one task needed follow-ups.
    """
    records = []
    records += [immediate_pass(f"fr-pass-{i:02d}", "frangel") for i in range(83)]
    records += [solved_later(f"fr-late-{i:02d}", "frangel") for i in range(5)]
    records += [compiled_late_never_solved(f"fr-lost-{i:02d}", "frangel") for i in range(2)]
    records += [immediate_pass(f"sy-pass-{i:02d}", "sypet") for i in range(29)]
    records += [solved_later("sy-late-00", "sypet")]
    records += [immediate_pass(f"ad-pass-{i:02d}", "additional") for i in range(14)]
    records += [solved_later("ad-late-00", "additional")]
    return records
