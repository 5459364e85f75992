"""The synthesis loop: prompt, extract, evaluate, follow up on errors."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol

from .extractor import ExtractionError, SourceUnit, extract_source_unit
from .llm import BackendError, ChatBackend
from .prompting import Message, PromptTemplateSet, build_followup, build_initial_conversation
from .sandbox import (
    AttemptOutcome,
    OutcomeKind,
    Sandbox,
    ToolchainError,
    extraction_failure_outcome,
    find_toolchain,
)
from .tasks import SynthesisTask

DEFAULT_MAX_FOLLOWUPS = 3


class FinalStatus(str, Enum):
    SOLVED = "solved"
    FAILED_BUDGET = "failed_budget"
    FAILED_SAME_ERROR = "failed_same_error"
    FAILED_EXTRACTION = "failed_extraction"
    FAILED_ENVIRONMENT = "failed_environment"


@dataclass(frozen=True)
class AttemptRecord:
    index: int
    outcome: AttemptOutcome
    followup_sent: str | None = None


@dataclass(frozen=True)
class RunRecord:
    task_id: str
    task_suite: str
    attempts: tuple[AttemptRecord, ...]
    followups_used: int
    final_status: FinalStatus
    solved_without_followups: bool
    wall_time_seconds: float
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "task_suite": self.task_suite,
            "final_status": self.final_status.value,
            "followups_used": self.followups_used,
            "solved_without_followups": self.solved_without_followups,
            "wall_time_seconds": self.wall_time_seconds,
            "error": self.error,
            "attempts": [
                {
                    "index": a.index,
                    "outcome": a.outcome.to_dict(),
                    "followup_sent": a.followup_sent,
                }
                for a in self.attempts
            ],
        }

    @staticmethod
    def from_dict(data: dict) -> RunRecord:
        return RunRecord(
            task_id=data["task_id"],
            task_suite=data["task_suite"],
            attempts=tuple(
                AttemptRecord(
                    index=a["index"],
                    outcome=AttemptOutcome.from_dict(a["outcome"]),
                    followup_sent=a.get("followup_sent"),
                )
                for a in data.get("attempts", [])
            ),
            followups_used=data["followups_used"],
            final_status=FinalStatus(data["final_status"]),
            solved_without_followups=data["solved_without_followups"],
            wall_time_seconds=data["wall_time_seconds"],
            error=data.get("error"),
        )


class SandboxLike(Protocol):
    def evaluate(
        self,
        unit: SourceUnit,
        target_name: str,
        all_ordinals: tuple[int, ...],
        workdir: Path,
        classpath: list[Path] | None = None,
    ) -> AttemptOutcome: ...


def make_sandbox(compile_timeout: float = 60.0, run_timeout: float = 30.0) -> Sandbox:
    """Real toolchain sandbox; raises when no JDK is available."""
    return Sandbox(
        toolchain=find_toolchain(),
        compile_timeout=compile_timeout,
        run_timeout=run_timeout,
    )


def save_record(record: RunRecord, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_record(path: Path) -> RunRecord:
    return RunRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))


def environment_record(task: SynthesisTask, reason: str) -> RunRecord:
    return RunRecord(
        task_id=task.id,
        task_suite=task.suite,
        attempts=(),
        followups_used=0,
        final_status=FinalStatus.FAILED_ENVIRONMENT,
        solved_without_followups=False,
        wall_time_seconds=0.0,
        error=reason,
    )


def synthesize(
    task: SynthesisTask,
    backend: ChatBackend,
    templates: PromptTemplateSet,
    sandbox: SandboxLike,
    task_dir: Path,
    classpath: list[Path] | None = None,
    max_followups: int = DEFAULT_MAX_FOLLOWUPS,
) -> RunRecord:
    """Run the full loop for one task and persist its record under task_dir.

    The conversation is continuous: each failed attempt appends the model's
    reply and one error-specific follow-up. The loop stops on a pass, on two
    consecutive attempts with the same error fingerprint, on an exhausted
    follow-up budget, or on an environment fault (backend or toolchain).
    """
    start = time.monotonic()
    conversation = build_initial_conversation(task, templates)
    ordinals = tuple(t.ordinal for t in task.test_cases)
    param_count = len(task.signature.parameters)
    attempts: list[AttemptRecord] = []
    followups_used = 0
    error: str | None = None

    try:
        while True:
            index = len(attempts) + 1
            exchange = backend.complete(conversation, task.id)
            try:
                unit = extract_source_unit(exchange.response_text, task.signature.name, param_count)
            except ExtractionError as exc:
                outcome = extraction_failure_outcome(str(exc))
            else:
                outcome = sandbox.evaluate(
                    unit,
                    task.signature.name,
                    ordinals,
                    task_dir / f"attempt-{index}",
                    classpath,
                )

            if outcome.kind is OutcomeKind.PASS:
                attempts.append(AttemptRecord(index, outcome))
                final_status = FinalStatus.SOLVED
                break

            previous = attempts[-1].outcome.fingerprint if attempts else None
            if previous == outcome.fingerprint:
                attempts.append(AttemptRecord(index, outcome))
                final_status = (
                    FinalStatus.FAILED_EXTRACTION
                    if outcome.extraction_failed
                    else FinalStatus.FAILED_SAME_ERROR
                )
                break
            if followups_used >= max_followups:
                attempts.append(AttemptRecord(index, outcome))
                final_status = (
                    FinalStatus.FAILED_EXTRACTION
                    if outcome.extraction_failed
                    else FinalStatus.FAILED_BUDGET
                )
                break

            followup = build_followup(outcome)
            attempts.append(AttemptRecord(index, outcome, followup_sent=followup))
            conversation = list(conversation) + [
                Message("assistant", exchange.response_text),
                Message("user", followup),
            ]
            followups_used += 1
    except (BackendError, ToolchainError) as exc:
        final_status = FinalStatus.FAILED_ENVIRONMENT
        error = str(exc)

    record = RunRecord(
        task_id=task.id,
        task_suite=task.suite,
        attempts=tuple(attempts),
        followups_used=followups_used,
        final_status=final_status,
        solved_without_followups=bool(attempts)
        and attempts[0].outcome.kind is OutcomeKind.PASS,
        wall_time_seconds=time.monotonic() - start,
        error=error,
    )
    save_record(record, task_dir / "record.json")
    return record
