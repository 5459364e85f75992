"""Build the structured conversations sent to the model."""

from __future__ import annotations

import re
import textwrap
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .sandbox import AttemptOutcome, OutcomeKind
from .tasks import SynthesisTask, TestCase

VALID_ROLES = ("system", "user", "assistant")

COMPILE_FOLLOWUP = (
    "The solution doesn't compile. Please fix the bug and make sure the "
    "implementation compiles, runs and can pass all test cases."
)
RUNTIME_FOLLOWUP = (
    "The solution throws run-time exceptions. Please fix the bug and make sure "
    "the implementation compiles, runs and can pass all test cases."
)
FAILING_FOLLOWUP_TEMPLATE = (
    "The implementation fails {which}. Please fix the bug and make sure the "
    "implementation compiles, runs and can pass all test cases."
)


class PromptError(Exception):
    pass


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in VALID_ROLES:
            raise PromptError(f"invalid message role {self.role!r}")
        if not self.content:
            raise PromptError("message content must be non-empty")


@dataclass(frozen=True)
class Exemplar:
    method_line: str
    test_lines: tuple[str, ...]
    output_code: str


_STEP_RE = re.compile(r"^\s*Step (\d+) - ", re.MULTILINE)


@dataclass(frozen=True)
class PromptTemplateSet:
    role_text: str
    instruction_text: str
    exemplars: tuple[Exemplar, ...]
    task_frame: str
    output_directive: str

    def __post_init__(self) -> None:
        steps = [int(n) for n in _STEP_RE.findall(self.instruction_text)]
        if steps != list(range(1, 9)):
            raise PromptError(f"instruction text must contain Steps 1..8 in order, found {steps}")


def _indent(text: str, width: int) -> str:
    pad = " " * width
    return "\n".join(pad + line if line.strip() else line for line in text.split("\n"))


def _tag_block(tag: str, body: str) -> str:
    if not body:
        return f"<{tag}>\n</{tag}>"
    return f"<{tag}>\n{body}\n</{tag}>"


def render_test_cases(test_cases: Sequence[TestCase]) -> list[str]:
    """One ``<ordinal>. ...`` line per case; script text is kept verbatim."""
    lines = []
    for case in test_cases:
        if case.is_script:
            lines.append(f"{case.ordinal}. {case.script}")
        elif case.inputs:
            lines.append(f"{case.ordinal}. {', '.join(case.inputs)} -> {case.expected}")
        else:
            lines.append(f"{case.ordinal}. -> {case.expected}")
    return lines


def _render_exemplar(exemplar: Exemplar) -> str:
    return "\n".join(
        [
            _tag_block("method", _indent(exemplar.method_line, 4)),
            _tag_block("TestCases", _indent("\n".join(exemplar.test_lines), 4)),
            _tag_block("output", _indent(exemplar.output_code, 4)),
        ]
    )


def build_initial_conversation(
    task: SynthesisTask, templates: PromptTemplateSet
) -> list[Message]:
    """The two-message opening: persona, then instructions + examples + task."""
    system = Message("system", _tag_block("Role", _indent(templates.role_text, 4)))

    n = len(templates.exemplars)
    if n == 0:
        examples_block = _tag_block("examples", "")
    else:
        intro = "Here is one example:" if n == 1 else f"Here are {n} examples:"
        body = intro + "\n" + "\n".join(_render_exemplar(e) for e in templates.exemplars)
        examples_block = _tag_block("examples", _indent(body, 4))

    user_content = "\n".join(
        [
            _tag_block("Instruction", _indent(templates.instruction_text, 4)),
            examples_block,
            templates.task_frame,
            _tag_block("method", _indent(task.signature.render(), 4)),
            _tag_block("TestCases", _indent("\n".join(render_test_cases(task.test_cases)), 4)),
            "",
            templates.output_directive,
        ]
    )
    return [system, Message("user", user_content)]


def render_conversation_text(conversation: Sequence[Message]) -> str:
    """Plain-text form of a conversation, as printed by a dry run."""
    return "\n".join(m.content for m in conversation) + "\n"


def format_ordinals(ordinals: Iterable[int]) -> str:
    """``test case 2`` / ``test cases 2 and 5`` / ``test cases 1, 3 and 5``."""
    ordered = sorted(set(ordinals))
    if not ordered:
        raise PromptError("no failing test case ordinals to report")
    if len(ordered) == 1:
        return f"test case {ordered[0]}"
    head = ", ".join(str(o) for o in ordered[:-1])
    return f"test cases {head} and {ordered[-1]}"


def build_followup(outcome: AttemptOutcome) -> str:
    """The error-class-specific repair request appended after a failed attempt."""
    if outcome.kind is OutcomeKind.COMPILE_ERROR:
        return COMPILE_FOLLOWUP
    if outcome.kind is OutcomeKind.RUNTIME_ERROR:
        return RUNTIME_FOLLOWUP
    if outcome.kind is OutcomeKind.FAILING_TESTS:
        return FAILING_FOLLOWUP_TEMPLATE.format(which=format_ordinals(outcome.failing_ordinals))
    raise PromptError("no follow-up is defined for a passing attempt")


_EXEMPLAR_RE = re.compile(
    r"<method>\n(.*?)\n?</method>\s*<TestCases>\n(.*?)\n?</TestCases>\s*<output>\n(.*?)\n?</output>",
    re.DOTALL,
)


def parse_exemplar(text: str, origin: str) -> Exemplar:
    match = _EXEMPLAR_RE.search(text)
    if match is None:
        raise PromptError(
            f"{origin}: exemplar must contain <method>, <TestCases> and <output> blocks"
        )
    test_lines = tuple(line.strip() for line in match.group(2).splitlines() if line.strip())
    if not test_lines:
        raise PromptError(f"{origin}: exemplar has no test case lines")
    return Exemplar(
        method_line=match.group(1).strip(),
        test_lines=test_lines,
        output_code=textwrap.dedent(match.group(3)).strip("\n"),
    )


def load_templates(prompts_dir: Path | None = None) -> PromptTemplateSet:
    """Load templates from a directory, falling back to the packaged defaults.

    A custom directory may override any subset: role.txt, instruction.txt,
    task_frame.txt, output_directive.txt, exemplars/*.txt.
    """
    packaged = resources.files("apisynth").joinpath("prompts")

    def read(name: str) -> str:
        if prompts_dir is not None:
            candidate = Path(prompts_dir) / name
            if candidate.is_file():
                return candidate.read_text(encoding="utf-8").rstrip("\n")
        return packaged.joinpath(name).read_text(encoding="utf-8").rstrip("\n")

    if prompts_dir is not None and (Path(prompts_dir) / "exemplars").is_dir():
        exemplar_sources = [
            (p.read_text(encoding="utf-8"), str(p))
            for p in sorted((Path(prompts_dir) / "exemplars").glob("*.txt"))
        ]
    else:
        entries = [e for e in packaged.joinpath("exemplars").iterdir() if e.name.endswith(".txt")]
        exemplar_sources = [
            (e.read_text(encoding="utf-8"), e.name) for e in sorted(entries, key=lambda e: e.name)
        ]

    return PromptTemplateSet(
        role_text=read("role.txt"),
        instruction_text=read("instruction.txt"),
        exemplars=tuple(parse_exemplar(text, origin) for text, origin in exemplar_sources),
        task_frame=read("task_frame.txt"),
        output_directive=read("output_directive.txt"),
    )
