#!/usr/bin/env python3
"""Regenerate the golden initial-prompt fixture from the packaged templates.

Run after any deliberate change to the prompt templates or renderer, then
review the diff before committing.
"""

from __future__ import annotations

from pathlib import Path

from apisynth.prompting import build_initial_conversation, load_templates, render_conversation_text
from apisynth.tasks import parse_task_file

REPO = Path(__file__).resolve().parent.parent
TASK = REPO / "tasks" / "sample" / "ellipse-area.json"
GOLDEN = REPO / "tests" / "data" / "golden_initial_prompt.txt"


def main() -> None:
    task = parse_task_file(TASK)
    conversation = build_initial_conversation(task, load_templates())
    GOLDEN.parent.mkdir(parents=True, exist_ok=True)
    GOLDEN.write_text(render_conversation_text(conversation), encoding="utf-8")
    print(f"wrote {GOLDEN} ({GOLDEN.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
