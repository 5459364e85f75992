"""Run-level configuration shared by the CLI commands."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .llm import BackendConfig

ENV_PREFIX = "APISYNTH_"


class ConfigError(Exception):
    """Bad configuration; callers map this to the environment/config exit code."""


def env_value(name: str) -> str | None:
    """Environment fallback for a CLI flag; flags win over these."""
    return os.environ.get(ENV_PREFIX + name)


def default_run_id() -> str:
    return time.strftime("%Y%m%d-%H%M%S")


@dataclass(frozen=True)
class RunConfig:
    backend: BackendConfig
    prompts_dir: Path | None = None
    deps_dir: Path | None = None
    workers: int = 4
    compile_timeout: float = 60.0
    run_timeout: float = 30.0
    max_followups: int = 3
    run_id: str = field(default_factory=default_run_id)
    out_dir: Path = Path("runs")
    resume: bool = False
    mock_script: Path | None = None

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.max_followups < 0:
            raise ConfigError(f"max-followups must be >= 0, got {self.max_followups}")
        if self.compile_timeout <= 0 or self.run_timeout <= 0:
            raise ConfigError("timeouts must be positive")
        if not self.run_id or "/" in self.run_id:
            raise ConfigError(f"run id must be a non-empty path segment, got {self.run_id!r}")

    @property
    def run_dir(self) -> Path:
        return self.out_dir / self.run_id
