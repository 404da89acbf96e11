"""Core vocabulary: steps, sequences, outcomes, coverage sets and removal probes.

Everything here is an immutable value; instances can be shared freely
between threads.
"""

from __future__ import annotations

import enum
import posixpath
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Optional, Tuple


def normalize_path(path: str) -> str:
    """Normalize a source path: forward slashes, redundant segments collapsed.

    Case-sensitive.  Raises ValueError on empty paths or paths that escape
    their root through leading ``..`` segments.
    """
    if not path:
        raise ValueError("empty path")
    norm = posixpath.normpath(path.replace("\\", "/"))
    if norm.startswith("../") or norm == "..":
        raise ValueError(f"path escapes source root: {path!r}")
    if norm == ".":
        raise ValueError(f"degenerate path: {path!r}")
    return norm


@dataclass(frozen=True)
class StatementId:
    """One compiler source element at line granularity.

    Identity is structural on (file, line); the enclosing function name is
    metadata used only by function-level aggregation.
    """

    file: str
    line: int
    function: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "file", normalize_path(self.file))
        if self.line < 1:
            raise ValueError(f"statement line must be >= 1, got {self.line}")

    def __str__(self):
        return f"{self.file}:{self.line}"

    def sort_key(self):
        return (self.file, self.line)


@dataclass(frozen=True)
class Step:
    """One individually skippable compilation step."""

    id: str
    display_name: str
    ordinal: int
    aliases: Optional[Tuple[str, ...]] = None


@dataclass(frozen=True)
class StepSequence:
    steps: Tuple[Step, ...]

    def __post_init__(self):
        ids = [s.id for s in self.steps]
        if len(set(ids)) != len(ids):
            raise ValueError("step ids must be pairwise distinct")
        for i, s in enumerate(self.steps):
            if s.ordinal != i:
                raise ValueError(f"step {s.id!r} has ordinal {s.ordinal}, expected {i}")

    @property
    def ids(self) -> Tuple[str, ...]:
        return tuple(s.id for s in self.steps)

    def __len__(self):
        return len(self.steps)

    def ordinal_of(self, step_id: str) -> int:
        for s in self.steps:
            if s.id == step_id:
                return s.ordinal
        raise KeyError(step_id)


class Outcome(enum.Enum):
    PASS = "pass"
    FAIL_WRONG_OUTPUT = "fail-wrong-output"
    FAIL_CRASH = "fail-crash"
    FAIL_TIMEOUT = "fail-timeout"
    FAIL_BUILD = "fail-build"

    @property
    def is_fail(self) -> bool:
        return self is not Outcome.PASS


@dataclass(frozen=True)
class ExecutionResult:
    """Outcome plus executed-statement coverage for one pipeline run."""

    subset: Tuple[str, ...]
    outcome: Outcome
    coverage: FrozenSet[StatementId]
    wall_time: float

    def __post_init__(self):
        if self.wall_time < 0:
            raise ValueError("wall_time must be non-negative")

    def to_json_dict(self):
        return {
            "subset": list(self.subset),
            "outcome": self.outcome.value,
            "coverage": [
                {"file": s.file, "line": s.line, "function": s.function}
                for s in sorted(self.coverage, key=StatementId.sort_key)
            ],
            "wall_time": self.wall_time,
        }


def symmetric_diff(a: Iterable[StatementId], b: Iterable[StatementId]) -> FrozenSet[StatementId]:
    """Statements whose executed/not-executed status differs between two runs."""
    return frozenset(a) ^ frozenset(b)


def is_flip(baseline: Outcome, probe: Outcome) -> bool:
    """True iff a failing baseline turned into a pass.

    A probe that fails differently (e.g. wrong output became a crash) is
    not a flip: the failure did not disappear.
    """
    if baseline is Outcome.PASS:
        raise ValueError("flip is undefined for a passing baseline")
    return probe is Outcome.PASS


@dataclass(frozen=True)
class RemovalProbe:
    """One step-removal experiment compared against its retained baseline."""

    removed_step: str
    context_subset: Tuple[str, ...]
    baseline: ExecutionResult
    probe: ExecutionResult
    flipped: bool
    diff: FrozenSet[StatementId]

    @classmethod
    def from_runs(cls, removed_step: str, baseline: ExecutionResult,
                  probe: ExecutionResult) -> "RemovalProbe":
        if removed_step not in baseline.subset:
            raise ValueError(f"{removed_step!r} not in baseline subset")
        if removed_step in probe.subset:
            raise ValueError(f"{removed_step!r} still present in probe subset")
        return cls(
            removed_step=removed_step,
            context_subset=baseline.subset,
            baseline=baseline,
            probe=probe,
            flipped=is_flip(baseline.outcome, probe.outcome),
            diff=symmetric_diff(baseline.coverage, probe.coverage),
        )

    def to_json_dict(self):
        return {
            "removed_step": self.removed_step,
            "context_subset": list(self.context_subset),
            "baseline_subset": list(self.baseline.subset),
            "probe_subset": list(self.probe.subset),
            "flipped": self.flipped,
            "diff": [
                {"file": s.file, "line": s.line, "function": s.function}
                for s in sorted(self.diff, key=StatementId.sort_key)
            ],
        }
