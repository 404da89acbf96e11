"""Pipeline drivers: run a compilation with a subset of steps retained.

A driver answers one question: given an ordered subset of step ids, what
is the outcome and which compiler statements executed?  ``ProcessDriver``
talks to a real compiler through configurable shell commands and coverage
files; the testbed's in-process driver lives in ``bugsteps.toy.driver``.
Results are cached (on disk for process runs) keyed by the config
fingerprint plus the ordered retained subset, so repeated identical
subsets never re-run.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import subprocess
import threading
import time
from dataclasses import dataclass, field
from glob import glob
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import coverage as covmod
from .errors import (
    CommandFailed,
    CoverageMissing,
    EmptySequence,
    InvalidConfig,
)
from .model import ExecutionResult, Outcome, StatementId, Step, StepSequence
from .util import fingerprint

log = logging.getLogger(__name__)

COVERAGE_PARSERS = {
    "native_json": covmod.parse_native_json,
    "gcov_json": covmod.parse_gcov_json,
}


@dataclass
class DriverConfig:
    enumerate_command: str
    run_command: str
    test_command: Optional[str]
    expected_output: bytes
    coverage_source: str
    coverage_paths: List[str]
    timeout: float
    workdir: str
    env: Dict[str, str] = field(default_factory=dict)
    alias_map: Optional[Dict[str, List[str]]] = None
    step_separator: str = ","
    step_template: str = "{step}"
    source_root: Optional[str] = None

    def __post_init__(self):
        if self.run_command.count("{passes}") != 1:
            raise InvalidConfig("run_command must contain exactly one {passes} placeholder")
        if self.timeout <= 0:
            raise InvalidConfig("timeout must be positive")
        if self.coverage_source not in COVERAGE_PARSERS:
            raise InvalidConfig(f"unknown coverage_source {self.coverage_source!r}")


def _read_config_doc(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot read driver config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidConfig(f"driver config {path} must be a JSON object")
    return doc


def load_config(path) -> DriverConfig:
    path = Path(path)
    doc = _read_config_doc(path)
    if doc.get("kind", "process") != "process":
        raise InvalidConfig(f"{path} is not a process driver config")
    if "expected_output_file" in doc:
        ref = (path.parent / doc["expected_output_file"]).resolve()
        expected = ref.read_bytes()
    else:
        expected = str(doc.get("expected_output", "")).encode("utf-8")
    workdir = doc.get("workdir", ".")
    if not os.path.isabs(workdir):
        workdir = str((path.parent / workdir).resolve())
    try:
        return DriverConfig(
            enumerate_command=doc["enumerate_command"],
            run_command=doc["run_command"],
            test_command=doc.get("test_command"),
            expected_output=expected,
            coverage_source=doc.get("coverage_source", "native_json"),
            coverage_paths=list(doc.get("coverage_paths", [])),
            timeout=float(doc.get("timeout", 60.0)),
            workdir=workdir,
            env=dict(doc.get("env", {})),
            alias_map={k: list(v) for k, v in doc["alias_map"].items()}
            if doc.get("alias_map")
            else None,
            step_separator=doc.get("step_separator", ","),
            step_template=doc.get("step_template", "{step}"),
            source_root=doc.get("source_root"),
        )
    except KeyError as exc:
        raise InvalidConfig(f"driver config {path} missing field {exc}") from exc


def load_driver(path, cache_dir=None):
    """Build a driver from a config file; dispatches on the ``kind`` field."""
    path = Path(path)
    doc = _read_config_doc(path)
    kind = doc.get("kind", "process")
    if kind == "toy":
        from .toy.bugs import SeededBug
        from .toy.driver import ToyDriver

        scn_path = Path(doc["scenario"])
        if not scn_path.is_absolute():
            scn_path = path.parent / scn_path
        try:
            scn_doc = json.loads(scn_path.read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfig(f"cannot read scenario {scn_path}: {exc}") from exc
        return ToyDriver(SeededBug.from_json_dict(scn_doc))
    if kind == "process":
        return ProcessDriver(load_config(path), cache_dir=cache_dir)
    raise InvalidConfig(f"unknown driver kind {kind!r}")


def group_aliased_steps(sub_steps: Sequence[str],
                        alias_map: Dict[str, List[str]]) -> StepSequence:
    """Collapse enumerated sub-steps into logical steps.

    A logical step's position is the position of its LAST enumerated
    sub-step: by the time that sub-pass runs, every deletable sub-pass of a
    later-or-overlapping option has already been handled, which is what
    reverse traversal needs.
    """
    owner = {}
    for logical, subs in alias_map.items():
        for s in subs:
            owner[s] = logical
    last_pos: Dict[str, int] = {}
    members: Dict[str, List[str]] = {}
    order: List[str] = []
    for pos, sub in enumerate(sub_steps):
        logical = owner.get(sub, sub)
        if logical not in last_pos:
            order.append(logical)
        last_pos[logical] = pos
        members.setdefault(logical, []).append(sub)
    order.sort(key=lambda logical: last_pos[logical])
    steps = []
    for i, logical in enumerate(order):
        subs = members[logical]
        aliased = logical in alias_map
        steps.append(
            Step(
                id=logical,
                display_name=logical,
                ordinal=i,
                aliases=tuple(subs) if aliased else None,
            )
        )
    return StepSequence(tuple(steps))


class ProcessDriver:
    """Runs the pipeline through shell commands with an on-disk result cache."""

    def __init__(self, config: DriverConfig, cache_dir=None):
        self.config = config
        self.fingerprint = fingerprint(
            {
                "enumerate_command": config.enumerate_command,
                "run_command": config.run_command,
                "test_command": config.test_command,
                "expected_sha": hashlib.sha256(config.expected_output).hexdigest(),
                "coverage_source": config.coverage_source,
                "coverage_paths": config.coverage_paths,
                "workdir": config.workdir,
                "env": config.env,
                "alias_map": config.alias_map,
                "step_separator": config.step_separator,
                "step_template": config.step_template,
                "source_root": config.source_root,
            }
        )
        root = Path(cache_dir) if cache_dir else Path(config.workdir) / ".bugsteps-cache"
        self.cache_dir = root / self.fingerprint[:16]
        self._mem: Dict[Tuple[str, ...], ExecutionResult] = {}
        self._lock = threading.Lock()
        self._sequence: Optional[StepSequence] = None
        self.execute_calls = 0
        self.process_runs = 0

    # -- step enumeration ----------------------------------------------

    def enumerate_steps(self) -> StepSequence:
        if self._sequence is not None:
            return self._sequence
        proc = self._run_command(self.config.enumerate_command, scratch=None)
        if proc is None:
            raise CommandFailed(self.config.enumerate_command, "timeout")
        if proc.returncode != 0:
            raise CommandFailed(
                self.config.enumerate_command, f"exit status {proc.returncode}"
            )
        lines = [ln.strip() for ln in proc.stdout.decode("utf-8", "replace").splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines:
            raise EmptySequence("step enumeration produced no steps")
        if self.config.alias_map:
            seq = group_aliased_steps(lines, self.config.alias_map)
        else:
            seq = StepSequence(
                tuple(Step(id=ln, display_name=ln, ordinal=i) for i, ln in enumerate(lines))
            )
        self._sequence = seq
        return seq

    # -- execution ------------------------------------------------------

    def execute(self, subset: Sequence[str]) -> ExecutionResult:
        key = tuple(subset)
        with self._lock:
            self.execute_calls += 1
            cached = self._mem.get(key)
        if cached is not None:
            return cached
        disk = self._cache_load(key)
        if disk is not None:
            with self._lock:
                self._mem[key] = disk
            return disk
        result = self._execute_uncached(key)
        with self._lock:
            self.process_runs += 1
            self._mem[key] = result
        self._cache_store(key, result)
        return result

    def _expand_subset(self, subset: Tuple[str, ...]) -> List[str]:
        seq = self.enumerate_steps()
        pos = {s.id: s.ordinal for s in seq.steps}
        last = -1
        expanded: List[str] = []
        for sid in subset:
            if sid not in pos:
                raise KeyError(f"unknown step id {sid!r}")
            if pos[sid] <= last:
                raise ValueError("subset must be an ordered subsequence of the step list")
            last = pos[sid]
            step = seq.steps[pos[sid]]
            expanded.extend(step.aliases if step.aliases else (sid,))
        return expanded

    def _execute_uncached(self, key: Tuple[str, ...]) -> ExecutionResult:
        expanded = self._expand_subset(key)
        joined = self.config.step_separator.join(
            self.config.step_template.replace("{step}", s) for s in expanded
        )
        scratch = self._make_scratch(key)
        started = time.monotonic()
        run_cmd = self.config.run_command.replace("{passes}", joined)
        run_proc = self._run_command(run_cmd, scratch, log_stem="run")
        outcome = None
        observed = b""
        if run_proc is None:
            outcome = Outcome.FAIL_TIMEOUT
        elif run_proc.returncode < 0 or run_proc.returncode >= 128:
            # direct signal, or the shell reporting a signal as 128+N
            outcome = Outcome.FAIL_CRASH
        elif run_proc.returncode != 0:
            outcome = Outcome.FAIL_BUILD
        else:
            observed = run_proc.stdout
        if outcome is None and self.config.test_command:
            test_proc = self._run_command(self.config.test_command, scratch, log_stem="test")
            if test_proc is None:
                outcome = Outcome.FAIL_TIMEOUT
            elif test_proc.returncode != 0:
                outcome = Outcome.FAIL_CRASH
            else:
                observed = test_proc.stdout
        if outcome is None:
            expected = self.config.expected_output.rstrip(b"\n")
            outcome = (
                Outcome.PASS
                if observed.rstrip(b"\n") == expected
                else Outcome.FAIL_WRONG_OUTPUT
            )
        cov = self._collect_coverage(scratch)
        wall = time.monotonic() - started
        return ExecutionResult(subset=key, outcome=outcome, coverage=cov, wall_time=wall)

    def _run_command(self, command: str, scratch: Optional[Path], log_stem: str = "cmd"):
        if scratch is not None:
            command = command.replace("{scratch}", str(scratch))
        env = dict(os.environ)
        env.update(self.config.env)
        if scratch is not None:
            env["RUN_SCRATCH"] = str(scratch)
        try:
            proc = subprocess.run(
                command,
                shell=True,
                cwd=self.config.workdir,
                env=env,
                capture_output=True,
                timeout=self.config.timeout,
            )
        except subprocess.TimeoutExpired:
            return None
        if scratch is not None:
            (scratch / f"{log_stem}.stdout").write_bytes(proc.stdout)
            (scratch / f"{log_stem}.stderr").write_bytes(proc.stderr)
        return proc

    def _make_scratch(self, key: Tuple[str, ...]) -> Path:
        digest = hashlib.sha256("\x1f".join(key).encode("utf-8")).hexdigest()[:16]
        scratch = self.cache_dir / "runs" / digest
        if scratch.exists():
            shutil.rmtree(scratch)
        scratch.mkdir(parents=True)
        return scratch

    def _collect_coverage(self, scratch: Path):
        parser = COVERAGE_PARSERS[self.config.coverage_source]
        matched: List[str] = []
        for pattern in self.config.coverage_paths:
            pattern = pattern.replace("{scratch}", str(scratch))
            if not os.path.isabs(pattern):
                pattern = os.path.join(self.config.workdir, pattern)
            matched.extend(sorted(glob(pattern)))
        if not matched:
            raise CoverageMissing(
                f"no coverage file matched {self.config.coverage_paths!r}"
            )
        out = set()
        for fname in matched:
            out.update(parser(Path(fname).read_bytes(), self.config.source_root))
        return frozenset(out)

    # -- disk cache ------------------------------------------------------

    def _cache_path(self, key: Tuple[str, ...]) -> Path:
        digest = hashlib.sha256("\x1f".join(key).encode("utf-8")).hexdigest()
        return self.cache_dir / f"{digest}.json"

    def _cache_load(self, key: Tuple[str, ...]) -> Optional[ExecutionResult]:
        path = self._cache_path(key)
        try:
            doc = json.loads(path.read_text("utf-8"))
        except (OSError, json.JSONDecodeError):
            return None
        try:
            return ExecutionResult(
                subset=tuple(doc["subset"]),
                outcome=Outcome(doc["outcome"]),
                coverage=frozenset(
                    StatementId(r["file"], r["line"], r.get("function"))
                    for r in doc["coverage"]
                ),
                wall_time=float(doc["wall_time"]),
            )
        except (KeyError, ValueError):
            log.warning("discarding corrupt cache entry %s", path)
            return None

    def _cache_store(self, key: Tuple[str, ...], result: ExecutionResult) -> None:
        path = self._cache_path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp.{os.getpid()}")
        tmp.write_text(json.dumps(result.to_json_dict(), sort_keys=True), "utf-8")
        os.replace(tmp, path)

    def clear_cache(self) -> None:
        with self._lock:
            self._mem.clear()
        if self.cache_dir.exists():
            shutil.rmtree(self.cache_dir)


def clear_cache_dir(cache_dir) -> int:
    """Remove every cached record under ``cache_dir``; returns entries removed."""
    root = Path(cache_dir)
    if not root.exists():
        return 0
    removed = len(list(root.rglob("*.json")))
    shutil.rmtree(root)
    return removed
