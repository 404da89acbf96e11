"""Bug-causing step identification.

Three strategies, all built on the same driver contract:

* ``tail_prune`` -- reverse divide-and-conquer over the failing sequence.
  Chunks whose removal keeps the failure are deleted permanently, so by
  the time a step is pinned as bug-causing every deletable later step is
  already gone and its probe diff is computed against the pruned context.
* ``no_del`` -- removes each step independently from the original full
  sequence, never deleting anything (ablation baseline).
* ``rand_order`` -- visits single steps in a seeded random permutation,
  deleting or pinning as it goes (ablation baseline).
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .errors import InconsistentOracle, NotReproducible
from .model import (
    ExecutionResult,
    Outcome,
    RemovalProbe,
    StepSequence,
)

STRATEGIES = ("tail", "nodel", "rand")


@dataclass
class IsolationResult:
    strategy: str
    probes: List[RemovalProbe]          # flipped probes, original ordinal order
    final_sequence: Optional[List[str]]  # retained ids after pruning (tail only)
    probe_count: int                     # executions issued beyond the baseline
    all_runs: List[ExecutionResult]      # every distinct run observed, incl. baseline
    baseline: ExecutionResult
    fallback: bool                       # no bug-causing step was found
    uncached_count: int                  # runs that actually executed (cache misses)
    wall_time: float                     # summed driver time of distinct runs
    seed: Optional[int] = None

    @property
    def bug_causing_steps(self) -> List[str]:
        return [p.removed_step for p in self.probes]

    def to_json_dict(self):
        runs = [r.to_json_dict() for r in self.all_runs]
        index = {r.subset: i for i, r in enumerate(self.all_runs)}
        probes = []
        for p in self.probes:
            doc = p.to_json_dict()
            doc["baseline_run"] = index[p.baseline.subset]
            doc["probe_run"] = index[p.probe.subset]
            probes.append(doc)
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "bug_causing_steps": self.bug_causing_steps,
            "final_sequence": self.final_sequence,
            "probe_count": self.probe_count,
            "uncached_count": self.uncached_count,
            "fallback": self.fallback,
            "wall_time": self.wall_time,
            "probes": probes,
            "runs": runs,
        }


class _Session:
    """Bookkeeping shared by the strategies: counters, run log, oracle memo."""

    def __init__(self, driver):
        self.driver = driver
        self.issued = 0
        self.seen: Dict[Tuple[str, ...], ExecutionResult] = {}
        self.order: List[ExecutionResult] = []
        self.memo: Dict[Tuple[str, ...], Outcome] = {}

    def baseline(self, subset) -> ExecutionResult:
        return self._record(self.driver.execute(tuple(subset)))

    def probe(self, subset) -> ExecutionResult:
        self.issued += 1
        return self._record(self.driver.execute(tuple(subset)))

    def _record(self, result: ExecutionResult) -> ExecutionResult:
        known = self.memo.get(result.subset)
        if known is not None and known is not result.outcome:
            raise InconsistentOracle(
                f"subset {list(result.subset)!r} changed outcome from "
                f"{known.value} to {result.outcome.value}"
            )
        self.memo[result.subset] = result.outcome
        if result.subset not in self.seen:
            self.seen[result.subset] = result
            self.order.append(result)
        return result

    def finish(self, strategy, probes, final_sequence, baseline, seed=None) -> IsolationResult:
        probes = sorted(probes, key=lambda p: baseline.subset.index(p.removed_step))
        return IsolationResult(
            strategy=strategy,
            probes=probes,
            final_sequence=final_sequence,
            probe_count=self.issued,
            all_runs=list(self.order),
            baseline=baseline,
            fallback=not probes,
            uncached_count=len(self.order),
            wall_time=sum(r.wall_time for r in self.order),
            seed=seed,
        )


def verify_baseline(driver, sequence: StepSequence) -> ExecutionResult:
    """Run the full sequence; it must fail, else there is nothing to isolate."""
    result = driver.execute(sequence.ids)
    if not result.outcome.is_fail:
        raise NotReproducible(
            "the full step sequence passed; check the bug configuration"
        )
    return result


def tail_prune(driver, sequence: StepSequence) -> IsolationResult:
    """Reverse divide-and-conquer pruning with probe collection.

    ``classify(chunk)`` assumes every step after the chunk is already
    classified (pinned or deleted).  It first tests removal of the whole
    chunk: if the failure persists the chunk is deleted outright;
    otherwise the chunk is split and the back half is classified before
    the front half, realizing the reverse traversal.
    """
    session = _Session(driver)
    base = session.baseline(sequence.ids)
    if not base.outcome.is_fail:
        raise NotReproducible("the full step sequence passed")

    retained: List[str] = list(sequence.ids)
    retained_run = base
    probes: List[RemovalProbe] = []

    def classify(chunk: List[str]) -> None:
        nonlocal retained, retained_run
        chunk_set = set(chunk)
        subset = [s for s in retained if s not in chunk_set]
        run = session.probe(subset)
        if run.outcome.is_fail:
            retained = subset
            retained_run = run
            return
        if len(chunk) == 1:
            if not retained_run.outcome.is_fail:
                raise InconsistentOracle("retained context no longer fails")
            probes.append(RemovalProbe.from_runs(chunk[0], retained_run, run))
            return
        mid = len(chunk) // 2  # back half gets the extra element
        classify(chunk[mid:])
        classify(chunk[:mid])

    classify(list(retained))
    return session.finish("tail", probes, list(retained), base)


def no_del(driver, sequence: StepSequence, jobs: int = 1) -> IsolationResult:
    """Independent single-step removals against the original full run."""
    session = _Session(driver)
    base = session.baseline(sequence.ids)
    if not base.outcome.is_fail:
        raise NotReproducible("the full step sequence passed")
    ids = list(sequence.ids)
    subsets = [tuple(s for s in ids if s != removed) for removed in ids]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(driver.execute, subsets))
        for run in runs:
            session.issued += 1
            session._record(run)
    else:
        runs = [session.probe(sub) for sub in subsets]
    probes = [
        RemovalProbe.from_runs(removed, base, run)
        for removed, run in zip(ids, runs)
        if not run.outcome.is_fail
    ]
    return session.finish("nodel", probes, None, base)


def rand_order(driver, sequence: StepSequence, seed: int) -> IsolationResult:
    """Visit single steps in a seeded random permutation, deleting as it goes."""
    session = _Session(driver)
    base = session.baseline(sequence.ids)
    if not base.outcome.is_fail:
        raise NotReproducible("the full step sequence passed")
    order = list(sequence.ids)
    random.Random(seed).shuffle(order)
    retained = list(sequence.ids)
    retained_run = base
    probes = []
    for step in order:
        subset = [s for s in retained if s != step]
        run = session.probe(subset)
        if run.outcome.is_fail:
            retained = subset
            retained_run = run
        else:
            if not retained_run.outcome.is_fail:
                raise InconsistentOracle("retained context no longer fails")
            probes.append(RemovalProbe.from_runs(step, retained_run, run))
    return session.finish("rand", probes, None, base, seed=seed)


def run_strategy(strategy: str, driver, sequence: StepSequence,
                 seed: int = 0, jobs: int = 1) -> IsolationResult:
    if strategy == "tail":
        return tail_prune(driver, sequence)
    if strategy == "nodel":
        return no_del(driver, sequence, jobs=jobs)
    if strategy == "rand":
        return rand_order(driver, sequence, seed=seed)
    raise ValueError(f"unknown strategy {strategy!r}")
