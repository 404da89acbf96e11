"""Batch evaluation over a bug dataset.

Loads a manifest of bug configs with ground truth, runs each requested
(strategy, scorer) pair per bug, matches ranked reports against the
ground truth, and reduces to Top-n / MFR / MAR / runtime metrics plus an
intersection partition of which strategy combinations isolate which bugs.
"""

from __future__ import annotations

import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .driver import load_driver
from .errors import BugStepsError, GranularityMismatch, InvalidConfig, UnevenCoverage
from .isolate import run_strategy, verify_baseline
from .scoring import RankedReport, report_for
from .util import derive_seed, fingerprint

TOP_NS = (1, 3, 5, 10)


@dataclass(frozen=True)
class DatasetBug:
    bug_id: str
    config: Path
    ground_truth_files: Tuple[str, ...]
    ground_truth_functions: Optional[Tuple[str, ...]]
    tags: Tuple[str, ...] = ()

    def truth_units(self, granularity: str) -> Tuple[str, ...]:
        if granularity == "file":
            return self.ground_truth_files
        if granularity == "function":
            if not self.ground_truth_functions:
                raise GranularityMismatch(
                    f"bug {self.bug_id} has no function-level ground truth"
                )
            return self.ground_truth_functions
        raise ValueError(f"unknown granularity {granularity!r}")


@dataclass
class EvalRow:
    bug_id: str
    strategy: str
    scorer: str
    granularity: str
    first_rank: Optional[float]
    all_ranks: List[float]
    probe_count: int
    wall_time: float
    fallback: bool
    unranked: bool
    report_length: int
    repeats: int = 1
    error: Optional[str] = None

    def to_json_dict(self):
        return {
            "bug_id": self.bug_id,
            "strategy": self.strategy,
            "scorer": self.scorer,
            "granularity": self.granularity,
            "first_rank": self.first_rank,
            "all_ranks": self.all_ranks,
            "probe_count": self.probe_count,
            "wall_time": round(self.wall_time, 9),
            "fallback": self.fallback,
            "unranked": self.unranked,
            "report_length": self.report_length,
            "repeats": self.repeats,
            "error": self.error,
        }


def load_manifest(path) -> List[DatasetBug]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot read manifest {path}: {exc}") from exc
    bugs_doc = doc.get("bugs")
    if not isinstance(bugs_doc, list) or not bugs_doc:
        raise InvalidConfig(f"manifest {path} has no bugs")
    bugs = []
    seen = set()
    for rec in bugs_doc:
        bug_id = rec["bug_id"]
        if bug_id in seen:
            raise InvalidConfig(f"duplicate bug id {bug_id!r} in manifest")
        seen.add(bug_id)
        config = Path(rec["config"])
        if not config.is_absolute():
            config = path.parent / config
        if not config.exists():
            raise InvalidConfig(f"bug {bug_id}: config {config} does not exist")
        truth = rec.get("ground_truth", {})
        functions = truth.get("functions")
        bugs.append(
            DatasetBug(
                bug_id=bug_id,
                config=config,
                ground_truth_files=tuple(truth.get("files", [])),
                ground_truth_functions=tuple(functions) if functions else None,
                tags=tuple(rec.get("tags", [])),
            )
        )
    return bugs


def match_ground_truth(report: RankedReport,
                       truth_units: Sequence[str]) -> Tuple[int, List[int], bool]:
    """Rank every ground-truth unit in the report.

    Units absent from the report get the sentinel rank ``len(rows) + 1``;
    the returned flag says whether any unit was actually ranked.
    """
    if not truth_units:
        raise ValueError("ground truth is empty")
    sentinel = len(report.rows) + 1
    ranks = []
    any_ranked = False
    for unit in truth_units:
        rank = report.rank_of(unit)
        if rank is None:
            ranks.append(sentinel)
        else:
            ranks.append(rank)
            any_ranked = True
    return min(ranks), sorted(ranks), any_ranked


def evaluate_bug(bug: DatasetBug, strategy: str, scorer: str, granularity: str,
                 seed: int = 0, repeat: int = 1, jobs: int = 1,
                 cache_dir=None, driver=None) -> EvalRow:
    truth = bug.truth_units(granularity)
    if driver is None:
        driver = load_driver(bug.config, cache_dir=cache_dir)
    sequence = driver.enumerate_steps()
    verify_baseline(driver, sequence)
    runs = repeat if strategy == "rand" and repeat > 1 else 1
    firsts: List[int] = []
    per_unit: Dict[str, List[int]] = {u: [] for u in truth}
    probe_total = 0
    wall_total = 0.0
    fallback_votes = 0
    unranked_votes = 0
    report_len = 0
    for i in range(runs):
        sub_seed = derive_seed(seed, f"rand:{i}") if runs > 1 else seed
        isolation = run_strategy(strategy, driver, sequence, seed=sub_seed, jobs=jobs)
        report = report_for(isolation, scorer, granularity)
        first, _, any_ranked = match_ground_truth(report, truth)
        firsts.append(first)
        sentinel = len(report.rows) + 1
        for unit in truth:
            rank = report.rank_of(unit)
            per_unit[unit].append(rank if rank is not None else sentinel)
        probe_total += isolation.probe_count
        wall_total += isolation.wall_time
        fallback_votes += 1 if isolation.fallback else 0
        unranked_votes += 0 if any_ranked else 1
        report_len = max(report_len, len(report.rows))
    first_rank = float(statistics.median(firsts))
    all_ranks = sorted(float(statistics.median(v)) for v in per_unit.values())
    return EvalRow(
        bug_id=bug.bug_id,
        strategy=strategy,
        scorer=scorer,
        granularity=granularity,
        first_rank=first_rank,
        all_ranks=all_ranks,
        probe_count=probe_total,
        wall_time=wall_total,
        fallback=fallback_votes * 2 > runs,
        unranked=unranked_votes * 2 > runs,
        report_length=report_len,
        repeats=runs,
    )


def compute_metrics(rows: Sequence[EvalRow]) -> Dict[str, object]:
    if not rows:
        raise ValueError("cannot compute metrics over zero rows")
    firsts = [r.first_rank for r in rows]
    walls = [r.wall_time for r in rows]
    out: Dict[str, object] = {"bugs": len(rows)}
    for n in TOP_NS:
        out[f"top{n}"] = sum(1 for f in firsts if f <= n)
    out["mfr"] = sum(firsts) / len(firsts)
    out["mar"] = sum(
        sum(r.all_ranks) / len(r.all_ranks) for r in rows
    ) / len(rows)
    out["runtime"] = {
        "avg": sum(walls) / len(walls),
        "min": min(walls),
        "max": max(walls),
    }
    return out


def intersection_report(rows_by_strategy: Dict[str, Sequence[EvalRow]],
                        n: int) -> Dict[str, int]:
    """Partition bugs isolated at Top-n by the exact strategy subset."""
    bug_sets = {
        label: {r.bug_id for r in rows} for label, rows in rows_by_strategy.items()
    }
    reference = None
    for label, ids in bug_sets.items():
        if reference is None:
            reference = ids
        elif ids != reference:
            raise UnevenCoverage(
                f"strategy {label!r} evaluated a different bug set"
            )
    isolated = {
        label: {r.bug_id for r in rows if r.first_rank is not None and r.first_rank <= n}
        for label, rows in rows_by_strategy.items()
    }
    counts: Dict[str, int] = {}
    for bug_id in sorted(reference or ()):
        subset = tuple(sorted(label for label, ids in isolated.items() if bug_id in ids))
        if not subset:
            continue
        key = "+".join(subset)
        counts[key] = counts.get(key, 0) + 1
    return counts


def evaluate_manifest(manifest_path, strategies: Sequence[str],
                      scorers: Sequence[str], granularity: str = "file",
                      seed: int = 0, repeat: int = 1, jobs: int = 1,
                      cache_dir=None) -> Dict[str, object]:
    bugs = load_manifest(manifest_path)
    rows: List[EvalRow] = []
    errors: List[Dict[str, str]] = []

    def eval_one(bug: DatasetBug) -> Tuple[List[EvalRow], List[Dict[str, str]]]:
        bug_rows: List[EvalRow] = []
        bug_errors: List[Dict[str, str]] = []
        try:
            driver = load_driver(bug.config, cache_dir=cache_dir)
        except BugStepsError as exc:
            for strategy in strategies:
                for scorer in scorers:
                    bug_errors.append(
                        {"bug_id": bug.bug_id, "strategy": strategy,
                         "scorer": scorer, "error": str(exc)}
                    )
            return bug_rows, bug_errors
        for strategy in strategies:
            for scorer in scorers:
                try:
                    bug_rows.append(
                        evaluate_bug(
                            bug, strategy, scorer, granularity,
                            seed=seed, repeat=repeat, driver=driver,
                        )
                    )
                except BugStepsError as exc:
                    bug_errors.append(
                        {"bug_id": bug.bug_id, "strategy": strategy,
                         "scorer": scorer, "error": str(exc)}
                    )
        return bug_rows, bug_errors

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(eval_one, bugs))
    else:
        results = [eval_one(bug) for bug in bugs]
    for bug_rows, bug_errors in results:
        rows.extend(bug_rows)
        errors.extend(bug_errors)

    by_combo: Dict[str, List[EvalRow]] = {}
    for row in rows:
        by_combo.setdefault(f"{row.strategy}+{row.scorer}", []).append(row)
    metrics = {label: compute_metrics(combo_rows) for label, combo_rows in by_combo.items()}
    complete_combos = {
        label: combo_rows
        for label, combo_rows in by_combo.items()
        if {r.bug_id for r in combo_rows} == {b.bug_id for b in bugs}
    }
    intersections = {}
    if complete_combos:
        for n in (1, 5):
            intersections[f"top{n}"] = intersection_report(complete_combos, n)
    doc = {
        "provenance": {
            "tool_version": __version__,
            "manifest": str(manifest_path),
            "manifest_fingerprint": fingerprint(
                [b.bug_id for b in bugs] + [str(b.config) for b in bugs]
            ),
            "strategies": list(strategies),
            "scorers": list(scorers),
            "granularity": granularity,
            "seed": seed,
            "repeat": repeat,
            "unranked_convention": "absent ground-truth units take rank len(report)+1",
        },
        "rows": sorted(
            (r.to_json_dict() for r in rows),
            key=lambda d: (d["bug_id"], d["strategy"], d["scorer"]),
        ),
        "errors": sorted(errors, key=lambda d: (d["bug_id"], d["strategy"], d["scorer"])),
        "metrics": metrics,
        "intersections": intersections,
    }
    return doc


def render_metrics_table(metrics: Dict[str, Dict[str, object]]) -> str:
    header = (
        f"{'approach':<18} {'Top1':>5} {'Top3':>5} {'Top5':>5} {'Top10':>6} "
        f"{'MFR':>9} {'MAR':>9} {'Avg(s)':>9} {'Min(s)':>9} {'Max(s)':>9}"
    )
    lines = [header, "-" * len(header)]
    for label in sorted(metrics):
        m = metrics[label]
        rt = m["runtime"]
        lines.append(
            f"{label:<18} {m['top1']:>5} {m['top3']:>5} {m['top5']:>5} "
            f"{m['top10']:>6} {m['mfr']:>9.2f} {m['mar']:>9.2f} "
            f"{rt['avg']:>9.2f} {rt['min']:>9.2f} {rt['max']:>9.2f}"
        )
    return "\n".join(lines) + "\n"
