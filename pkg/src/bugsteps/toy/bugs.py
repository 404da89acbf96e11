"""Seeded-bug catalog and scenario generation for the testbed compiler.

Every scenario pairs a program with exactly one active bug.  Scenarios are
constructed so the failure predicate is monotone in the trigger set: the
run fails iff every trigger pass is present in the executed subset.  That
property is what makes exhaustive desk-scale oracles possible, and
generation verifies the key slices of it by direct execution before a
scenario is emitted.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Sequence, Tuple

from ..errors import GenerationFailed
from ..model import Outcome, StatementId
from ..util import derive_seed
from .ir import Instr, MiniProgram, interpret, validate_program
from .passes import CANONICAL_ORDER, CATALOGS, CrashSignal, run_pipeline

KINDS = ("WrongCode", "Crash", "StaleState")

# archetype -> (kind, trigger passes, (gt pass, gt events))
_ARCHETYPE_INFO = {
    "cf_neg_fold": ("WrongCode", ("const_fold",), ("const_fold", ("fold_neg",))),
    "stale_cse_sr": ("StaleState", ("cse", "strength_reduce"),
                     ("cse", ("publish_const_fact",))),
    "cse_dup_shift": ("WrongCode", ("cse",), ("cse", ("key_shl",))),
    "dce_dead_crash": ("Crash", ("dce",), ("dce", ("guard_dead_set",))),
    "sr_pow2_off": ("WrongCode", ("strength_reduce",),
                    ("strength_reduce", ("rewrite_shl",))),
    "ic_add_zero": ("WrongCode", ("instcombine_lite",),
                    ("instcombine_lite", ("add_zero_left", "pick_operand"))),
    "ra_chain_crash": ("Crash", ("reassociate",), ("reassociate", ("chain_guard",))),
    "cf_shl_fold": ("WrongCode", ("const_fold",), ("const_fold", ("fold_shl",))),
}

ARCHETYPES = tuple(_ARCHETYPE_INFO)

_TAGS = {
    "cf_neg_fold": "CF-neg-fold",
    "stale_cse_sr": "STALE-cse-sr",
    "cse_dup_shift": "CSE-dup-shift",
    "dce_dead_crash": "DCE-dead-crash",
    "sr_pow2_off": "SR-pow2-off",
    "ic_add_zero": "IC-add-zero",
    "ra_chain_crash": "RA-chain-crash",
    "cf_shl_fold": "CF-shl-fold",
}


@dataclass(frozen=True)
class SeededBug:
    id: str
    kind: str
    archetype: str
    trigger_passes: Tuple[str, ...]
    ground_truth: FrozenSet[StatementId]
    program: MiniProgram
    expected_output: Tuple[int, ...]
    pipeline: Tuple[str, ...]

    @property
    def ground_truth_files(self) -> Tuple[str, ...]:
        return tuple(sorted({s.file for s in self.ground_truth}))

    @property
    def ground_truth_functions(self) -> Tuple[str, ...]:
        return tuple(sorted({f"{s.file}::{s.function}" for s in self.ground_truth}))

    def to_json_dict(self):
        return {
            "id": self.id,
            "kind": self.kind,
            "archetype": self.archetype,
            "trigger_passes": list(self.trigger_passes),
            "ground_truth": [
                {"file": s.file, "line": s.line, "function": s.function}
                for s in sorted(self.ground_truth, key=StatementId.sort_key)
            ],
            "program": self.program.to_json_dict(),
            "expected_output": list(self.expected_output),
            "pipeline": list(self.pipeline),
        }

    @classmethod
    def from_json_dict(cls, doc) -> "SeededBug":
        return cls(
            id=doc["id"],
            kind=doc["kind"],
            archetype=doc["archetype"],
            trigger_passes=tuple(doc["trigger_passes"]),
            ground_truth=frozenset(
                StatementId(r["file"], r["line"], r.get("function"))
                for r in doc["ground_truth"]
            ),
            program=MiniProgram.from_json_dict(doc["program"]),
            expected_output=tuple(int(v) for v in doc["expected_output"]),
            pipeline=tuple(doc["pipeline"]),
        )


class _ProgBuilder:
    def __init__(self, params: Tuple[int, ...]):
        self.params = params
        self.instrs: List[Instr] = []

    def emit(self, op, a=None, b=None, imm=None) -> int:
        self.instrs.append(Instr(op, a, b, imm))
        return len(self.params) + len(self.instrs) - 1

    def finish(self) -> MiniProgram:
        prog = MiniProgram(self.params, tuple(self.instrs))
        validate_program(prog)
        return prog


def _ground_truth(archetype: str) -> FrozenSet[StatementId]:
    _, _, (pass_name, events) = _ARCHETYPE_INFO[archetype]
    cat = CATALOGS[pass_name]
    return frozenset(cat[e] for e in events)


# Each motif returns (values usable by filler, filler op menu).


def _motif_cf_neg_fold(pb: _ProgBuilder, rng) -> Tuple[List[int], Tuple[str, ...]]:
    c = pb.emit("const", imm=rng.randrange(3, 10))
    n = pb.emit("neg", c)
    s = pb.emit("add", 0, n)
    pb.emit("output", s)
    return [0, 1, n, s], ("add", "mul", "neg", "shl", "copy")


def _motif_cf_shl_fold(pb: _ProgBuilder, rng) -> Tuple[List[int], Tuple[str, ...]]:
    c = pb.emit("const", imm=rng.randrange(2, 6))
    s = pb.emit("shl", c, imm=rng.randrange(2, 5))
    t = pb.emit("add", 0, s)
    pb.emit("output", t)
    return [0, 1, s, t], ("add", "mul", "neg", "shl", "copy")


def _motif_cse_dup_shift(pb: _ProgBuilder, rng) -> Tuple[List[int], Tuple[str, ...]]:
    k1 = rng.randrange(1, 5)
    k2 = rng.choice([k for k in range(1, 6) if k != k1])
    s1 = pb.emit("shl", 0, imm=k1)
    s2 = pb.emit("shl", 0, imm=k2)
    u = pb.emit("add", s1, s2)
    pb.emit("output", u)
    return [0, 1, s1, s2, u], ("add", "mul", "neg", "copy")


def _motif_dce_dead_crash(pb: _ProgBuilder, rng) -> Tuple[List[int], Tuple[str, ...]]:
    pb.emit("mul", 0, 0)  # intentionally dead
    live = pb.emit("add", 0, 1)
    pb.emit("output", live)
    return [0, 1, live], ("add", "mul", "neg", "shl", "copy")


def _motif_ra_chain_crash(pb: _ProgBuilder, rng) -> Tuple[List[int], Tuple[str, ...]]:
    a1 = pb.emit("add", 0, 1)
    a2 = pb.emit("add", a1, 0)
    pb.emit("output", a2)
    return [0, 1, a2], ("add", "mul", "neg", "shl", "copy")


def _motif_sr_pow2_off(pb: _ProgBuilder, rng) -> Tuple[List[int], Tuple[str, ...]]:
    m = rng.randrange(3, 6)
    c = pb.emit("const", imm=1 << m)
    v = pb.emit("mul", 0, c)
    pb.emit("output", v)
    return [0, 1, v], ("add", "mul", "neg", "shl", "copy")


def _motif_ic_add_zero(pb: _ProgBuilder, rng) -> Tuple[List[int], Tuple[str, ...]]:
    z = pb.emit("const", imm=0)
    a = pb.emit("add", z, 0)
    pb.emit("output", a)
    return [0, 1, a], ("add", "mul", "neg", "shl", "copy")


def _motif_stale_cse_sr(pb: _ProgBuilder, rng) -> Tuple[List[int], Tuple[str, ...]]:
    # Duplicate pair whose merge shifts every later index by one, then a
    # power-of-two constant immediately before an odd constant: the stale
    # table entry for the power of two lands on the odd constant's
    # compacted index, which the multiply below consumes.
    d1 = pb.emit("add", 0, 1)
    d2 = pb.emit("add", 0, 1)
    c_pow = pb.emit("const", imm=1 << rng.randrange(3, 6))
    c_true = pb.emit("const", imm=rng.choice([3, 5, 7, 9, 11]))
    m = pb.emit("mul", d1, c_true)
    pb.emit("output", m)
    pb.emit("output", d2)
    pb.emit("output", c_pow)
    # No adds in the filler so reassociate stays a no-op, and every value
    # (including the table-poisoning constant) is routed to an output so
    # dce never compacts; the stale table must survive untouched.
    return [0, 1, d1, d2, m], ("mul", "neg", "shl", "copy")


_MOTIFS = {
    "cf_neg_fold": _motif_cf_neg_fold,
    "cf_shl_fold": _motif_cf_shl_fold,
    "cse_dup_shift": _motif_cse_dup_shift,
    "dce_dead_crash": _motif_dce_dead_crash,
    "ra_chain_crash": _motif_ra_chain_crash,
    "sr_pow2_off": _motif_sr_pow2_off,
    "ic_add_zero": _motif_ic_add_zero,
    "stale_cse_sr": _motif_stale_cse_sr,
}


def _instr_key(ins: Instr) -> tuple:
    return (ins.op, ins.a, ins.b, ins.imm)


def _add_filler(pb: _ProgBuilder, rng, count: int, pool: List[int],
                ops: Tuple[str, ...]) -> None:
    """Append a live chain of filler instructions ending in an output.

    Filler never creates constants, never references constant values, and
    never duplicates an existing instruction key, so it cannot disturb a
    motif's trigger structure.
    """
    if count <= 0:
        return
    used = {_instr_key(i) for i in pb.instrs}
    prev: Optional[int] = None
    added = []
    for _ in range(count):
        placed = False
        for _attempt in range(12):
            op = rng.choice(ops)
            a = prev if prev is not None else rng.choice(pool)
            b = rng.choice(pool) if op in ("add", "mul") else None
            imm = rng.randrange(1, 6) if op == "shl" else None
            key = (op, a, b, imm)
            if key in used:
                continue
            used.add(key)
            prev = pb.emit(op, a, b, imm)
            added.append(prev)
            placed = True
            break
        if not placed:
            break
    if added:
        pb.emit("output", added[-1])


def subset_outcome(bug: SeededBug, positions: Sequence[int],
                   tracer=None) -> Tuple[Outcome, Optional[List[int]]]:
    """Outcome of running only the pipeline steps at ``positions`` (sorted)."""
    names = [bug.pipeline[i] for i in positions]
    try:
        outs = run_pipeline(bug.program, names, bug=bug.archetype, tracer=tracer)
    except CrashSignal:
        return Outcome.FAIL_CRASH, None
    if tuple(outs) != bug.expected_output:
        return Outcome.FAIL_WRONG_OUTPUT, outs
    return Outcome.PASS, outs


def _validate_scenario(bug: SeededBug) -> bool:
    n = len(bug.pipeline)
    everything = list(range(n))
    trig = [i for i, name in enumerate(bug.pipeline) if name in bug.trigger_passes]
    if len(trig) != len(bug.trigger_passes):
        return False
    full, _ = subset_outcome(bug, everything)
    if not full.is_fail:
        return False
    if bug.kind == "Crash" and full is not Outcome.FAIL_CRASH:
        return False
    if bug.kind != "Crash" and full is not Outcome.FAIL_WRONG_OUTPUT:
        return False
    no_trig, _ = subset_outcome(bug, [i for i in everything if i not in trig])
    if no_trig is not Outcome.PASS:
        return False
    for t in trig:
        got, _ = subset_outcome(bug, [i for i in everything if i != t])
        if got is not Outcome.PASS:
            return False
    for i in everything:
        if i in trig:
            continue
        got, _ = subset_outcome(bug, [j for j in everything if j != i])
        if not got.is_fail:
            return False
    return True


def _build_scenario(archetype: str, rng: random.Random, scenario_id: str) -> SeededBug:
    kind, triggers, _ = _ARCHETYPE_INFO[archetype]
    params = (rng.randrange(2, 10), rng.randrange(2, 10))
    pb = _ProgBuilder(params)
    pool, filler_ops = _MOTIFS[archetype](pb, rng)
    _add_filler(pb, rng, rng.randrange(0, 7), pool, filler_ops)
    program = pb.finish()
    non_triggers = [p for p in CANONICAL_ORDER if p not in triggers]
    extra = sorted(rng.sample(non_triggers, rng.randrange(0, len(non_triggers) + 1)),
                   key=CANONICAL_ORDER.index)
    pipeline = tuple(CANONICAL_ORDER) + tuple(extra)
    return SeededBug(
        id=scenario_id,
        kind=kind,
        archetype=archetype,
        trigger_passes=triggers,
        ground_truth=_ground_truth(archetype),
        program=program,
        expected_output=tuple(interpret(program)),
        pipeline=pipeline,
    )


def generate_scenarios(seed: int, count: int) -> List[SeededBug]:
    """Deterministically generate ``count`` validated scenarios."""
    if count < 1:
        raise ValueError("count must be >= 1")
    out = []
    for i in range(count):
        archetype = ARCHETYPES[i % len(ARCHETYPES)]
        scenario_id = f"{_TAGS[archetype]}-{i:03d}"
        bug = None
        for attempt in range(30):
            rng = random.Random(derive_seed(seed, f"scenario:{i}:{attempt}"))
            candidate = _build_scenario(archetype, rng, scenario_id)
            if _validate_scenario(candidate):
                bug = candidate
                break
        if bug is None:
            raise GenerationFailed(
                f"could not build a valid {archetype} scenario for index {i}"
            )
        out.append(bug)
    return out
