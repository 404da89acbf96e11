import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bugsteps.errors import DegenerateSpectrum, UnmappedStatement
from bugsteps.model import (
    ExecutionResult,
    Outcome,
    RemovalProbe,
    StatementId,
)
from bugsteps.scoring import (
    NO_BUG_CAUSING_STEPS,
    aggregate_ranksum,
    build_unit_index,
    compute_fallback,
    score_flip_inverse,
    score_metallaxis,
    score_ochiai,
)

TOL = 1e-9


def stmt(name, line=1, function=None):
    return StatementId(name, line, function)


def run(subset, outcome, coverage):
    return ExecutionResult(tuple(subset), outcome, frozenset(coverage), 0.0)


def probe(removed, flipped, diff, context=("x", "y")):
    baseline_cov = frozenset(diff)
    probe_cov = frozenset()
    baseline = run(context, Outcome.FAIL_WRONG_OUTPUT, baseline_cov)
    probe_run = run(
        tuple(s for s in context if s != removed),
        Outcome.PASS if flipped else Outcome.FAIL_WRONG_OUTPUT,
        probe_cov,
    )
    return RemovalProbe(
        removed_step=removed,
        context_subset=tuple(context),
        baseline=baseline,
        probe=probe_run,
        flipped=flipped,
        diff=frozenset(diff),
    )


a, b, c, d, e, z = (stmt(f"{ch}.c") for ch in "abcdez")


class TestFlipInverseScorer:
    def test_two_probe_worked_example(self):
        m1 = probe("x", True, {a, b, c, d})
        m2 = probe("y", True, {a, e}, context=("x", "y"))
        scores = score_flip_inverse([m1, m2])
        assert abs(scores[a] - 0.5) < TOL
        for s in (b, c, d):
            assert abs(scores[s] - 0.25) < TOL
        assert abs(scores[e] - 0.5) < TOL

    def test_singleton_diff_scores_one(self):
        scores = score_flip_inverse([probe("x", True, {a})])
        assert abs(scores[a] - 1.0) < TOL

    def test_unflipped_probe_ignored(self):
        scores = score_flip_inverse([probe("x", False, {z})])
        assert z not in scores
        assert scores == {}

    def test_empty_diff_flipped_probe_dropped(self):
        m = probe("x", True, {a})
        object.__setattr__(m, "diff", frozenset())
        assert score_flip_inverse([m]) == {}

    @given(st.integers(min_value=1, max_value=30))
    def test_score_bounds(self, size):
        diff = {stmt("f.c", i + 1) for i in range(size)}
        scores = score_flip_inverse([probe("x", True, diff)])
        for v in scores.values():
            assert 0 < v <= 1.0
            assert abs(v - 1.0 / size) < TOL

    def test_diff_size_monotonicity(self):
        small = probe("x", True, {a, b})
        large = probe("y", True, {c, d, e}, context=("x", "y"))
        scores = score_flip_inverse([small, large])
        assert scores[a] > scores[c]


class TestMetallaxisScorer:
    def test_all_statements_equal_score(self):
        scores = score_metallaxis([probe("x", True, {a, b, c, d})])
        assert all(abs(v - 1.0) < TOL for v in scores.values())
        assert set(scores) == {a, b, c, d}

    def test_no_flipped_probes_empty(self):
        assert score_metallaxis([probe("x", False, {a})]) == {}

    def test_max_semantics_with_mixed_probes(self):
        flipped = probe("x", True, {a})
        unflipped = probe("y", False, {a, b}, context=("x", "y"))
        scores = score_metallaxis([flipped, unflipped])
        assert abs(scores[a] - 1.0) < TOL
        assert b not in scores

    def test_orthogonal_support_with_primary(self):
        probes = [
            probe("x", True, {a, b, c}),
            probe("y", False, {d}, context=("x", "y")),
        ]
        primary = score_flip_inverse(probes)
        mbfl = score_metallaxis(probes)
        assert set(primary) == set(mbfl)


class TestOchiaiScorer:
    def test_worked_example(self):
        runs = [
            run(("s1",), Outcome.FAIL_WRONG_OUTPUT, {a, b}),
            run((), Outcome.PASS, {b}),
        ]
        scores = score_ochiai(runs)
        assert abs(scores[a] - 1.0) < TOL
        assert abs(scores[b] - 0.7071067811865475) < TOL

    def test_passing_only_statement_scores_zero(self):
        runs = [
            run(("s1",), Outcome.FAIL_CRASH, {a}),
            run((), Outcome.PASS, {b}),
        ]
        scores = score_ochiai(runs)
        assert b not in scores

    def test_two_failing_two_passing(self):
        runs = [
            run(("s1",), Outcome.FAIL_WRONG_OUTPUT, {a}),
            run(("s2",), Outcome.FAIL_WRONG_OUTPUT, {a}),
            run(("s3",), Outcome.PASS, {a}),
            run(("s4",), Outcome.PASS, {b}),
        ]
        scores = score_ochiai(runs)
        assert abs(scores[a] - 2 / math.sqrt(2 * 3)) < TOL

    def test_degenerate_spectrum(self):
        with pytest.raises(DegenerateSpectrum):
            score_ochiai([run((), Outcome.FAIL_CRASH, {a})])


class TestRankSum:
    def test_weights_closed_form(self):
        # n = 3 -> weights [3/6, 2/6, 1/6]
        scores = {stmt("f.c", 1): 0.5, stmt("f.c", 2): 0.5, stmt("f.c", 3): 0.5}
        index = build_unit_index(scores, "file")
        report = aggregate_ranksum(scores, "file", index)
        assert abs(report.rows[0].score - 0.5) < TOL  # convex combination of equals

    def test_weighted_sum_worked_example(self):
        scores = {stmt("f.c", 1): 0.5, stmt("f.c", 2): 0.25}
        report = aggregate_ranksum(scores, "file", build_unit_index(scores, "file"))
        assert abs(report.rows[0].score - (2 / 3 * 0.5 + 1 / 3 * 0.25)) < TOL
        assert abs(report.rows[0].score - 0.41666666666666663) < 1e-6

    def test_two_file_example(self):
        scores = {
            stmt("A.c", 1): 1.0,
            stmt("B.c", 1): 0.5,
            stmt("B.c", 2): 0.5,
            stmt("B.c", 3): 0.5,
        }
        report = aggregate_ranksum(scores, "file", build_unit_index(scores, "file"))
        assert [(r.unit, r.rank) for r in report.rows] == [("A.c", 1), ("B.c", 2)]
        assert abs(report.rows[0].score - 1.0) < TOL
        assert abs(report.rows[1].score - 0.5) < TOL

    def test_zero_score_statements_excluded(self):
        scores = {stmt("f.c", 1): 0.5, stmt("f.c", 2): 0.0}
        report = aggregate_ranksum(scores, "file", build_unit_index(scores, "file"))
        assert abs(report.rows[0].score - 0.5) < TOL

    def test_alternative_unit_size_switch(self):
        scores = {stmt("f.c", 1): 0.5}
        report = aggregate_ranksum(
            scores, "file", build_unit_index(scores, "file"), unit_sizes={"f.c": 2}
        )
        # n = 2: weights [2/3, 1/3]; only the first statement contributes
        assert abs(report.rows[0].score - 2 / 3 * 0.5) < TOL

    def test_function_granularity(self):
        scores = {
            stmt("f.c", 1, "alpha"): 1.0,
            stmt("f.c", 9, "beta"): 0.25,
        }
        report = aggregate_ranksum(
            scores, "function", build_unit_index(scores, "function")
        )
        assert [r.unit for r in report.rows] == ["f.c::alpha", "f.c::beta"]

    def test_unmapped_statement_raises(self):
        scores = {stmt("f.c", 1): 1.0}
        with pytest.raises(UnmappedStatement):
            aggregate_ranksum(scores, "file", {})

    def test_function_orphans_raise(self):
        with pytest.raises(UnmappedStatement) as err:
            build_unit_index({stmt("f.c", 1)}, "function")
        assert err.value.orphans == ["f.c:1"]

    def test_worst_rank_ties(self):
        scores = {stmt("A.c", 1): 0.5, stmt("B.c", 1): 0.5, stmt("C.c", 1): 0.2}
        report = aggregate_ranksum(scores, "file", build_unit_index(scores, "file"))
        by_unit = {r.unit: r.rank for r in report.rows}
        assert by_unit == {"A.c": 2, "B.c": 2, "C.c": 3}

    @settings(max_examples=50)
    @given(
        st.dictionaries(
            st.tuples(st.sampled_from(["A.c", "B.c", "C.c"]),
                      st.integers(min_value=1, max_value=30)),
            st.floats(min_value=0.001, max_value=1.0,
                      allow_nan=False, allow_infinity=False),
            min_size=1,
            max_size=20,
        ),
        st.floats(min_value=0.01, max_value=100.0),
    )
    def test_scaling_invariance_and_convexity(self, raw, scale):
        scores = {stmt(f, line): v for (f, line), v in raw.items()}
        index = build_unit_index(scores, "file")
        base = aggregate_ranksum(scores, "file", index)
        scaled = aggregate_ranksum(
            {k: v * scale for k, v in scores.items()}, "file", index
        )
        assert [r.unit for r in base.rows] == [r.unit for r in scaled.rows]
        assert [r.rank for r in base.rows] == [r.rank for r in scaled.rows]
        # convexity: unit score never exceeds its max statement score
        for row in base.rows:
            best = max(v for k, v in scores.items() if index[k] == row.unit)
            assert row.score <= best + TOL


class TestFallback:
    def test_uniform_scores_and_worst_rank(self):
        coverage = {stmt("x.c", 1), stmt("x.c", 2), stmt("y.c", 5)}
        report = compute_fallback(coverage, "file")
        assert NO_BUG_CAUSING_STEPS in report.diagnostics
        assert [r.unit for r in report.rows] == ["x.c", "y.c"]
        assert all(abs(r.score - 1 / 3) < TOL for r in report.rows)
        assert all(r.rank == 2 for r in report.rows)

    def test_empty_coverage(self):
        report = compute_fallback(set(), "file")
        assert report.rows == []
        assert NO_BUG_CAUSING_STEPS in report.diagnostics

    def test_function_granularity_skips_metadata_free_statements(self):
        coverage = {stmt("x.c", 1, "f"), stmt("x.c", 2)}
        report = compute_fallback(coverage, "function")
        assert [r.unit for r in report.rows] == ["x.c::f"]
