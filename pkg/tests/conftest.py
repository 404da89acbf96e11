import pytest

from bugsteps.model import (
    ExecutionResult,
    Outcome,
    StatementId,
    Step,
    StepSequence,
)


class FakeDriver:
    """Predicate-driven in-memory driver for isolation-engine tests.

    Fails whenever ``failure_predicate(retained id set)`` is true; each
    step covers three synthetic statements of its own virtual file, so
    probe diffs are exactly the removed/changed steps' statements.
    """

    def __init__(self, step_ids, failure_predicate, cache=True, outcome_sequence=None):
        self.ids = list(step_ids)
        self.predicate = failure_predicate
        self.fingerprint = "fake:" + ",".join(self.ids)
        self._cache = {} if cache else None
        self._outcomes = list(outcome_sequence) if outcome_sequence else None
        self.execute_calls = 0
        self.process_runs = 0
        self.trace = []  # every issued subset, in order

    def enumerate_steps(self):
        return StepSequence(
            tuple(Step(id=s, display_name=s, ordinal=i) for i, s in enumerate(self.ids))
        )

    def coverage_for(self, subset):
        cov = set()
        for sid in subset:
            for line in (1, 2, 3):
                cov.add(StatementId(f"steps/{sid}.c", line, f"fn_{sid}"))
        return frozenset(cov)

    def execute(self, subset):
        key = tuple(subset)
        self.execute_calls += 1
        self.trace.append(key)
        if self._cache is not None and key in self._cache:
            return self._cache[key]
        self.process_runs += 1
        if self._outcomes is not None:
            outcome = self._outcomes.pop(0)
        else:
            outcome = (
                Outcome.FAIL_WRONG_OUTPUT
                if self.predicate(set(key))
                else Outcome.PASS
            )
        result = ExecutionResult(
            subset=key,
            outcome=outcome,
            coverage=self.coverage_for(key),
            wall_time=0.001,
        )
        if self._cache is not None:
            self._cache[key] = result
        return result


@pytest.fixture
def fake_driver_factory():
    return FakeDriver


@pytest.fixture(scope="session")
def testbed30():
    """The fixed 30-scenario suite (seed 42) used by quantitative checks."""
    from bugsteps.toy import generate_scenarios

    return generate_scenarios(42, 30)


@pytest.fixture(scope="session")
def testbed100():
    """100 scenarios for the exhaustive property checks."""
    from bugsteps.toy import generate_scenarios

    return generate_scenarios(1001, 100)
