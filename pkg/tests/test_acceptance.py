"""The twelve acceptance criteria at their stated tolerances and time budgets.

Each criterion prints one PASS/FAIL line (run with ``-s`` or ``-v`` to see
them in the terminal; they are always written to the captured output).
"""
import math

import pytest

from qtheta.acceptance import CRITERIA, CriterionResult, run_criterion


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    result = run_criterion(number)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()


def test_there_are_twelve_criteria():
    assert sorted(CRITERIA) == list(range(1, 13))


class TestCriterionResult:
    def test_nan_component_fails(self):
        r = CriterionResult(0, "t", {"a": (1e-20, 1e-10), "b": (math.nan, 1e-10)}, 0.0, 1.0)
        assert not r.passed
        assert r.worst[0] == "b"

    def test_time_budget_is_part_of_pass(self):
        r = CriterionResult(0, "t", {"a": (1e-20, 1e-10)}, 2.0, 1.0)
        assert not r.passed and r.line().startswith("FAIL")

    def test_worst_is_relative_to_tolerance(self):
        r = CriterionResult(0, "t", {"a": (1e-3, 1e-1), "b": (1e-9, 1e-8)}, 0.0, 1.0)
        assert r.worst[0] == "b" and r.passed
