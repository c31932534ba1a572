"""Acceptance gate: every criterion at its pinned tolerance, one line each.

Run with `pytest tests/test_acceptance.py -s` to see the pass/fail lines as
they complete, or `python scripts/run_acceptance.py` for the standalone
report.
"""

import pytest

from solarpen import acceptance


@pytest.fixture(scope="module")
def ctx():
    # Shared context: criteria 6 and 11 re-examine the solver-equivalence
    # runs of criteria 1-3, so the solves are computed once.
    return acceptance.AcceptanceContext()


@pytest.mark.parametrize("criterion", acceptance.ALL_CRITERIA,
                         ids=lambda fn: fn.__name__)
def test_criterion(criterion, ctx):
    result = criterion(ctx)
    print(result.line())
    assert result.passed, result.line()
