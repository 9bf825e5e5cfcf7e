"""Full-size acceptance criteria, one test each.

Each test prints a single PASS/FAIL line with its measured numbers; the
tolerances are the constants pinned in ``eablock.acceptance``.
"""

import pytest

from eablock import acceptance
from eablock.acceptance import run_criterion


def test_pinned_tolerances():
    assert acceptance.DP_TOL == 1e-10
    assert acceptance.BALANCE_TOL == 1e-12
    assert acceptance.TV_LIMIT == 0.02
    assert acceptance.COMPARISON_SLACK == -1e-9
    assert acceptance.IDENTITY_TOL == 1e-12
    assert acceptance.UNIQUENESS_WINDOW == (0.97, 1.0)


@pytest.mark.parametrize("number", list(acceptance.CRITERIA))
def test_criterion(number, capsys):
    res = run_criterion(number)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.summary
