"""One test per acceptance criterion; each prints its pass/fail line."""
import pytest

from blowup.acceptance import CRITERIA

ACCEPTANCE_LINES = []


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"{k:02d}-{fn.__name__}" for k, fn in enumerate(CRITERIA, 1)])
def test_criterion(criterion):
    res = criterion()
    line = res.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert res.passed, line
