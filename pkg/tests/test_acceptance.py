"""The acceptance battery A1-A8, one test per criterion.

Each test prints a single PASS/FAIL line with the measured values.
"""

import pytest

from altphillips import acceptance


@pytest.mark.parametrize("name", list(acceptance.CRITERIA))
def test_criterion(name, capsys):
    res = acceptance.run(name, seed=0)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
