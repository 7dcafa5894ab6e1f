"""The twelve acceptance criteria at their stated tolerances.

Each result line is printed in the terminal summary (see conftest.py).
"""

import pytest

from nematic_interface import verify

RESULTS = []


@pytest.mark.parametrize("criterion", verify.CRITERIA, ids=lambda c: f"{c.number:02d}_{c.key}")
def test_criterion(criterion):
    res = verify.run_criterion(criterion)
    RESULTS.append(res)
    print(res.line())
    assert res.passed, res.line()
