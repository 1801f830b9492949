"""Acceptance criteria 1 to 11, one test each, at their stated tolerances.

Each test prints the criterion's one-line pass/fail summary (visible with
``pytest -s`` or ``-rA``).  Run this file directly to print all eleven lines
without pytest.
"""

import sys

import pytest

from snbumps.acceptance import CRITERIA, Context


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(ctx, number):
    res = CRITERIA[number](ctx)
    print(res.line())
    assert res.passed, res.line()


if __name__ == "__main__":
    shared = Context(seed=0)
    failed = 0
    for n in sorted(CRITERIA):
        res = CRITERIA[n](shared)
        print(res.line(), flush=True)
        failed += not res.passed
    sys.exit(1 if failed else 0)
