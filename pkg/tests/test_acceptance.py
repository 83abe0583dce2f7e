"""The acceptance suite: one test per criterion, each printing its verdict line."""

import pytest

from parabolab.acceptance import CRITERIA, VerifyContext, run_criterion

CTX = VerifyContext(resolution=129, seed=0)


@pytest.mark.parametrize("number", [c[0] for c in CRITERIA], ids=[f"c{c[0]:02d}" for c in CRITERIA])
def test_criterion(number, capsys):
    res = run_criterion(number, CTX)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.ok, res.details
    assert res.within_budget, f"{res.runtime:.1f}s over the {res.budget:.0f}s budget"
