"""The eleven acceptance criteria at their stated tolerances.

The suite runs once per module (about two minutes); each test reports one
criterion and prints its pass/fail line.
"""
import pytest

from s1avg.acceptance import CRITERIA, run_acceptance

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def results():
    return {r.number: r for r in run_acceptance(seed=0)}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(results, number, capsys):
    r = results[number]
    with capsys.disabled():
        print("\n" + r.line())
    assert r.passed, r.values
