"""Acceptance criteria 1-15, one pass/fail line each.

The suite runs once per session; each criterion is then asserted on its own.
Run directly (python tests/test_acceptance.py) for just the table.
"""

import sys

import pytest

from qlightning.acceptance import CRITERIA, run_all

NUMBERS = [c[0] for c in CRITERIA] + [15]


@pytest.fixture(scope="session")
def results(request):
    tr = request.config.pluginmanager.getplugin("terminalreporter")

    def echo(line):
        if tr is not None:
            tr.write_line(line)
        else:
            print(line)

    if tr is not None:
        tr.write_line("")
        tr.section("acceptance criteria", sep="-")
    return {r.number: r for r in run_all(echo=echo)}


@pytest.mark.parametrize("number", NUMBERS, ids=[f"criterion_{n:02d}" for n in NUMBERS])
def test_criterion(results, number):
    r = results[number]
    assert r.passed, r.line()


if __name__ == "__main__":
    res = run_all(echo=print)
    sys.exit(0 if all(r.passed for r in res) else 1)
