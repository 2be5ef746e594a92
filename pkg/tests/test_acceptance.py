"""The acceptance battery, one test per criterion.

Each criterion's PASS/FAIL line is printed in the "acceptance criteria"
section of the terminal summary.
"""

import json
from fractions import Fraction

import pytest

from diamond_gmc import acceptance, cli, operator_y


@pytest.mark.parametrize("fn", acceptance.CRITERIA, ids=lambda f: f.__name__)
def test_criterion(fn, acceptance_log):
    res = fn(True)
    line = res.line()
    acceptance_log(line)
    print(line)
    assert not res.skipped
    assert res.passed, line


def test_fast_suite_emits_every_id():
    recs = acceptance.verify_suite("fast")
    assert [r.id for r in recs] == list(range(1, 19))


def test_fast_suite_exact_criteria_pass():
    failing = [r.line() for r in acceptance.verify_suite("fast") if not r.skipped and not r.passed]
    assert not failing, "\n".join(failing)


def test_mutation_hs_constant_is_caught(monkeypatch):
    good = acceptance.crit_03_second_moment_limit()
    assert good.passed
    monkeypatch.setattr(operator_y, "hs_limit_squared", lambda params: Fraction(4) + Fraction(1, 10**6))
    assert not acceptance.crit_03_second_moment_limit().passed


def test_verify_command_reports_records(capsys):
    code = cli.main(["verify", "--suite", "fast"])
    recs = json.loads(capsys.readouterr().out)
    assert [r["id"] for r in recs] == [f"criterion.{i}" for i in range(1, 19)]
    assert code == (0 if all(r["values"]["passed"] for r in recs) else 3)


def test_bad_suite_level():
    with pytest.raises(ValueError):
        acceptance.verify_suite("medium")
