import json
from dataclasses import replace

import numpy as np
import pytest

from accretion import harness
from accretion.constitutive import MaterialParams
from accretion.harness import (
    CONSTITUTIVE_CHECKS,
    DEFAULT_SEED,
    VerificationReport,
    analytic_disk_error,
    random_speed_continuous,
    verify_hypotheses,
)


@pytest.fixture(scope="module")
def hyp():
    return verify_hypotheses()


def test_hypotheses_all_pass(hyp):
    assert hyp.passed, hyp.to_text()
    assert hyp.seed == DEFAULT_SEED
    # one negative control per property check
    assert len(hyp.checks) == 2 * len(CONSTITUTIVE_CHECKS)


def test_controls_cover_every_check(hyp):
    names = {c.name for c in hyp.checks}
    for n in CONSTITUTIVE_CHECKS:
        assert n in names and f"control.{n}" in names


def test_hypotheses_deterministic(hyp):
    again = verify_hypotheses()
    assert [c.value for c in again.checks] == [c.value for c in hyp.checks]
    other = verify_hypotheses(seed=1)
    assert other.seed == 1 and other.passed


@pytest.mark.parametrize(
    "kw, failing",
    [
        (dict(q=3.0), {"H6.determinant_exponent"}),
        (dict(delta=1.5), {"h.range"}),
    ],
)
def test_corrupted_parameter_fails_only_its_check(kw, failing):
    rep = verify_hypotheses(replace(MaterialParams(), **kw), controls=False)
    assert {c.name for c in rep.failures} == failing


def test_report_serialisation(hyp):
    d = json.loads(hyp.to_json())
    assert d["seed"] == DEFAULT_SEED and d["passed"]
    assert d["n_checks"] == len(hyp.checks) and d["n_failed"] == 0
    assert set(d["checks"]["H6.determinant_exponent"]) == {"passed", "value", "tolerance", "kind", "detail"}
    text = hyp.to_text()
    assert text.splitlines()[-1] == "ALL PASS"
    assert f"seed {DEFAULT_SEED}" in text.splitlines()[0]


def test_report_rejects_duplicates_and_merges():
    a = VerificationReport("a", 0)
    a.add("x", True, 1.0, 2.0, "numeric")
    with pytest.raises(ValueError, match="duplicate"):
        a.add("x", True, 1.0, 2.0, "numeric")
    b = VerificationReport("b", 0)
    b.add("y", False, np.nan, 0.0, "identity", "broken")
    a.merge(b)
    assert not a.passed and [c.name for c in a.failures] == ["y"]
    assert a["y"].detail == "broken"
    assert json.loads(a.to_json())["checks"]["y"]["value"] == "nan"
    assert "FAILED: y" in a.to_text()


def test_analytic_disk_error_shrinks():
    e = [analytic_disk_error(n) for n in (33, 65, 129)]
    assert e[0] > e[1] > e[2]
    assert e[2] <= 2 / 128


def test_continuous_speed_in_bounds(rng):
    f = random_speed_continuous(rng, 0.5, 1.0)
    x = rng.uniform(0, 1, size=(1000, 2))
    v = f(x)
    assert v.min() >= 0.5 and v.max() <= 1.0


@pytest.mark.slow
def test_equilibrium_suite():
    rep = harness.verify_equilibrium()
    assert rep.passed, rep.to_text()
