import json
import math

import pytest

from betaconv.dist import make_exponential, make_uniform
from betaconv.errors import ParameterError
from betaconv.verify import GROUPS, Check, report_json, run_suite, survival_identity_residual


@pytest.fixture(scope="module")
def suite():
    return run_suite()


def test_every_group_runs_and_passes(suite):
    assert {c.group for c in suite} == set(GROUPS)
    failed = [(c.group, c.name, c.residual, c.tol) for c in suite if not c.passed]
    assert not failed


# the slower groups are exercised through the full-suite fixture
@pytest.mark.parametrize("group", ["semigroup", "continuity", "commutation", "survival-identity", "williamson"])
def test_groups_can_be_selected(group):
    checks = run_suite([group])
    assert checks and {c.group for c in checks} == {group}


def test_override_only_loosens(suite):
    loose = run_suite(["survival-identity"], tol=1e-3)
    stated = {c.name: c.tol for c in suite if c.group == "survival-identity"}
    assert all(c.tol == max(stated[c.name], 1e-3) for c in loose)
    tight = run_suite(["survival-identity"], tol=0.0)
    assert all(c.tol == stated[c.name] for c in tight)


def test_bad_selections():
    with pytest.raises(ParameterError):
        run_suite(["nope"])
    with pytest.raises(ParameterError):
        run_suite(["continuity"], tol=-1.0)
    with pytest.raises(ParameterError):
        run_suite(["continuity"], tol=math.inf)


def test_check_pass_flag():
    assert Check("g", "n", 1e-9, 1e-8).passed
    assert not Check("g", "n", 1e-7, 1e-8).passed
    assert not Check("g", "n", math.nan, 1.0).passed


def test_report_json_shape():
    body = json.loads(report_json([Check("g", "a", 0.0, 1.0), Check("g", "b", 2.0, 1.0)]))
    assert body["passed"] is False
    assert body["checks"][1] == {"group": "g", "name": "b", "residual": 2.0, "tol": 1.0, "passed": False}


@pytest.mark.parametrize("H", [make_exponential(1.0), make_uniform()], ids=lambda H: H.name)
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_survival_identity_holds_with_matching_weight(H, beta):
    assert survival_identity_residual(H, beta, 0.4) <= 1e-8


def test_survival_identity_fails_with_shifted_weight():
    # one extra power of y in the weight changes the left side by O(1)
    assert survival_identity_residual(make_exponential(1.0), 0.5, 0.5, weight_exponent=0.5) > 0.1
