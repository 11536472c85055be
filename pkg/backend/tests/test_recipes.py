"""Reproduction recipes and their checks"""
import math

import pytest

from cutofflab.core.errors import UsageError
from cutofflab.schemas.bounds import Side, TailRecord
from cutofflab.schemas.run_config import Command, Recipe, RunConfig
from cutofflab.services.recipes import (
    NO_BOUND,
    Check,
    _bound_check,
    _informative,
    _tail_records,
    corollary1,
)


def _config(recipe, **fields):
    return RunConfig(command=Command.REPRODUCE, recipe=recipe, **fields)


def test_check_lines():
    assert Check("a", True, "x").line("theorem2") == "PASS theorem2/a: x"
    assert Check("b", False).line("theorem2") == "FAIL theorem2/b"
    assert Check("c", False, status=NO_BOUND).line("theorem1b").startswith("NOBOUND theorem1b/c")


def test_vacuous_tail_bound_is_never_a_pass():
    for bound in (1.0, 3.7, float("nan")):
        check = _bound_check("upper_bound_n50", 0.2, 0.25, bound, "trivial")
        assert not check.passed
        assert check.status == NO_BOUND
    check = _bound_check("upper_bound_n5000", 0.01, 0.02, 0.3, "avatar")
    assert check.passed and check.status is None
    check = _bound_check("upper_bound_n5000", 0.5, 0.52, 0.3, "avatar")
    assert not check.passed and check.status is None


def test_tail_bound_needs_curvature_above_third():
    record = TailRecord(side=Side.PLUS, span=1.0, min_second=-0.4, max_second=0.1, cubic_integral=1.0)
    assert math.isnan(_informative(record, 5.0))
    record = TailRecord(side=Side.PLUS, span=1.0, min_second=-0.1, max_second=0.1, cubic_integral=1e-4)
    assert _informative(record, 5.0) < 1.0


def test_tail_records_switch_to_avatars_above_the_window():
    config = _config(Recipe.THEOREM1B)
    _, _, source = _tail_records(config, 50)
    assert source == "trivial"
    upper, lower, source = _tail_records(config, 10_000)
    assert source == "avatar"
    assert (upper.side, lower.side) == (Side.PLUS, Side.MINUS)


def test_corollary1_needs_enough_paths_for_ks():
    with pytest.raises(UsageError):
        corollary1(_config(Recipe.COROLLARY1, n=30, paths=100))
