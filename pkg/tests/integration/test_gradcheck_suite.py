"""Finite-difference agreement of every differentiable block."""
import pytest

from app.nn.checks import GRADIENT_CASES, TOLERANCE, check_case, run_gradient_suite


@pytest.mark.parametrize("name", sorted(GRADIENT_CASES))
def test_twenty_seeds_within_tolerance(name):
    errors = [check_case(name, seed) for seed in range(20)]
    assert max(errors) <= TOLERANCE, f"{name}: {max(errors):.3e}"


def test_suite_reports_every_case():
    results = run_gradient_suite(seeds=1, max_checks=8)
    assert [r.name for r in results] == list(GRADIENT_CASES)
    assert all(r.passed for r in results)
    assert all(r.seeds == 1 for r in results)


def test_suite_case_filter():
    (result,) = run_gradient_suite(seeds=2, max_checks=8, names=["box_loss"])
    assert result.name == "box_loss"
    assert result.seconds >= 0
