import numpy as np
import pytest

import oracle
from conftest import to_oracle
from steergame.game import potential
from steergame.verify import (
    MUTATIONS,
    PropertyResult,
    check_ascent,
    check_concavity_points,
    check_exact_potential,
    check_gradient,
    grid_maximize,
    random_instance,
    run_suite,
)


def test_random_instance_is_seeded_and_valid():
    a = random_instance(np.random.default_rng([0, 3]))
    b = random_instance(np.random.default_rng([0, 3]))
    assert np.array_equal(a.joint_alloc(), b.joint_alloc())
    assert len(a.dl_slices) == len(a.ul_slices) == 5
    assert a.ntn.capacity_estimate != a.fib.capacity_estimate


@pytest.mark.parametrize("seed", range(3))
def test_grid_maximize_matches_brute_force(seed):
    state = random_instance(np.random.default_rng([4, seed]), 1, 1, demand_range=(20, 80))
    arg, best = grid_maximize(state, resolution=40)
    g = to_oracle(state)
    grid = np.linspace(0, 1, 41)
    values = [[oracle.game_value(g, [x], [y], "potential") for y in grid] for x in grid]
    assert best == pytest.approx(float(np.max(values)), abs=1e-9)
    assert potential(state.with_joint_alloc(arg)) == pytest.approx(best, abs=1e-9)


def test_checks_pass_on_small_budgets():
    for result in (
        check_exact_potential(pairs=50, seed=1),
        check_gradient(points=20, seed=1),
        check_concavity_points(points=5, seed=1),
        check_ascent(instances=5, seed=1),
    ):
        assert result.passed, result.line()
        assert result.failing_instance is None


def test_gradient_mutation_is_caught_with_reproducer():
    result = check_gradient(points=10, seed=2, gradient=MUTATIONS["gradient-sign"])
    assert not result.passed
    assert result.failing_instance == 0
    assert "reproduce: seed 2, instance 0" in result.line()


def test_run_suite_validation():
    with pytest.raises(ValueError):
        run_suite("medium")
    with pytest.raises(ValueError):
        run_suite("fast", mutation="flip")


def test_result_line_format():
    r = PropertyResult("x", True, "fine", elapsed=0.5)
    assert r.line() == "PASS x: fine [0.50s]"
