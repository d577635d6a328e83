import numpy as np
import pytest

from conftest import random_symmetric
from qubosdp.encoding import orient_for_maximization, qubo_to_ising
from qubosdp.hu import HuConfig, hu_solve
from qubosdp.instances import AspInstance, generate_asp
from qubosdp.oracle import brute_asp
from qubosdp.reformulate import QuboProblem, build_asp_model, penalty_heuristic, to_qubo
from qubosdp.rounding import PipelineError, bounds_to_original, gw_round, matrix_sqrt


def test_sqrt_identity():
    np.testing.assert_allclose(matrix_sqrt(np.eye(4)), np.eye(4), atol=1e-12)


def test_sqrt_rank_one():
    np.testing.assert_allclose(matrix_sqrt(np.ones((2, 2))), np.ones((2, 2)) / np.sqrt(2), atol=1e-12)


def test_sqrt_reconstructs_random_psd(rng):
    for n in (3, 8, 20):
        a = rng.normal(size=(n, n - 1))
        x = a @ a.T
        b = matrix_sqrt(x)
        assert np.allclose(b, b.T)
        np.testing.assert_allclose(b.T @ b, x, rtol=0, atol=1e-8 * np.linalg.norm(x, 2))


def test_sqrt_rejects_indefinite():
    with pytest.raises(ValueError, match="min eigenvalue"):
        matrix_sqrt(np.diag([1.0, -0.5]))


def test_round_all_ones_gives_equal_signs(rng):
    c = random_symmetric(rng, 5)
    rep = gw_round(np.ones((5, 5)), c, seed=1, n_samples=10)
    assert np.all(rep.best_vector == 1)
    assert rep.best_value == pytest.approx(c.sum())


def test_round_zero_objective():
    rep = gw_round(np.eye(4), np.zeros((4, 4)), seed=2, n_samples=5)
    assert rep.best_value == 0.0 and rep.best_vector[0] == 1


def test_round_report_consistency(rng):
    c = random_symmetric(rng, 6)
    rep = gw_round(np.eye(6), c, seed=3, n_samples=40)
    assert rep.best_value == max(rep.values)
    assert rep.best_value == pytest.approx(rep.best_vector @ c @ rep.best_vector)
    assert rep.best_vector[0] == 1
    again = gw_round(np.eye(6), c, seed=3, n_samples=40)
    assert again.values == rep.values


def test_round_prefix_is_schedule_free(rng):
    c = random_symmetric(rng, 6)
    short = gw_round(np.eye(6), c, seed=9, n_samples=10)
    long = gw_round(np.eye(6), c, seed=9, n_samples=30)
    assert long.values[:10] == short.values


def _pipeline(inst, eps=1e-2, lam=None):
    model = build_asp_model(inst)
    qubo = to_qubo(model, lam or penalty_heuristic(model))
    ising = orient_for_maximization(qubo_to_ising(qubo))
    res = hu_solve(ising.c, HuConfig(epsilon=eps))
    return model, qubo, ising, res


def test_tiny_asp_sandwich():
    inst = generate_asp(1, 4, 2)
    z, _ = brute_asp(inst)
    model, qubo, ising, res = _pipeline(inst)
    rep = bounds_to_original(res, ising, qubo, model, z)
    assert rep.lower_bound <= z + 1e-9 <= rep.upper_bound + 2e-9
    assert rep.upper_bound == pytest.approx(qubo.value(rep.extras["bits"]))
    assert rep.upper_bound == pytest.approx(-rep.extras["ising_value"])


def test_zero_problem_bounds():
    qubo = QuboProblem(np.zeros((2, 2)))
    ising = orient_for_maximization(qubo_to_ising(qubo))
    res = hu_solve(ising.c)
    rep = bounds_to_original(res, ising, qubo)
    assert rep.lower_bound == 0.0 and rep.upper_bound == 0.0


def test_infeasible_rounding_is_flagged_not_repaired():
    # tiny penalty lets the all-zero assignment win at QUBO level
    inst = AspInstance(np.array([[0, 1.0], [1.0, 0]]), (1, 1))
    model, qubo, ising, res = _pipeline(inst, lam=0.01)
    rep = bounds_to_original(res, ising, qubo, model)
    assert rep.feasible_at_model is False
    assert rep.extras["violations"]
    assert rep.upper_bound == pytest.approx(qubo.value(rep.extras["bits"]))


def test_mismatched_artifacts_raise():
    inst = generate_asp(1, 4, 2)
    model, qubo, ising, res = _pipeline(inst)
    with pytest.raises(PipelineError):
        bounds_to_original(res, qubo_to_ising(qubo), qubo, model)
    other = to_qubo(build_asp_model(generate_asp(1, 6, 2)), 10)
    with pytest.raises(PipelineError):
        bounds_to_original(res, ising, other)
