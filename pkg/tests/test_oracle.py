import numpy as np
import pytest

from conftest import random_symmetric, tiny_asp
from qubosdp.encoding import orient_for_maximization, qubo_to_ising
from qubosdp.instances import AspInstance, OvrpInstance, RouteSolution, generate_asp, generate_ovrp
from qubosdp.oracle import (
    OracleLimitError,
    _multinomial_count,
    brute_asp,
    brute_ising,
    brute_ovrp,
    brute_qubo,
    metrics,
    validate_solution,
)
from qubosdp.reformulate import (
    QuboProblem,
    asp_assignment_vector,
    build_asp_model,
    build_ovrp_model,
    ovrp_assignment_vector,
    penalty_heuristic,
    to_qubo,
)
from qubosdp.instances import SlottingSolution


def test_brute_qubo_zero_matrix():
    val, b = brute_qubo(QuboProblem(np.zeros((3, 3)), offset=5.0))
    assert val == 5.0 and b.shape == (3,)


def test_brute_qubo_two_by_two():
    val, b = brute_qubo(QuboProblem(np.array([[1.0, 2.0], [2.0, -1.0]])))
    assert val == -1.0 and b.tolist() == [0, 1]


@pytest.mark.parametrize("n", [3, 8, 12, 17])
def test_brute_qubo_agrees_with_brute_ising(n, rng):
    qubo = QuboProblem(random_symmetric(rng, n), offset=rng.normal())
    v, b = brute_qubo(qubo)
    w, x = brute_ising(qubo_to_ising(qubo))
    assert v == pytest.approx(w, abs=1e-9)
    assert qubo.value(b) == pytest.approx(v, abs=1e-12)


def test_brute_qubo_cap():
    with pytest.raises(OracleLimitError, match="sampling"):
        brute_qubo(QuboProblem(np.zeros((27, 27))))


def test_brute_ising_cases():
    from qubosdp.encoding import IsingProblem

    assert brute_ising(IsingProblem(np.zeros((3, 3))))[0] == 0.0
    c = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert brute_ising(IsingProblem(c))[0] == -2.0
    assert brute_ising(orient_for_maximization(IsingProblem(c)))[0] == 2.0


def test_slack_elimination_matches_plain_enumeration(rng):
    for _ in range(5):
        inst = tiny_asp(rng)
        qubo = to_qubo(build_asp_model(inst), 9.0)
        a = brute_qubo(qubo, eliminate_slack=True)
        b = brute_qubo(qubo, eliminate_slack=False)
        assert a[0] == pytest.approx(b[0], abs=1e-9)
        assert qubo.value(a[1]) == pytest.approx(a[0], abs=1e-9)


@pytest.mark.parametrize("caps, expected", [((2,), 0.0), ((1, 1), 1.0)])
def test_brute_asp_two_materials(caps, expected):
    inst = AspInstance(np.array([[0, 0.5], [0.5, 0]]), caps)
    assert brute_asp(inst)[0] == expected


def test_brute_asp_relabel_invariant(rng):
    inst = generate_asp(9, 8, 2)
    z = brute_asp(inst)[0]
    perm = rng.permutation(8)
    shuffled = AspInstance(inst.affinity[np.ix_(perm, perm)], inst.aisle_capacities)
    assert brute_asp(shuffled)[0] == pytest.approx(z, abs=1e-12)


def test_multinomial_count():
    assert _multinomial_count(4, (2, 2)) == 6
    assert _multinomial_count(30, (10, 10, 10)) == 5550996791340


def test_brute_asp_cap():
    with pytest.raises(OracleLimitError, match="5550996791340"):
        brute_asp(generate_asp(1, 30, 3))


def test_brute_asp_matches_qubo_oracle(rng):
    for _ in range(5):
        inst = tiny_asp(rng)
        model = build_asp_model(inst)
        assert brute_qubo(to_qubo(model, penalty_heuristic(model)))[0] == pytest.approx(brute_asp(inst)[0], abs=1e-9)


def test_brute_ovrp_one_customer():
    inst = OvrpInstance(np.array([[0.0, 4.0], [4.0, 0.0]]), 2.0, 1.0, 3.0, maxstop=3)
    z, sol = brute_ovrp(inst)
    assert z == 2 * 4 + 1 + 3 and sol.routes == ((1,),)


def test_brute_ovrp_maxstop_one_forces_split():
    d = np.array([[0, 10, 10], [10, 0, 1], [10, 1, 0]], dtype=float)
    z, sol = brute_ovrp(OvrpInstance(d, maxstop=1))
    assert sorted(sol.routes) == [(1,), (2,)] and z == 20


def test_brute_ovrp_respects_fleet_size():
    d = np.array([[0, 10, 10], [10, 0, 1], [10, 1, 0]], dtype=float)
    z, sol = brute_ovrp(OvrpInstance(d, maxstop=2))
    assert len(sol.routes) == 1 and z == 11


def test_brute_ovrp_matches_qubo_oracle():
    inst = generate_ovrp(2, 3)
    model = build_ovrp_model(inst)
    z, _ = brute_ovrp(inst)
    assert z == pytest.approx(220.34, abs=1e-9)
    assert brute_qubo(to_qubo(model, penalty_heuristic(model)))[0] == pytest.approx(z, abs=1e-9)


def test_brute_ovrp_cap():
    with pytest.raises(OracleLimitError):
        brute_ovrp(generate_ovrp(0, 9))


def test_validate_feasible_point_is_clean():
    inst = generate_asp(1, 4, 2)
    model = build_asp_model(inst)
    assert validate_solution(model, asp_assignment_vector(model, SlottingSolution((0, 1, 0, 1)))) == []


def test_validate_capacity_overflow():
    inst = AspInstance(np.zeros((3, 3)), (2, 2))
    model = build_asp_model(inst)
    out = validate_solution(model, asp_assignment_vector(model, SlottingSolution((0, 0, 0))))
    assert [(v.constraint, v.residual) for v in out] == [("capacity[0]", 1.0)]


def test_validate_double_visit():
    inst = generate_ovrp(1, 3)
    model = build_ovrp_model(inst)
    v = ovrp_assignment_vector(inst, model, RouteSolution(((1, 2, 3),)))
    v[model.index()["x[0,2,0]"]] = 1
    names = {x.constraint for x in validate_solution(model, v)}
    assert "visit[2]" in names


def test_validate_wrong_length():
    model = build_asp_model(AspInstance(np.zeros((2, 2)), (1, 1)))
    with pytest.raises(ValueError):
        validate_solution(model, [1, 0])


@pytest.mark.parametrize(
    "z, lower, upper, rel",
    [(820.08, None, 820.08 + 240.3, 0.293), (246.78, 246.78 - 32.72, None, 0.1326)],
)
def test_metrics_table_values(z, lower, upper, rel):
    rep = metrics(z, lower, upper)
    got = rep.delta_rel_upper if upper is not None else rep.delta_rel_lower
    assert got == pytest.approx(rel, abs=5e-4)


def test_metrics_zero_gap_and_identity():
    rep = metrics(12.5, 12.5, 14.0)
    assert rep.delta_abs_lower == 0.0
    assert rep.delta_rel_upper * 12.5 == pytest.approx(rep.delta_abs_upper, rel=1e-12)


def test_metrics_zero_optimum_flags_relative():
    rep = metrics(0.0, -1.0, 1.0)
    assert rep.relative_undefined and rep.delta_rel_lower is None and rep.delta_abs_lower == 1.0


def test_metrics_without_optimum():
    rep = metrics(None, -3.0)
    assert rep.delta_abs_lower is None and rep.lower_bound == -3.0
