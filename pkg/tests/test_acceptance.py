"""End-to-end acceptance checks; a summary line per criterion is printed at the end of the run."""

import itertools
import time

import numpy as np
import pytest

from conftest import random_symmetric, tiny_asp
from qubosdp.encoding import MAX, IsingProblem, qubo_to_ising
from qubosdp.harness import RunConfig, run_pipeline
from qubosdp.hu import GATE_TIME_SECONDS, HuConfig, gibbs, hu_solve, quantum_gate_estimate
from qubosdp.instances import generate_asp, generate_ovrp
from qubosdp.lasserre import emit_sdpa, first_order_sdp, moment_matrix, parse_sdpa, second_order_sdp
from qubosdp.oracle import brute_asp, brute_ising, brute_ovrp, brute_qubo, metrics
from qubosdp.reformulate import (
    QuboProblem,
    build_asp_model,
    build_ovrp_model,
    penalty_heuristic,
    slack_coefficients,
    to_qubo,
)


@pytest.mark.criterion(1, "heuristic penalty keeps QUBO minimum equal to model optimum (50 ASP, 10 OVRP)")
def test_penalty_exactness():
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    for _ in range(50):
        inst = tiny_asp(rng)
        model = build_asp_model(inst)
        qubo = to_qubo(model, penalty_heuristic(model))
        assert qubo.n <= 12
        assert abs(brute_qubo(qubo)[0] - brute_asp(inst)[0]) <= 1e-9
    for seed in range(10):
        inst = generate_ovrp(seed, 3)
        model = build_ovrp_model(inst)
        qubo = to_qubo(model, penalty_heuristic(model))
        assert abs(brute_qubo(qubo)[0] - brute_ovrp(inst)[0]) <= 1e-9
    assert time.perf_counter() - start < 60


@pytest.mark.criterion(2, "30-material ASP with 2 idle materials compiles to 84 + 12 = 96 bits")
def test_asp30_structure():
    inst = generate_asp(1, 30, 3, n_isolated=2)
    assert inst.aisle_capacities == (10, 10, 10)
    assert int((~inst.affinity.any(axis=1)).sum()) == 2
    model = build_asp_model(inst, presolve=True)
    qubo = to_qubo(model, penalty_heuristic(model))
    kinds = [r.kind for r in qubo.var_map]
    assert (qubo.n, kinds.count("var"), kinds.count("slack")) == (96, 84, 12)
    coeffs = slack_coefficients(10)
    assert coeffs == [1, 2, 4, 3]
    sums = {int(np.dot(coeffs, bits)) for bits in itertools.product((0, 1), repeat=4)}
    assert sums == set(range(11))


def _max_rel_gap(qubo, bits):
    p = qubo_to_ising(qubo)
    xs = np.hstack([np.ones((len(bits), 1)), 2.0 * bits - 1.0])
    qv = np.einsum("ai,ij,aj->a", bits, qubo.q, bits) + qubo.offset
    iv = np.einsum("ai,ij,aj->a", xs, p.c, xs) + p.offset_carry
    return float(np.max(np.abs(qv - iv) / np.maximum(1.0, np.abs(qv))))


@pytest.mark.criterion(3, "QUBO and Ising values agree (exhaustive n<=12, 1e5 samples at n=200)")
def test_conversion_identity():
    rng = np.random.default_rng(3)
    worst = 0.0
    for n in range(1, 13):
        qubo = QuboProblem(random_symmetric(rng, n, 10.0), offset=float(rng.normal(0, 10)))
        bits = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
        worst = max(worst, _max_rel_gap(qubo, bits))
    qubo = QuboProblem(random_symmetric(rng, 200, 10.0), offset=5.0)
    for _ in range(10):
        worst = max(worst, _max_rel_gap(qubo, rng.integers(0, 2, (10_000, 200)).astype(float)))
    assert worst < 1e-9


@pytest.mark.criterion(4, "HU sandwich on 30 random Ising instances at eps 1e-2 and 1e-3, each solve < 10 s")
def test_hu_sandwich():
    rng = np.random.default_rng(4)
    instances = [random_symmetric(rng, int(rng.integers(3, 13))) for _ in range(30)]
    for eps in (1e-2, 1e-3):
        for c in instances:
            n = c.shape[0]
            best = brute_ising(IsingProblem(c, MAX))[0]
            t0 = time.perf_counter()
            res = hu_solve(c, HuConfig(epsilon=eps))
            assert time.perf_counter() - t0 < 10
            assert res.rounding_bound <= best + 1e-9
            assert best <= res.gamma_high + eps * n * res.norm


@pytest.mark.criterion(5, "two-spin swap problem brackets 2; gibbs(0) is uniform")
def test_hu_analytic():
    cfg = HuConfig(epsilon=1e-3)
    c = np.array([[0.0, 1.0], [1.0, 0.0]])
    res = hu_solve(c, cfg)
    assert res.gamma_low <= 2.0 <= res.gamma_high
    assert res.gamma_high - res.gamma_low <= cfg.bisection_tolerance * cfg.epsilon * 2 * res.norm
    for n in (1, 2, 7, 30):
        assert np.max(np.abs(gibbs(np.zeros((n, n))).rho - np.eye(n) / n)) <= 1e-12


@pytest.mark.criterion(6, "best of 200 roundings >= 0.87 x SDP bound on 20 nonnegative n=30 instances")
def test_gw_ratio():
    failures = 0
    for i in range(20):
        rng = np.random.default_rng([6, i])
        w = np.triu(rng.uniform(0, 1, (30, 30)) * (rng.uniform(size=(30, 30)) < 0.3), 1)
        w = w + w.T
        c = (np.diag(w.sum(axis=1)) - w) / 4.0
        res = hu_solve(c, HuConfig(epsilon=1e-2, n_samples=200, seed=i))
        if res.rounding_bound < 0.87 * res.sdp_bound:
            failures += 1
    assert failures <= 1


@pytest.mark.criterion(7, "relative gaps reproduce the published 0.29 and 0.13")
def test_metrics_anchor():
    a = metrics(820.08, None, 820.08 + 240.3)
    assert abs(a.delta_rel_upper - 0.29) <= 0.005
    b = metrics(246.78, 246.78 - 32.72)
    assert abs(b.delta_rel_lower - 0.13) <= 0.005


@pytest.mark.criterion(8, "gate-time model: seconds = gates x 6.5e-9, halving eps gives 32x gates")
def test_quantum_estimate():
    assert "estimate" in quantum_gate_estimate.__doc__.lower()
    for n, s, eps in [(96, 9, 1e-2), (1750, 30, 1e-3), (13, 2, 0.3)]:
        a = quantum_gate_estimate(n, s, eps)
        b = quantum_gate_estimate(n, s, eps / 2)
        assert a.seconds == a.gate_count * GATE_TIME_SECONDS
        assert b.gate_count == 32 * a.gate_count


@pytest.mark.criterion(9, "SDPA emit/parse/emit is byte-identical; moment vectors satisfy order-2 rows")
def test_sdpa_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    for k in range(20):
        n = int(rng.integers(1, 8))
        ising = IsingProblem(np.round(random_symmetric(rng, n + 1), 6), MAX)
        sdp = first_order_sdp(ising) if k % 2 == 0 else second_order_sdp(ising)
        first = emit_sdpa(sdp, tmp_path / f"{k}.dat-s")
        second = emit_sdpa(parse_sdpa(first), tmp_path / f"{k}b.dat-s")
        assert first.read_bytes() == second.read_bytes()
        if k % 2 == 1:
            for _ in range(5):
                x = np.concatenate(([1], rng.choice([-1, 1], n)))
                m = moment_matrix(x, sdp.basis)
                assert np.array_equal(sdp.constraint_values(m), sdp.rhs)


@pytest.mark.criterion(10, "result CSV bytes do not depend on the worker count")
def test_harness_determinism(tmp_path):
    grid = dict(
        instances=["asp:materials=4,aisles=2,seed=1", "asp:materials=6,aisles=3,seed=2", "ovrp:customers=3,seed=5"],
        penalties=[10, "auto"],
        epsilons=[1e-2],
        seed=42,
        record_time=False,
    )
    run_pipeline(RunConfig(**grid, workers=1, out_dir=str(tmp_path / "one")))
    run_pipeline(RunConfig(**grid, workers=3, out_dir=str(tmp_path / "three")))
    for name in ("results.csv", "results.json"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "three" / name).read_bytes()


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
