"""Classical Hamiltonian Updates for ``max <C, X>`` s.t. ``diag(X) = 1``, ``X >= 0``.

``X`` is represented as ``n * rho`` with ``rho`` the Gibbs state of a
Hamiltonian ``H``. For a threshold ``gamma`` the feasibility loop either
finds ``H`` whose state meets both the objective threshold and the diagonal
constraint up to ``epsilon``, or decides that ``gamma`` is infeasible.
Bisection over ``gamma`` then brackets the SDP optimum.

Every Hamiltonian built here has the form ``H = -alpha * C / ||C|| + diag(d)``.
Since ``tr(H X) >= n * lambda_min(H)`` for any feasible ``X``, the current
iterate certifies the dual bound ``||C|| * (sum(d) - n * lambda_min(H)) / alpha``
on the SDP value; a threshold above it is infeasible without waiting for
the iteration cap.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

GATE_TIME_SECONDS = 6.5e-9
UPDATE_RULES = ("adaptive", "mmw")


class HuTimeout(RuntimeError):
    """The caller's deadline passed inside the feasibility loop."""


@dataclass(frozen=True)
class HuConfig:
    """Solver parameters.

    ``update`` selects the Hamiltonian step: ``"mmw"`` is the plain
    matrix-multiplicative-weights rule (fixed step, sign of the diagonal
    violation); ``"adaptive"`` scales the objective step by the violation and
    corrects the diagonal by ``log(n * rho_ii)``, which converges orders of
    magnitude faster at small ``epsilon``. ``bisection_tolerance`` is in
    units of ``epsilon * n * ||C||``.
    """

    epsilon: float = 1e-2
    step_size: float | None = None
    max_iterations: int | None = None
    bisection_tolerance: float = 1.0
    seed: int = 0
    device: str = "cpu"
    update: str = "adaptive"
    iteration_constant: float = 64.0
    n_samples: int = 100
    log_path: str | None = None

    def __post_init__(self) -> None:
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not self.bisection_tolerance > 0:
            raise ValueError("bisection_tolerance must be positive")
        if self.update not in UPDATE_RULES:
            raise ValueError(f"update must be one of {UPDATE_RULES}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def step(self) -> float:
        if self.step_size is not None:
            return self.step_size
        return self.epsilon / 4 if self.update == "mmw" else 1.0

    def iteration_cap(self, n: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        power = 2 if self.update == "mmw" else 1
        return max(1, math.ceil(self.iteration_constant * math.log(max(n, 2)) / self.epsilon**power))


@dataclass(frozen=True, eq=False)
class GibbsState:
    rho: np.ndarray
    # eigen-decomposition of the Hamiltonian, kept for the dual certificate
    eigenvalues: np.ndarray | None = None


@dataclass
class FeasibilityOutcome:
    feasible: bool
    iterations: int
    hamiltonian: np.ndarray | None = None
    rho: np.ndarray | None = None
    certified: bool = False
    dual_bound: float | None = None
    trace: list[tuple[float, float]] = field(default_factory=list)


@dataclass(frozen=True)
class GateEstimate:
    """Modelled quantum cost, not a measurement."""

    n: int
    s: int
    epsilon: float
    gate_count: float
    seconds: float
    constant_prefactor: float = 1.0
    polylog_exponent: float = 2.0


@dataclass
class HuResult:
    gamma_low: float
    gamma_high: float
    sdp_bound: float
    rounded_vector: np.ndarray
    rounding_bound: float
    iterations_total: int
    wall_time_seconds: float
    gate_estimate: GateEstimate
    certified: bool = True
    bisection_steps: int = 0
    dual_bound: float | None = None
    rho: np.ndarray | None = None
    epsilon: float = 0.0
    norm: float = 0.0


def operator_norm(c: np.ndarray) -> float:
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(c))))


def _check_symmetric(h: np.ndarray) -> None:
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix has non-finite entries")
    if not np.allclose(h, h.T, rtol=0, atol=1e-10 * max(1.0, np.abs(h).max(initial=0))):
        raise ValueError("matrix must be symmetric")


def _gibbs_eig(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(h)
    e = np.exp(-(w - w[0]))
    rho = (v * (e / e.sum())) @ v.T
    return (rho + rho.T) / 2.0, w


def gibbs(h: np.ndarray) -> GibbsState:
    """``exp(-h) / tr(exp(-h))`` via a shifted eigendecomposition."""
    h = np.asarray(h, dtype=float)
    _check_symmetric(h)
    rho, w = _gibbs_eig(h)
    return GibbsState(rho, w)


def check_feasibility(
    c: np.ndarray, gamma: float, epsilon: float, rho: np.ndarray, norm: float | None = None
) -> tuple[float, float]:
    """Objective shortfall ``max(0, gamma/n - tr(c rho)) / ||c||`` and ``sum |rho_ii - 1/n|``.

    Both must be below ``epsilon`` for ``rho`` to count as feasible.
    """
    n = c.shape[0]
    norm = operator_norm(c) if norm is None else norm
    attained = float(np.sum(c * rho))
    short = max(0.0, gamma / n - attained)
    if norm == 0:
        obj = 0.0 if short == 0 else math.inf
    else:
        obj = short / norm
    diag = float(np.abs(np.diag(rho) - 1.0 / n).sum())
    return obj, diag


def hu_feasibility(
    c: np.ndarray,
    gamma: float,
    config: HuConfig,
    norm: float | None = None,
    deadline: float | None = None,
    on_iteration: Callable[[dict], None] | None = None,
) -> FeasibilityOutcome:
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    norm = operator_norm(c) if norm is None else norm
    eps = config.epsilon
    if norm == 0:
        rho = np.eye(n) / n
        if gamma <= 0:
            return FeasibilityOutcome(True, 1, np.zeros((n, n)), rho, trace=[(0.0, 0.0)])
        return FeasibilityOutcome(False, 1, certified=True, dual_bound=0.0)

    ct = c / norm
    alpha = 0.0
    d = np.zeros(n)
    step = config.step()
    cap = config.iteration_cap(n)
    trace: list[tuple[float, float]] = []
    best_dual = math.inf
    for it in range(1, cap + 1):
        if deadline is not None and time.monotonic() > deadline:
            raise HuTimeout(f"deadline passed at iteration {it} (gamma={gamma})")
        h = -alpha * ct + np.diag(d)
        rho, w = _gibbs_eig(h)
        obj, diag = check_feasibility(c, gamma, eps, rho, norm)
        trace.append((obj, diag))
        if on_iteration is not None:
            on_iteration({"iteration": it, "gamma": gamma, "objective_violation": obj, "diagonal_violation": diag})
        if obj < eps and diag < eps:
            return FeasibilityOutcome(True, it, h, rho, trace=trace, dual_bound=best_dual if alpha > 0 else None)
        if alpha > 0:
            best_dual = min(best_dual, norm * (d.sum() - n * w[0]) / alpha)
            if best_dual < gamma:
                return FeasibilityOutcome(False, it, h, rho, True, best_dual, trace)
        dev = np.diag(rho) - 1.0 / n
        if config.update == "mmw":
            if obj >= eps:
                alpha += step
            if diag >= eps:
                d += step * np.sign(dev)
        else:
            if obj >= eps:
                alpha += step * n * obj
            d += step * np.log(np.maximum(n * np.diag(rho), 1e-300))
    return FeasibilityOutcome(False, cap, None, None, False, best_dual if alpha > 0 else None, trace)


def quantum_gate_estimate(
    n: int,
    s: int,
    epsilon: float,
    prefactor: float = 1.0,
    polylog_exponent: float = 2.0,
    gate_time: float = GATE_TIME_SECONDS,
) -> GateEstimate:
    """Model estimate ``prefactor * n**1.5 * s**0.5 * eps**-5 * ln(n)**polylog_exponent`` gates."""
    if n < 1 or s < 1:
        raise ValueError("n and s must be >= 1")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    inv = 1.0 / epsilon
    polylog = math.log(n) ** polylog_exponent if n > 1 else 1.0
    gates = prefactor * n**1.5 * math.sqrt(s) * polylog * (inv * inv * inv * inv * inv)
    return GateEstimate(n, s, epsilon, gates, gates * gate_time, prefactor, polylog_exponent)


def max_row_nonzeros(c: np.ndarray) -> int:
    return int(max(1, np.count_nonzero(c, axis=1).max(initial=0)))


def hu_solve(c: np.ndarray, config: HuConfig | None = None, deadline: float | None = None) -> HuResult:
    """Bisection over ``gamma in [-n||c||, n||c||]`` followed by randomized rounding."""
    from .rounding import gw_round

    config = config or HuConfig()
    c = np.asarray(c, dtype=float)
    _check_symmetric(c)
    t0 = time.perf_counter()
    n = c.shape[0]
    norm = operator_norm(c)
    gates = quantum_gate_estimate(n, max_row_nonzeros(c), config.epsilon)

    log_file = open(config.log_path, "a") if config.log_path else None

    def log(rec: dict) -> None:
        rec["elapsed"] = round(time.perf_counter() - t0, 6)
        log_file.write(json.dumps(rec) + "\n")

    try:
        lo, hi = -n * norm, n * norm
        rho_best = np.eye(n) / n
        iterations = 0
        steps = 0
        certified = True
        dual = None
        tol = config.bisection_tolerance * config.epsilon * n * norm
        while hi - lo > tol:
            gamma = 0.5 * (lo + hi)
            out = hu_feasibility(c, gamma, config, norm, deadline, log if log_file else None)
            iterations += out.iterations
            steps += 1
            if out.dual_bound is not None and math.isfinite(out.dual_bound):
                dual = out.dual_bound if dual is None else min(dual, out.dual_bound)
            if out.feasible:
                obj, diag = check_feasibility(c, gamma, config.epsilon, out.rho, norm)
                if not (obj < config.epsilon and diag < config.epsilon):
                    raise AssertionError("feasible verdict failed re-verification")
                lo, rho_best = gamma, out.rho
            else:
                hi = gamma
                certified = certified and out.certified
    finally:
        if log_file:
            log_file.close()

    rounding = gw_round(n * rho_best, c, config.seed, config.n_samples)
    return HuResult(
        gamma_low=lo,
        gamma_high=hi,
        sdp_bound=hi,
        rounded_vector=rounding.best_vector,
        rounding_bound=rounding.best_value,
        iterations_total=iterations,
        wall_time_seconds=time.perf_counter() - t0,
        gate_estimate=gates,
        certified=certified,
        bisection_steps=steps,
        dual_bound=dual,
        rho=rho_best,
        epsilon=config.epsilon,
        norm=norm,
    )
