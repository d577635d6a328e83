"""Goemans-Williamson rounding and mapping of HU bounds back to model units."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .encoding import MAX, IsingProblem, ising_solution_to_qubo
from .oracle import BoundReport, metrics, validate_solution
from .reformulate import QuadraticModel, QuboProblem

if TYPE_CHECKING:
    from .hu import HuResult


class PipelineError(ValueError):
    """Pipeline artifacts do not fit together."""


@dataclass
class RoundingReport:
    best_vector: np.ndarray
    best_value: float
    n_samples: int
    seed: int
    values: list[float] = field(default_factory=list)


def matrix_sqrt(x: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Symmetric PSD square root; eigenvalues above ``-tol * ||x||`` are clipped to zero."""
    x = np.asarray(x, dtype=float)
    w, v = np.linalg.eigh((x + x.T) / 2.0)
    scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
    if w.size and w[0] < -tol * scale:
        raise ValueError(f"matrix is indefinite (min eigenvalue {w[0]:.3e})")
    r = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return (r + r.T) / 2.0


def _sign(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1, -1)


def gw_round(x_star: np.ndarray, c: np.ndarray, seed: int = 0, n_samples: int = 100, keep_values: bool = True) -> RoundingReport:
    """Best of ``n_samples`` hyperplane roundings for ``max x @ c @ x``.

    Sample ``i`` draws its Gaussian vector from a generator seeded with
    ``(seed, i)``. Spins are flipped so that the pinned spin 0 is ``+1``.
    """
    b = matrix_sqrt(x_star, tol=1e-8)
    c = np.asarray(c, dtype=float)
    best_x, best_v = None, -np.inf
    values = []
    for i in range(n_samples):
        g = np.random.default_rng([seed, i]).standard_normal(b.shape[0])
        x = _sign(g @ b)
        if x[0] < 0:
            x = -x
        val = float(x @ c @ x)
        values.append(val)
        if val > best_v:
            best_x, best_v = x, val
    return RoundingReport(best_x, best_v, n_samples, seed, values if keep_values else [])


def bounds_to_original(
    hu: "HuResult",
    ising: IsingProblem,
    qubo: QuboProblem,
    model: QuadraticModel | None = None,
    z_star: float | None = None,
    method: str = "HU",
) -> BoundReport:
    """Lower bound ``Z_HU`` and rounded upper bound in QUBO / model units.

    ``ising`` must be the max-oriented problem that was handed to the solver.
    """
    if ising.orientation != MAX:
        raise PipelineError("expected the max-oriented Ising problem that HU solved")
    if ising.size != qubo.n + 1:
        raise PipelineError(f"Ising size {ising.size} does not match QUBO size {qubo.n} + 1")
    x = np.asarray(hu.rounded_vector)
    if x.shape != (ising.size,):
        raise PipelineError("rounded vector does not match the Ising size")
    if model is not None and qubo.var_bits is not None and qubo.var_bits.shape[0] != model.n_vars:
        raise PipelineError("QUBO decoding does not match the model")

    # max-form value = -(QUBO value); bounds swap roles under negation
    lower = -(hu.sdp_bound + ising.offset_carry)
    b = ising_solution_to_qubo(x)
    upper = qubo.value(b)
    rep = metrics(z_star, lower, upper, method=method, wall_time_seconds=hu.wall_time_seconds)
    rep.extras["bits"] = b
    rep.extras["ising_value"] = ising.value(x)
    if model is not None and qubo.var_bits is not None:
        v = qubo.decode(b)
        violations = validate_solution(model, v)
        rep.feasible_at_model = not violations
        rep.extras["assignment"] = v
        rep.extras["violations"] = violations
        rep.extras["model_objective"] = model.objective(v)
    return rep
