"""QUBO <-> Ising conversion with a pinned auxiliary spin ``x0 = +1``."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .reformulate import QuboProblem

MIN = "min"
MAX = "max"


@dataclass(frozen=True, eq=False)
class IsingProblem:
    """``x @ c @ x + offset_carry`` over ``x in {-1, 1}^(n+1)`` with ``x[0] = 1``.

    ``orientation`` says whether the value is to be minimized or maximized.
    In max orientation the value is the negated QUBO value.
    """

    c: np.ndarray
    orientation: str = MIN
    offset_carry: float = 0.0

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("Ising matrix must be square")
        if not np.allclose(c, c.T, rtol=0, atol=1e-9 * max(1.0, np.abs(c).max(initial=0))):
            raise ValueError("Ising matrix must be symmetric")
        if self.orientation not in (MIN, MAX):
            raise ValueError(f"orientation must be 'min' or 'max', got {self.orientation!r}")
        object.__setattr__(self, "c", c)

    @property
    def size(self) -> int:
        return self.c.shape[0]

    def value(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.c @ x + self.offset_carry)


def qubo_to_ising(qubo: QuboProblem) -> IsingProblem:
    """Build the ``(n+1) x (n+1)`` matrix: corner ``sum(q)/4``, border column sums ``/4``, block ``q/4``."""
    q = qubo.q
    n = q.shape[0]
    c = np.empty((n + 1, n + 1))
    c[0, 0] = q.sum() / 4.0
    c[0, 1:] = c[1:, 0] = q.sum(axis=0) / 4.0
    c[1:, 1:] = q / 4.0
    return IsingProblem(c, MIN, float(qubo.offset))


def drop_diagonal(p: IsingProblem) -> IsingProblem:
    """Move the constant ``trace(c)`` into ``offset_carry``; values are unchanged."""
    c = p.c.copy()
    tr = float(np.trace(c))
    np.fill_diagonal(c, 0.0)
    return replace(p, c=c, offset_carry=p.offset_carry + tr)


def orient_for_maximization(p: IsingProblem) -> IsingProblem:
    if p.orientation != MIN:
        raise ValueError("problem is already in max orientation")
    return IsingProblem(-p.c, MAX, -p.offset_carry)


def ising_solution_to_qubo(x: Sequence[float]) -> np.ndarray:
    """Map spins (pinned spin first) to bits via ``b = (x + 1) / 2``.

    If the pinned spin is ``-1`` the whole vector is flipped first; the
    quadratic form is invariant under that flip.
    """
    x = np.asarray(x)
    if x.ndim != 1 or x.size == 0 or not np.all(np.isin(x, (-1, 1))):
        raise ValueError("spin vector must contain only -1 and +1")
    if x[0] == -1:
        x = -x
    return ((x[1:] + 1) // 2).astype(int)


def qubo_solution_to_ising(b: Sequence[int]) -> np.ndarray:
    b = np.asarray(b, dtype=int)
    return np.concatenate(([1], 2 * b - 1))
