"""Order-1 and order-2 moment relaxations in +-1 variables, with SDPA I/O.

Monomials are squarefree because ``x_i**2 = 1``; a monomial is the sorted
tuple of its variable indices (``()`` is the constant 1). Variable indices
``1..n`` refer to the free spins of an Ising problem whose spin 0 is pinned
to ``+1`` and plays the role of the constant monomial.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .encoding import MAX, IsingProblem
from .hu import HuConfig, HuResult, hu_solve

DEFAULT_MAX_DIMENSION = 600

Entries = dict[tuple[int, int], float]


class SdpSizeError(ValueError):
    pass


def monomial_basis(n: int, order: int) -> list[tuple[int, ...]]:
    """Squarefree monomials of degree <= ``order`` in ``x_1..x_n``, by degree then lexicographically."""
    if order not in (1, 2):
        raise ValueError("only orders 1 and 2 are supported")
    basis: list[tuple[int, ...]] = [()]
    for deg in range(1, order + 1):
        basis.extend(combinations(range(1, n + 1), deg))
    return basis


def basis_size(n: int, order: int) -> int:
    return 1 + n if order == 1 else 1 + n + n * (n - 1) // 2


def _product(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(sorted(set(a) ^ set(b)))


@dataclass(eq=False)
class MomentSdp:
    """``max <C, X>`` s.t. ``<A_i, X> = b_i``, ``X >= 0``; matrices kept as upper-triangle dicts.

    An off-diagonal entry ``v`` at ``(i, j)`` stands for ``v`` at both
    ``(i, j)`` and ``(j, i)``.
    """

    dimension: int
    objective: Entries
    constraints: list[tuple[Entries, float]]
    basis: list[tuple[int, ...]] = field(default_factory=list)

    @staticmethod
    def dense(entries: Entries, dim: int) -> np.ndarray:
        m = np.zeros((dim, dim))
        for (i, j), v in entries.items():
            m[i, j] = v
            m[j, i] = v
        return m

    def objective_matrix(self) -> np.ndarray:
        return self.dense(self.objective, self.dimension)

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        """``<A_i, X>`` for every constraint."""
        out = np.empty(len(self.constraints))
        for k, (entries, _) in enumerate(self.constraints):
            total = 0.0
            for (i, j), v in entries.items():
                total += v * (x[i, j] if i == j else x[i, j] + x[j, i])
            out[k] = total
        return out

    @property
    def rhs(self) -> np.ndarray:
        return np.array([b for _, b in self.constraints])


def _embed_objective(ising: IsingProblem, index: dict[tuple[int, ...], int]) -> Entries:
    c = ising.c
    size = c.shape[0]
    obj: Entries = {}

    def add(pos: tuple[int, int], v: float) -> None:
        if v != 0:
            obj[pos] = obj.get(pos, 0.0) + v

    # spin 0 is the constant monomial; c_ij and c_ji share one upper-triangle entry
    pos = [index[()]] + [index[(i,)] for i in range(1, size)]
    for i in range(size):
        for j in range(i, size):
            add((pos[i], pos[j]), c[i, j])
    return {k: v for k, v in sorted(obj.items()) if v != 0}


def first_order_sdp(ising: IsingProblem) -> MomentSdp:
    """Moment matrix over ``(1, x_1..x_n)``: objective ``C``, constraints ``X_ii = 1``."""
    if ising.orientation != MAX:
        raise ValueError("moment relaxations expect the max-oriented Ising problem")
    n = ising.size - 1
    basis = monomial_basis(n, 1)
    index = {m: k for k, m in enumerate(basis)}
    cons = [({(k, k): 1.0}, 1.0) for k in range(len(basis))]
    return MomentSdp(len(basis), _embed_objective(ising, index), cons, basis)


def second_order_sdp(ising: IsingProblem, max_dimension: int = DEFAULT_MAX_DIMENSION) -> MomentSdp:
    """Moment matrix over monomials of degree <= 2.

    Entries whose row/column product reduces to the constant are fixed to 1;
    every other entry is tied to the first entry (row-major, upper triangle)
    carrying the same reduced monomial.
    """
    if ising.orientation != MAX:
        raise ValueError("moment relaxations expect the max-oriented Ising problem")
    n = ising.size - 1
    dim = basis_size(n, 2)
    if dim > max_dimension:
        raise SdpSizeError(
            f"order-2 basis has 1 + n + n(n-1)/2 = {dim} elements for n = {n}, above the cap {max_dimension}"
        )
    basis = monomial_basis(n, 2)
    index = {m: k for k, m in enumerate(basis)}
    cons: list[tuple[Entries, float]] = []
    first: dict[tuple[int, ...], tuple[int, int]] = {}
    for i in range(dim):
        for j in range(i, dim):
            mono = _product(basis[i], basis[j])
            if not mono:
                cons.append(({(i, j): 1.0 if i == j else 0.5}, 1.0))
                continue
            rep = first.setdefault(mono, (i, j))
            if rep == (i, j):
                continue
            a = {(i, j): 1.0 if i == j else 0.5}
            a[rep] = a.get(rep, 0.0) - (1.0 if rep[0] == rep[1] else 0.5)
            cons.append((a, 0.0))
    return MomentSdp(dim, _embed_objective(ising, index), cons, basis)


def moment_matrix(x: np.ndarray, basis: list[tuple[int, ...]]) -> np.ndarray:
    """``m m^T`` for the monomial vector ``m`` of spins ``x`` (``x[0]`` is the pinned spin)."""
    x = np.asarray(x)
    m = np.array([np.prod([x[i] for i in mono]) if mono else 1 for mono in basis], dtype=np.int64)
    return np.outer(m, m)


def solve_first_order(ising: IsingProblem, config: HuConfig | None = None) -> HuResult:
    """Order-1 relaxation solved by Hamiltonian Updates on the same matrix."""
    sdp = first_order_sdp(ising)
    return hu_solve(sdp.objective_matrix(), config)


# --- SDPA sparse format --------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def sdpa_text(sdp: MomentSdp) -> str:
    out = io.StringIO()
    m = len(sdp.constraints)
    out.write(f"{m}\n1\n{sdp.dimension}\n")
    out.write(" ".join(_fmt(b) for _, b in sdp.constraints) + "\n")
    mats = [sdp.objective] + [a for a, _ in sdp.constraints]
    for matno, entries in enumerate(mats):
        for (i, j) in sorted(entries):
            v = entries[(i, j)]
            if v != 0:
                out.write(f"{matno} 1 {i + 1} {j + 1} {_fmt(v)}\n")
    return out.getvalue()


def emit_sdpa(sdp: MomentSdp, destination: str | Path) -> Path:
    """Write ``sdp`` as SDPA sparse (``.dat-s``); matrix 0 is the objective."""
    path = Path(destination)
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(sdpa_text(sdp))
    except OSError as exc:
        raise OSError(f"cannot write SDPA file {path}: {exc}") from exc
    return path


def parse_sdpa(source: str | Path) -> MomentSdp:
    """Read a single-block SDPA sparse file (as written by :func:`emit_sdpa`)."""
    text = Path(source).read_text() if isinstance(source, Path) or "\n" not in str(source) else str(source)
    lines = [ln.split("*")[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    m = int(lines[0].split()[0])
    nblocks = int(lines[1].split()[0])
    if nblocks != 1:
        raise ValueError("only single-block SDPA files are supported")
    dim = abs(int(lines[2].replace(",", " ").replace("{", " ").split()[0]))
    rhs = [float(t) for t in lines[3].replace(",", " ").replace("{", " ").replace("}", " ").split()]
    if len(rhs) != m:
        raise ValueError(f"expected {m} right-hand sides, got {len(rhs)}")
    mats: list[Entries] = [{} for _ in range(m + 1)]
    for ln in lines[4:]:
        matno, _block, i, j, v = ln.split()
        i, j = sorted((int(i) - 1, int(j) - 1))
        mats[int(matno)][(i, j)] = float(v)
    return MomentSdp(dim, mats[0], list(zip(mats[1:], rhs)))
