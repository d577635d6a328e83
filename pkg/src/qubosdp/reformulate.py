"""Integer quadratic models and their penalized QUBO compilation.

The pipeline is: unconstrain (equalities and slack-extended inequalities
become squared penalty terms), binarize (bounded integers and slacks become
weighted bit sums), penalize (one global factor for every constraint).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .instances import AspInstance, OvrpInstance, RouteSolution, SlottingSolution


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    lower: int = 0
    upper: int = 1
    key: tuple = ()

    @property
    def is_binary(self) -> bool:
        return self.lower == 0 and self.upper == 1


@dataclass(frozen=True, eq=False)
class LinearConstraint:
    """``coeffs @ v == rhs`` or ``coeffs @ v <= rhs`` depending on the owning list."""

    name: str
    coeffs: np.ndarray
    rhs: int


@dataclass(eq=False)
class QuadraticModel:
    """``constant + linear @ v + v @ quadratic @ v`` over bounded integer ``v``."""

    variables: list[Variable]
    linear: np.ndarray
    quadratic: np.ndarray
    constant: float = 0.0
    eq_constraints: list[LinearConstraint] = field(default_factory=list)
    ineq_constraints: list[LinearConstraint] = field(default_factory=list)

    def __post_init__(self) -> None:
        n = len(self.variables)
        self.linear = np.asarray(self.linear, dtype=float)
        self.quadratic = np.asarray(self.quadratic, dtype=float)
        if self.linear.shape != (n,) or self.quadratic.shape != (n, n):
            raise ModelError("objective dimensions do not match the variable list")
        if not np.allclose(self.quadratic, self.quadratic.T, rtol=0, atol=1e-12):
            raise ModelError("quadratic objective matrix must be symmetric")
        for v in self.variables:
            if v.lower > v.upper:
                raise ModelError(f"empty domain for {v.name}")
        for c in self.eq_constraints + self.ineq_constraints:
            if c.coeffs.shape != (n,):
                raise ModelError(f"constraint {c.name} has wrong length")
            if int(c.rhs) != c.rhs:
                raise ModelError(f"constraint {c.name} needs an integral right-hand side")

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def index(self) -> dict[str, int]:
        return {v.name: i for i, v in enumerate(self.variables)}

    def objective(self, v: Sequence[float]) -> float:
        v = np.asarray(v, dtype=float)
        return float(self.constant + self.linear @ v + v @ self.quadratic @ v)

    def residuals(self, v: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """Equality residuals ``g - b`` and inequality excesses ``max(0, g - b)``."""
        v = np.asarray(v, dtype=float)
        eq = np.array([c.coeffs @ v - c.rhs for c in self.eq_constraints])
        ineq = np.array([max(0.0, c.coeffs @ v - c.rhs) for c in self.ineq_constraints])
        return eq, ineq

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.array([v.lower for v in self.variables], dtype=float),
            np.array([v.upper for v in self.variables], dtype=float),
        )


class BitRef(NamedTuple):
    """Where a QUBO bit comes from: a model variable or a constraint slack."""

    kind: str  # "var" or "slack"
    target: str
    weight: int


@dataclass(eq=False)
class QuboProblem:
    """``min b @ q @ b + offset`` over binary ``b``; linear terms sit on the diagonal."""

    q: np.ndarray
    offset: float = 0.0
    var_map: list[BitRef] = field(default_factory=list)
    # model-variable value = var_base + var_bits @ b (only set by to_qubo)
    var_base: np.ndarray | None = None
    var_bits: np.ndarray | None = None
    penalty: float | None = None

    def __post_init__(self) -> None:
        self.q = np.asarray(self.q, dtype=float)
        if self.q.ndim != 2 or self.q.shape[0] != self.q.shape[1]:
            raise ModelError("QUBO matrix must be square")
        if not np.allclose(self.q, self.q.T, rtol=0, atol=1e-9 * max(1.0, np.abs(self.q).max(initial=0))):
            raise ModelError("QUBO matrix must be symmetric")
        if self.var_map and len(self.var_map) != self.n:
            raise ModelError("var_map must cover every QUBO index exactly once")

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def value(self, b: Sequence[int]) -> float:
        b = np.asarray(b, dtype=float)
        return float(b @ self.q @ b + self.offset)

    def decode(self, b: Sequence[int]) -> np.ndarray:
        """Model-variable values encoded by bit vector ``b``."""
        if self.var_bits is None:
            raise ModelError("this QUBO carries no model decoding")
        return self.var_base + self.var_bits @ np.asarray(b, dtype=float)

    def slack_indices(self) -> list[int]:
        return [i for i, r in enumerate(self.var_map) if r.kind == "slack"]


@dataclass(frozen=True)
class PenaltyChoice:
    value: float
    provenance: str = "user"

    def __post_init__(self) -> None:
        if not self.value > 0:
            raise ModelError("penalty factor must be positive")


def slack_coefficients(bound: int) -> list[int]:
    """Bit weights ``1, 2, 4, ..., 2**(r-1), bound - (2**r - 1)`` with ``r = floor(log2(bound))``.

    Every integer in ``0..bound`` is a subset sum of the result.
    """
    bound = int(bound)
    if bound < 1:
        raise ModelError(f"slack bound must be >= 1, got {bound}")
    r = bound.bit_length() - 1
    return [2**s for s in range(r)] + [bound - (2**r - 1)]


def binarize_value(value: int, coeffs: Sequence[int]) -> list[int]:
    """Bits ``y`` with ``coeffs @ y == value`` for weights from :func:`slack_coefficients`."""
    value = int(value)
    *powers, last = coeffs
    if not 0 <= value <= sum(coeffs):
        raise ModelError(f"{value} not representable by {list(coeffs)}")
    top = value >= 2 ** len(powers)
    rest = value - last if top else value
    return [(rest >> s) & 1 for s in range(len(powers))] + [int(top)]


def penalty_heuristic(model: QuadraticModel, factor: float = 1.0) -> PenaltyChoice:
    """Penalty from a coarse bound on ``|objective|`` over the variable box.

    The estimate is ``|constant| + sum |linear_i| * M_i + sum |Q_ij| * M_i * M_j``
    with ``M_i = max(|lower_i|, |upper_i|)``; the factor should lie in
    ``[0.75, 1.5]``.
    """
    if not 0.75 <= factor <= 1.5:
        raise ModelError(f"penalty factor {factor} outside [0.75, 1.5]")
    lo, hi = model.bounds()
    m = np.maximum(np.abs(lo), np.abs(hi))
    estimate = abs(model.constant) + np.abs(model.linear) @ m + m @ np.abs(model.quadratic) @ m
    if estimate == 0:
        return PenaltyChoice(1.0, "heuristic")
    return PenaltyChoice(float(math.ceil(factor * estimate - 1e-9)), "heuristic")


def _binarize_variables(model: QuadraticModel):
    """Map each model variable to ``base + weights @ bits``."""
    refs: list[BitRef] = []
    columns: list[tuple[int, int]] = []  # (model var index, weight)
    base = np.zeros(model.n_vars)
    for i, v in enumerate(model.variables):
        if not (math.isfinite(v.lower) and math.isfinite(v.upper)):
            raise ModelError(f"variable {v.name} is unbounded")
        base[i] = v.lower
        span = int(v.upper - v.lower)
        if span == 0:
            continue
        for w in slack_coefficients(span):
            refs.append(BitRef("var", v.name, w))
            columns.append((i, w))
    bits = np.zeros((model.n_vars, len(columns)))
    for col, (i, w) in enumerate(columns):
        bits[i, col] = w
    return refs, base, bits


def to_qubo(model: QuadraticModel, penalty: PenaltyChoice | float) -> QuboProblem:
    """Compile ``model`` into a QUBO with a single global penalty factor.

    For every bit vector ``b`` the result satisfies
    ``b @ q @ b + offset == objective(v) + lam * sum(residual**2)``
    where ``v`` is the decoded model point and residuals include slacks.
    """
    lam = penalty.value if isinstance(penalty, PenaltyChoice) else float(penalty)
    if not lam > 0:
        raise ModelError("penalty factor must be positive")
    refs, base, bits = _binarize_variables(model)
    lo, hi = model.bounds()

    # slack bits for inequalities: g(v) + s == rhs with 0 <= s <= rhs - min g
    slack_cols: list[tuple[int, int]] = []  # (ineq index, weight)
    for ci, c in enumerate(model.ineq_constraints):
        min_g = np.minimum(c.coeffs * lo, c.coeffs * hi).sum()
        bound = int(round(c.rhs - min_g))
        if bound < 0:
            raise ModelError(f"constraint {c.name} cannot be satisfied within variable bounds")
        if bound == 0:
            continue
        for w in slack_coefficients(bound):
            refs.append(BitRef("slack", c.name, w))
            slack_cols.append((ci, w))

    n_var_bits = bits.shape[1]
    n = n_var_bits + len(slack_cols)
    q = np.zeros((n, n))
    offset = 0.0

    # objective
    lin = model.linear + 2.0 * model.quadratic @ base
    q[:n_var_bits, :n_var_bits] += bits.T @ model.quadratic @ bits
    q[np.arange(n_var_bits), np.arange(n_var_bits)] += lin @ bits
    offset += model.constant + model.linear @ base + base @ model.quadratic @ base

    def add_square(w: np.ndarray, k: float) -> None:
        nonlocal offset
        # lam * (w @ b + k)**2 with b_i**2 == b_i
        q[:] += lam * np.outer(w, w)
        q[np.arange(n), np.arange(n)] += 2.0 * lam * k * w
        offset += lam * k * k

    for c in model.eq_constraints:
        w = np.zeros(n)
        w[:n_var_bits] = c.coeffs @ bits
        add_square(w, float(c.coeffs @ base - c.rhs))

    slack_by_con: dict[int, list[tuple[int, int]]] = {}
    for col, (ci, wt) in enumerate(slack_cols):
        slack_by_con.setdefault(ci, []).append((n_var_bits + col, wt))
    for ci, c in enumerate(model.ineq_constraints):
        w = np.zeros(n)
        w[:n_var_bits] = c.coeffs @ bits
        for col, wt in slack_by_con.get(ci, []):
            w[col] = wt
        add_square(w, float(c.coeffs @ base - c.rhs))

    q = (q + q.T) / 2.0
    var_bits = np.zeros((model.n_vars, n))
    var_bits[:, :n_var_bits] = bits
    return QuboProblem(q, float(offset), refs, base, var_bits, lam)


def encode_assignment(model: QuadraticModel, qubo: QuboProblem, v: Sequence[int]) -> np.ndarray:
    """Bit vector for model point ``v`` with every slack set to its exact value.

    Inequality slacks are clipped into their representable range, so an
    infeasible ``v`` still gets a valid bit vector.
    """
    v = np.asarray(v, dtype=float)
    b = np.zeros(qubo.n, dtype=int)
    positions: dict[tuple[str, str], list[int]] = {}
    for i, ref in enumerate(qubo.var_map):
        positions.setdefault((ref.kind, ref.target), []).append(i)
    for var, val in zip(model.variables, v):
        idx = positions.get(("var", var.name))
        if idx:
            coeffs = [qubo.var_map[i].weight for i in idx]
            b[idx] = binarize_value(int(round(val - var.lower)), coeffs)
    for c in model.ineq_constraints:
        idx = positions.get(("slack", c.name))
        if idx:
            coeffs = [qubo.var_map[i].weight for i in idx]
            s = int(round(c.rhs - c.coeffs @ v))
            b[idx] = binarize_value(min(max(s, 0), sum(coeffs)), coeffs)
    return b


# --- problem-specific builders ---------------------------------------------


def asp_presolve_keep(inst: AspInstance) -> list[int]:
    """Materials with at least one nonzero affinity; the rest cost nothing anywhere."""
    return [m for m in range(inst.n_materials) if np.any(inst.affinity[m] != 0)]


def build_asp_model(inst: AspInstance, presolve: bool = False) -> QuadraticModel:
    """Binary ``x[m,j]``: one aisle per material, aisle capacities as ``<=`` rows."""
    kept = asp_presolve_keep(inst) if presolve else list(range(inst.n_materials))
    k = inst.n_aisles
    variables = [Variable(f"x[{m},{j}]", 0, 1, ("x", m, j)) for m in kept for j in range(k)]
    n = len(variables)
    quad = np.zeros((n, n))
    sigma = inst.affinity[np.ix_(kept, kept)]
    cross = np.ones((k, k)) - np.eye(k)
    # variable order is (material, aisle) row-major, so the block structure is a Kronecker product
    quad[:] = np.kron(sigma, cross)
    eqs = []
    for a, m in enumerate(kept):
        row = np.zeros(n)
        row[a * k : (a + 1) * k] = 1.0
        eqs.append(LinearConstraint(f"assign[{m}]", row, 1))
    ineqs = []
    for j, cap in enumerate(inst.aisle_capacities):
        row = np.zeros(n)
        row[j::k] = 1.0
        ineqs.append(LinearConstraint(f"capacity[{j}]", row, int(cap)))
    return QuadraticModel(variables, np.zeros(n), quad, 0.0, eqs, ineqs)


def asp_assignment_vector(model: QuadraticModel, sol: SlottingSolution) -> np.ndarray:
    return np.array(
        [1.0 if sol.assignment[v.key[1]] == v.key[2] else 0.0 for v in model.variables]
    )


def asp_solution_from_assignment(
    inst: AspInstance, model: QuadraticModel, v: Sequence[float]
) -> SlottingSolution | None:
    """Decode ``x[m,j]`` values; presolved-away materials fill free slots.

    Returns ``None`` when some material is not assigned to exactly one aisle.
    """
    aisle: dict[int, list[int]] = {}
    for var, val in zip(model.variables, v):
        if round(val) == 1:
            aisle.setdefault(var.key[1], []).append(var.key[2])
    modeled = {var.key[1] for var in model.variables}
    if any(len(aisle.get(m, [])) != 1 for m in modeled):
        return None
    assignment = [-1] * inst.n_materials
    for m, js in aisle.items():
        assignment[m] = js[0]
    free = [c - sum(1 for a in assignment if a == j) for j, c in enumerate(inst.aisle_capacities)]
    for m in range(inst.n_materials):
        if assignment[m] < 0:
            j = int(np.argmax(free))
            assignment[m] = j
            free[j] -= 1
    return SlottingSolution(tuple(assignment))


def build_ovrp_model(inst: OvrpInstance, one_route_per_vehicle: bool = True) -> QuadraticModel:
    """Arc variables ``x[i,j,k]`` (``i != j``) and MTZ orders ``u[i] in [1, n]``.

    Rows: every customer entered once (eq), left at most once, per-vehicle
    flow, MTZ subtour elimination, per-vehicle stop limit. With
    ``one_route_per_vehicle`` each vehicle also leaves the depot at most once,
    which makes every feasible point a set of at most ``n_vehicles`` routes.
    """
    nodes = range(inst.n_nodes)
    customers = range(1, inst.n_nodes)
    vehicles = range(inst.n_vehicles)
    n = inst.n_customers
    variables = [
        Variable(f"x[{i},{j},{k}]", 0, 1, ("x", i, j, k))
        for k in vehicles
        for i in nodes
        for j in nodes
        if i != j
    ]
    variables += [Variable(f"u[{i}]", 1, max(n, 1), ("u", i)) for i in customers]
    idx = {v.key: t for t, v in enumerate(variables)}
    nv = len(variables)

    def row(terms) -> np.ndarray:
        r = np.zeros(nv)
        for key, coef in terms:
            r[idx[key]] += coef
        return r

    linear = np.zeros(nv)
    for v in variables:
        if v.key[0] != "x":
            continue
        _, i, j, _k = v.key
        c = inst.cost_per_dist * inst.distance[i, j]
        if j != 0:
            c += inst.cost_per_stop
        if i == 0 and j != 0:
            c += inst.cost_fixed
        linear[idx[v.key]] = c

    eqs = [
        LinearConstraint(
            f"visit[{j}]", row((("x", i, j, k), 1) for k in vehicles for i in nodes if i != j), 1
        )
        for j in customers
    ]
    ineqs = [
        LinearConstraint(
            f"leave[{i}]", row((("x", i, j, k), 1) for k in vehicles for j in customers if j != i), 1
        )
        for i in customers
    ]
    for k in vehicles:
        for j in customers:
            out = [(("x", j, i, k), 1) for i in customers if i != j]
            inn = [(("x", i, j, k), -1) for i in nodes if i != j]
            ineqs.append(LinearConstraint(f"flow[{k},{j}]", row(out + inn), 0))
    for i in customers:
        for j in customers:
            if i == j:
                continue
            terms = [(("u", i), 1), (("u", j), -1)] + [(("x", i, j, k), n) for k in vehicles]
            ineqs.append(LinearConstraint(f"mtz[{i},{j}]", row(terms), n - 1))
    for k in vehicles:
        terms = [(("x", i, j, k), 1) for i in nodes for j in customers if i != j]
        ineqs.append(LinearConstraint(f"maxstop[{k}]", row(terms), inst.maxstop))
    if one_route_per_vehicle:
        for k in vehicles:
            terms = [(("x", 0, j, k), 1) for j in customers]
            ineqs.append(LinearConstraint(f"depart[{k}]", row(terms), 1))
    return QuadraticModel(variables, linear, np.zeros((nv, nv)), 0.0, eqs, ineqs)


def ovrp_assignment_vector(inst: OvrpInstance, model: QuadraticModel, sol: RouteSolution) -> np.ndarray:
    """Model point for a route solution; route ``r`` runs on vehicle ``r``."""
    idx = {v.key: t for t, v in enumerate(model.variables)}
    v = np.zeros(model.n_vars)
    for k, route in enumerate(r for r in sol.routes if r):
        prev = 0
        for pos, c in enumerate(route, start=1):
            v[idx[("x", prev, c, k)]] = 1
            v[idx[("u", c)]] = pos
            prev = c
    # unvisited u entries stay at their lower bound
    for var in model.variables:
        if var.key[0] == "u" and v[idx[var.key]] == 0:
            v[idx[var.key]] = var.lower
    return v


def ovrp_solution_from_assignment(
    inst: OvrpInstance, model: QuadraticModel, v: Sequence[float]
) -> RouteSolution | None:
    """Follow arcs from the depot per vehicle; ``None`` if arcs do not form open paths."""
    nxt: dict[tuple[int, int], list[int]] = {}
    for var, val in zip(model.variables, v):
        if var.key[0] == "x" and round(val) == 1:
            _, i, j, k = var.key
            if j != 0:
                nxt.setdefault((k, i), []).append(j)
    routes = []
    seen: set[int] = set()
    for k in range(inst.n_vehicles):
        for start in nxt.get((k, 0), []):
            route, cur = [], start
            while cur is not None:
                if cur in seen:
                    return None
                seen.add(cur)
                route.append(cur)
                succ = nxt.get((k, cur), [])
                if len(succ) > 1:
                    return None
                cur = succ[0] if succ else None
            routes.append(tuple(route))
    if seen != set(range(1, inst.n_nodes)):
        return None
    return RouteSolution(tuple(routes))


# --- QUBO text format --------------------------------------------------------


def write_qubo(qubo: QuboProblem, path: str | Path) -> None:
    """Sparse upper triangle: header ``n offset`` then ``i j value`` (0-based, ``i <= j``).

    Off-diagonal values are stored once as ``q_ij + q_ji``.
    """
    lines = [f"{qubo.n} {qubo.offset!r}"]
    q = qubo.q
    for i in range(qubo.n):
        for j in range(i, qubo.n):
            val = q[i, i] if i == j else q[i, j] + q[j, i]
            if val != 0:
                lines.append(f"{i} {j} {float(val)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_qubo(path: str | Path) -> QuboProblem:
    rows = Path(path).read_text().split("\n")
    head = rows[0].split()
    n, offset = int(head[0]), float(head[1])
    q = np.zeros((n, n))
    for line in rows[1:]:
        if not line.strip():
            continue
        i, j, val = line.split()
        i, j, val = int(i), int(j), float(val)
        if i == j:
            q[i, i] = val
        else:
            q[i, j] = q[j, i] = val / 2.0
    return QuboProblem(q, offset)
