"""Exhaustive ground truth and bound-gap metrics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .encoding import MAX, IsingProblem
from .instances import AspInstance, OvrpInstance, RouteSolution, SlottingSolution, evaluate_asp
from .reformulate import QuadraticModel, QuboProblem

MAX_QUBO_BITS = 26
MAX_COMPONENT_BITS = 16
MAX_ASP_ASSIGNMENTS = 10**7
MAX_OVRP_CUSTOMERS = 8
_BLOCK_BITS = 14


class OracleLimitError(ValueError):
    """Instance is too large for exhaustive enumeration."""


def _all_points(k: int, spins: bool) -> np.ndarray:
    """All ``2**k`` points of ``{0,1}^k`` (or ``{-1,1}^k``) in binary-counting order."""
    pts = ((np.arange(2**k)[:, None] >> np.arange(k)) & 1).astype(float)
    return 2.0 * pts - 1.0 if spins else pts


def _minimize_form(m: np.ndarray, h: np.ndarray, const: float, spins: bool) -> tuple[float, np.ndarray]:
    """Exact ``min z @ m @ z + 2 h @ z + const`` over ``{0,1}^n`` or ``{-1,1}^n``.

    The low bits are evaluated as one vectorized block; the high bits are
    walked in chunks so each step is a single matrix product.
    """
    n = m.shape[0]
    if n == 0:
        return float(const), np.zeros(0)
    lo = min(n, _BLOCK_BITS)
    hi = n - lo
    zl = _all_points(lo, spins)
    m_ll, m_lh, m_hh = m[:lo, :lo], m[:lo, lo:], m[lo:, lo:]
    e_low = np.einsum("ai,ij,aj->a", zl, m_ll, zl) + 2.0 * zl @ h[:lo]
    best, arg = math.inf, None
    chunk = max(1, 2 ** max(0, 20 - lo))
    for start in range(0, 2**hi, chunk):
        idx = np.arange(start, min(2**hi, start + chunk))
        zh = ((idx[:, None] >> np.arange(hi)) & 1).astype(float)
        if spins:
            zh = 2.0 * zh - 1.0
        e_high = np.einsum("ai,ij,aj->a", zh, m_hh, zh) + 2.0 * zh @ h[lo:]
        total = e_low[None, :] + e_high[:, None] + 2.0 * (zh @ m_lh.T) @ zl.T
        flat = int(np.argmin(total))
        r, c = divmod(flat, total.shape[1])
        if total[r, c] < best:
            best = float(total[r, c])
            arg = np.concatenate((zl[c], zh[r]))
    return best + const, arg


def _slack_components(qubo: QuboProblem) -> list[np.ndarray] | None:
    """Independent groups of slack bits (coupled only through non-slack bits)."""
    inner = np.array(qubo.slack_indices(), dtype=int)
    if inner.size == 0:
        return None
    block = qubo.q[np.ix_(inner, inner)] != 0
    _, labels = connected_components(block, directed=False)
    comps = [inner[labels == lab] for lab in range(labels.max() + 1)]
    if max(c.size for c in comps) > MAX_COMPONENT_BITS:
        return None
    return comps


def brute_qubo(
    qubo: QuboProblem, max_bits: int = MAX_QUBO_BITS, eliminate_slack: bool = True
) -> tuple[float, np.ndarray]:
    """Exact minimum of ``b @ q @ b + offset`` by enumeration.

    With ``eliminate_slack`` the slack bits recorded in ``var_map`` are
    minimized exactly per coupled group for every enumerated assignment of
    the remaining bits, so ``max_bits`` limits only the enumerated bits.
    """
    q = qubo.q
    n = qubo.n
    comps = _slack_components(qubo) if eliminate_slack else None
    if comps is None:
        if n > max_bits:
            raise OracleLimitError(f"{n} bits exceed the enumeration cap {max_bits}; use sampling instead")
        val, arg = _minimize_form(q, np.zeros(n), qubo.offset, spins=False)
        return val, arg.astype(int)

    inner = np.concatenate(comps)
    outer = np.setdiff1d(np.arange(n), inner)
    if outer.size > max_bits:
        raise OracleLimitError(
            f"{outer.size} non-slack bits exceed the enumeration cap {max_bits}; use sampling instead"
        )
    q_oo = q[np.ix_(outer, outer)]
    comp_data = []
    for comp in comps:
        y = _all_points(comp.size, spins=False)
        e_inner = np.einsum("ai,ij,aj->a", y, q[np.ix_(comp, comp)], y)
        comp_data.append((comp, y, e_inner, 2.0 * q[np.ix_(outer, comp)]))
    best, best_b = math.inf, None
    chunk = 2**12
    for start in range(0, 2**outer.size, chunk):
        idx = np.arange(start, min(2**outer.size, start + chunk))
        xo = ((idx[:, None] >> np.arange(outer.size)) & 1).astype(float)
        total = np.einsum("ai,ij,aj->a", xo, q_oo, xo)
        picks = []
        for comp, y, e_inner, cross in comp_data:
            e = e_inner[None, :] + (xo @ cross) @ y.T
            pick = np.argmin(e, axis=1)
            total += e[np.arange(len(idx)), pick]
            picks.append(pick)
        r = int(np.argmin(total))
        if total[r] < best:
            best = float(total[r])
            b = np.zeros(n, dtype=int)
            b[outer] = xo[r].astype(int)
            for (comp, y, _, _), pick in zip(comp_data, picks):
                b[comp] = y[pick[r]].astype(int)
            best_b = b
    return best + qubo.offset, best_b


def brute_ising(p: IsingProblem, max_spins: int = MAX_QUBO_BITS + 1) -> tuple[float, np.ndarray]:
    """Exact optimum over spins with ``x[0] = +1``, honouring the orientation."""
    size = p.size
    if size > max_spins:
        raise OracleLimitError(f"{size} spins exceed the enumeration cap {max_spins}")
    sign = -1.0 if p.orientation == MAX else 1.0
    c = sign * p.c
    if size == 0:
        return p.offset_carry, np.zeros(0, dtype=int)
    val, z = _minimize_form(c[1:, 1:], c[0, 1:], c[0, 0], spins=True)
    x = np.concatenate(([1], z)).astype(int)
    return sign * val + p.offset_carry, x


def _multinomial_count(n: int, caps: Sequence[int]) -> int:
    """Number of ways to place ``n`` labelled items into bins with the given capacities."""
    # coefficient of t^n / n! in prod_j sum_{c<=cap_j} t^c / c!
    poly = [1.0]
    for cap in caps:
        term = [1.0 / math.factorial(c) for c in range(cap + 1)]
        out = [0.0] * min(n + 1, len(poly) + cap)
        for i, a in enumerate(poly):
            for j, b in enumerate(term):
                if i + j <= n:
                    out[i + j] += a * b
        poly = out
    return round(poly[n] * math.factorial(n)) if n < len(poly) else 0


def brute_asp(inst: AspInstance, max_assignments: int = MAX_ASP_ASSIGNMENTS) -> tuple[float, SlottingSolution]:
    n, caps = inst.n_materials, inst.aisle_capacities
    count = _multinomial_count(n, caps)
    if count > max_assignments:
        raise OracleLimitError(f"{count} capacity-feasible assignments exceed the cap {max_assignments}")
    best, best_a = math.inf, None
    sigma = inst.affinity
    load = [0] * len(caps)
    a = [0] * n

    # depth-first over materials; the partial cost adds both ordered pairs
    def walk(m: int, cost: float) -> None:
        nonlocal best, best_a
        if m == n:
            if cost < best:
                best, best_a = cost, tuple(a)
            return
        for j, cap in enumerate(caps):
            if load[j] == cap:
                continue
            add = 2.0 * sum(sigma[m, p] for p in range(m) if a[p] != j)
            a[m] = j
            load[j] += 1
            walk(m + 1, cost + add)
            load[j] -= 1

    walk(0, 0.0)
    sol = SlottingSolution(best_a)
    # report the evaluator's own sum so the value is bit-identical to evaluate_asp
    return evaluate_asp(inst, sol), sol


def _route_partitions(customers: tuple[int, ...], maxstop: int, max_routes: int):
    """All sets of ordered routes covering ``customers`` (route order canonical)."""
    if not customers:
        yield ()
        return
    if max_routes == 0:
        return
    first, rest = customers[0], customers[1:]
    # the route containing the smallest remaining customer
    for size in range(0, min(maxstop, len(customers)) - 0):
        for others in itertools.combinations(rest, size):
            members = (first,) + others
            remaining = tuple(c for c in rest if c not in others)
            for perm in itertools.permutations(members):
                for tail in _route_partitions(remaining, maxstop, max_routes - 1):
                    yield (perm,) + tail


def brute_ovrp(inst: OvrpInstance, max_customers: int = MAX_OVRP_CUSTOMERS) -> tuple[float, RouteSolution]:
    """Exact optimum over partitions into at most ``n_vehicles`` open routes of length <= maxstop."""
    if inst.n_customers > max_customers:
        raise OracleLimitError(f"{inst.n_customers} customers exceed the cap {max_customers}")
    d = inst.distance
    best, best_routes = math.inf, ()
    for routes in _route_partitions(tuple(range(1, inst.n_nodes)), inst.maxstop, inst.n_vehicles):
        cost = 0.0
        for r in routes:
            cost += inst.cost_per_dist * (d[0, r[0]] + sum(d[a, b] for a, b in zip(r, r[1:])))
            cost += inst.cost_per_stop * len(r) + inst.cost_fixed
        if cost < best - 1e-12:
            best, best_routes = cost, routes
    return float(best), RouteSolution(best_routes)


@dataclass(frozen=True)
class Violation:
    constraint: str
    residual: float


def validate_solution(model: QuadraticModel, assignment: Sequence[float], tol: float = 1e-9) -> list[Violation]:
    """Violated constraints and variable bounds; an empty list means feasible."""
    v = np.asarray(assignment, dtype=float)
    if v.shape != (model.n_vars,):
        raise ValueError(f"assignment has {v.size} entries, model has {model.n_vars} variables")
    out = []
    for var, val in zip(model.variables, v):
        if val < var.lower - tol or val > var.upper + tol or abs(val - round(val)) > tol:
            out.append(Violation(f"domain {var.name}", float(val)))
    for c in model.eq_constraints:
        r = float(c.coeffs @ v - c.rhs)
        if abs(r) > tol:
            out.append(Violation(c.name, r))
    for c in model.ineq_constraints:
        r = float(c.coeffs @ v - c.rhs)
        if r > tol:
            out.append(Violation(c.name, r))
    return out


@dataclass
class BoundReport:
    """Lower/upper bounds against the optimum, with absolute and relative gaps."""

    z_star: float | None
    lower_bound: float | None
    upper_bound: float | None = None
    delta_abs_lower: float | None = None
    delta_rel_lower: float | None = None
    delta_abs_upper: float | None = None
    delta_rel_upper: float | None = None
    method: str = ""
    wall_time_seconds: float = 0.0
    feasible_at_model: bool | None = None
    relative_undefined: bool = False
    extras: dict = field(default_factory=dict)


def metrics(
    z_star: float | None,
    lower: float | None,
    upper: float | None = None,
    method: str = "",
    wall_time_seconds: float = 0.0,
) -> BoundReport:
    rep = BoundReport(z_star, lower, upper, method=method, wall_time_seconds=wall_time_seconds)
    if z_star is None:
        return rep
    if lower is not None:
        rep.delta_abs_lower = abs(lower - z_star)
    if upper is not None:
        rep.delta_abs_upper = abs(upper - z_star)
    if z_star == 0:
        rep.relative_undefined = True
        return rep
    if rep.delta_abs_lower is not None:
        rep.delta_rel_lower = rep.delta_abs_lower / abs(z_star)
    if rep.delta_abs_upper is not None:
        rep.delta_rel_upper = rep.delta_abs_upper / abs(z_star)
    return rep
