"""OVRP and ASP instance types, generators, evaluators and JSON loaders."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np


class InstanceError(ValueError):
    """Raised when an instance or a candidate solution is malformed."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_square_symmetric(name: str, m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InstanceError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InstanceError(f"{name} has non-finite entries")
    if not np.allclose(m, m.T, rtol=0, atol=1e-12):
        raise InstanceError(f"{name} is not symmetric")
    if np.any(np.diag(m) != 0):
        raise InstanceError(f"{name} must have a zero diagonal")
    if np.any(m < 0):
        raise InstanceError(f"{name} has negative entries")


@dataclass(frozen=True, eq=False)
class OvrpInstance:
    """Open VRP with stop limits and a homogeneous fleet.

    Node 0 is the depot, nodes ``1..n_nodes-1`` are customers. When
    ``n_vehicles`` is omitted the minimal fleet ``ceil(customers / maxstop)``
    is used.
    """

    distance: np.ndarray
    cost_per_dist: float = 1.0
    cost_per_stop: float = 0.0
    cost_fixed: float = 0.0
    maxstop: int = 3
    n_vehicles: int | None = None

    def __post_init__(self) -> None:
        d = _frozen(self.distance)
        _check_square_symmetric("distance", d)
        if d.shape[0] < 1:
            raise InstanceError("need at least the depot node")
        if self.maxstop < 1:
            raise InstanceError("maxstop must be positive")
        for name in ("cost_per_dist", "cost_per_stop", "cost_fixed"):
            if getattr(self, name) < 0:
                raise InstanceError(f"{name} must be nonnegative")
        needed = math.ceil((d.shape[0] - 1) / self.maxstop)
        k = max(needed, 1) if self.n_vehicles is None else int(self.n_vehicles)
        if k < max(needed, 1):
            raise InstanceError(f"n_vehicles={k} cannot serve all customers (need >= {max(needed, 1)})")
        object.__setattr__(self, "distance", d)
        object.__setattr__(self, "n_vehicles", k)

    @property
    def n_nodes(self) -> int:
        return self.distance.shape[0]

    @property
    def n_customers(self) -> int:
        return self.n_nodes - 1

    def to_dict(self) -> dict:
        return {
            "distance": self.distance.tolist(),
            "cost_per_dist": self.cost_per_dist,
            "cost_per_stop": self.cost_per_stop,
            "cost_fixed": self.cost_fixed,
            "maxstop": self.maxstop,
            "n_vehicles": self.n_vehicles,
        }


@dataclass(frozen=True, eq=False)
class AspInstance:
    """Affinity-based slotting: materials to aisles with capacities."""

    affinity: np.ndarray
    aisle_capacities: tuple[int, ...]

    def __post_init__(self) -> None:
        s = _frozen(self.affinity)
        _check_square_symmetric("affinity", s)
        caps = tuple(int(c) for c in self.aisle_capacities)
        if not caps or any(c < 1 for c in caps):
            raise InstanceError("aisle capacities must be positive integers")
        if sum(caps) < s.shape[0]:
            raise InstanceError(f"total capacity {sum(caps)} < {s.shape[0]} materials")
        object.__setattr__(self, "affinity", s)
        object.__setattr__(self, "aisle_capacities", caps)

    @property
    def n_materials(self) -> int:
        return self.affinity.shape[0]

    @property
    def n_aisles(self) -> int:
        return len(self.aisle_capacities)

    def to_dict(self) -> dict:
        return {"affinity": self.affinity.tolist(), "aisle_capacities": list(self.aisle_capacities)}


@dataclass(frozen=True)
class OrderLog:
    """Sequence of orders; each order is a set of material identifiers.

    ``materials`` fixes the row order of the affinity matrix. It defaults to
    the sorted identifiers seen in the orders.
    """

    orders: tuple[frozenset, ...]
    materials: tuple[Hashable, ...] = ()

    def __post_init__(self) -> None:
        orders = tuple(frozenset(o) for o in self.orders)
        object.__setattr__(self, "orders", orders)
        if not self.materials:
            seen = set().union(*orders) if orders else set()
            object.__setattr__(self, "materials", tuple(sorted(seen, key=repr)))


@dataclass(frozen=True)
class RouteSolution:
    """Open routes; each route lists customers in visiting order after the depot."""

    routes: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "routes", tuple(tuple(int(c) for c in r) for r in self.routes))


@dataclass(frozen=True)
class SlottingSolution:
    """``assignment[m]`` is the aisle index of material ``m``."""

    assignment: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "assignment", tuple(int(a) for a in self.assignment))


def jaccard_affinity(log: OrderLog) -> np.ndarray:
    """Jaccard co-order affinity ``O_mn / (d_m + d_n - O_mn)`` with a zero diagonal."""
    index = {m: i for i, m in enumerate(log.materials)}
    n = len(index)
    together = np.zeros((n, n))
    count = np.zeros(n)
    for order in log.orders:
        ids = sorted(index[m] for m in order if m in index)
        for i in ids:
            count[i] += 1
        for i, j in combinations(ids, 2):
            together[i, j] += 1
            together[j, i] += 1
    sigma = np.zeros((n, n))
    for i, j in combinations(range(n), 2):
        denom = count[i] + count[j] - together[i, j]
        if denom <= 0:
            raise InstanceError(
                f"degenerate pair ({log.materials[i]!r}, {log.materials[j]!r}): "
                "neither material appears in any order"
            )
        sigma[i, j] = sigma[j, i] = together[i, j] / denom
    return sigma


def validate_routes(inst: OvrpInstance, sol: RouteSolution) -> list[str]:
    """Return human-readable problems with ``sol``; empty means valid."""
    problems = []
    visits = Counter(c for r in sol.routes for c in r)
    customers = range(1, inst.n_nodes)
    missed = [c for c in customers if visits[c] == 0]
    twice = sorted(c for c, k in visits.items() if k > 1)
    unknown = sorted(c for c in visits if not 1 <= c < inst.n_nodes)
    if missed:
        problems.append(f"customers never visited: {missed}")
    if twice:
        problems.append(f"customers visited more than once: {twice}")
    if unknown:
        problems.append(f"unknown nodes in routes: {unknown}")
    for i, r in enumerate(sol.routes):
        if len(r) > inst.maxstop:
            problems.append(f"route {i} has {len(r)} stops > maxstop {inst.maxstop}")
    used = sum(1 for r in sol.routes if r)
    if used > inst.n_vehicles:
        problems.append(f"{used} routes but only {inst.n_vehicles} vehicles")
    return problems


def evaluate_ovrp(inst: OvrpInstance, sol: RouteSolution) -> float:
    problems = validate_routes(inst, sol)
    if problems:
        raise InstanceError("; ".join(problems))
    d = inst.distance
    total = 0.0
    for route in sol.routes:
        if not route:
            continue
        prev = 0
        for c in route:
            total += inst.cost_per_dist * d[prev, c]
            prev = c
        total += inst.cost_per_stop * len(route) + inst.cost_fixed
    return float(total)


def aisle_occupancy(inst: AspInstance, sol: SlottingSolution) -> list[int]:
    occ = [0] * inst.n_aisles
    for a in sol.assignment:
        occ[a] += 1
    return occ


def evaluate_asp(inst: AspInstance, sol: SlottingSolution) -> float:
    """Cross-aisle affinity, counting both ordered pairs ``(m, n)`` and ``(n, m)``."""
    a = np.asarray(sol.assignment)
    if a.shape != (inst.n_materials,):
        raise InstanceError(f"assignment covers {a.size} of {inst.n_materials} materials")
    if np.any((a < 0) | (a >= inst.n_aisles)):
        raise InstanceError(f"aisle index out of range 0..{inst.n_aisles - 1}")
    occ = aisle_occupancy(inst, sol)
    over = {j: (o, c) for j, (o, c) in enumerate(zip(occ, inst.aisle_capacities)) if o > c}
    if over:
        report = ", ".join(f"aisle {j}: {o}/{c}" for j, (o, c) in over.items())
        raise InstanceError(f"capacity violated ({report})")
    split = a[:, None] != a[None, :]
    return float(inst.affinity[split].sum())


def equal_capacities(n_materials: int, n_aisles: int) -> tuple[int, ...]:
    if n_materials % n_aisles:
        raise InstanceError(f"{n_aisles} aisles do not split {n_materials} materials evenly")
    return (n_materials // n_aisles,) * n_aisles


def sample_order_log(
    rng: np.random.Generator,
    n_materials: int,
    n_orders: int,
    max_order_size: int = 4,
    n_isolated: int = 0,
) -> OrderLog:
    """Popularity-skewed order log over materials ``0..n_materials-1``.

    The last ``n_isolated`` materials are only ever ordered alone, which
    gives them an all-zero affinity row.
    """
    active = n_materials - n_isolated
    weights = 1.0 / np.arange(1, active + 1) ** 0.8
    weights /= weights.sum()
    orders: list[frozenset] = []
    for _ in range(n_orders):
        size = int(rng.integers(1, max_order_size + 1))
        size = min(size, active)
        picked = rng.choice(active, size=size, replace=False, p=weights)
        orders.append(frozenset(int(m) for m in picked))
    seen = set().union(*orders) if orders else set()
    orders.extend(frozenset([m]) for m in range(active) if m not in seen)
    orders.extend(frozenset([m]) for m in range(active, n_materials))
    return OrderLog(tuple(orders), materials=tuple(range(n_materials)))


def generate_asp(
    seed: int,
    n_materials: int,
    n_aisles: int,
    capacities: Sequence[int] | None = None,
    n_orders: int | None = None,
    n_isolated: int = 0,
) -> AspInstance:
    caps = tuple(capacities) if capacities is not None else equal_capacities(n_materials, n_aisles)
    rng = np.random.default_rng(seed)
    log = sample_order_log(rng, n_materials, n_orders or 4 * n_materials, n_isolated=n_isolated)
    return AspInstance(jaccard_affinity(log), caps)


def generate_ovrp(
    seed: int,
    n_customers: int,
    maxstop: int = 3,
    cost_per_dist: float = 1.0,
    cost_per_stop: float = 5.0,
    cost_fixed: float = 50.0,
) -> OvrpInstance:
    """Random planar customers around a depot; distances rounded to 0.01."""
    if n_customers < 1:
        raise InstanceError("need at least one customer")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, 100.0, size=(n_customers + 1, 2))
    d = np.round(np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1), 2)
    np.fill_diagonal(d, 0.0)
    return OvrpInstance(
        d,
        cost_per_dist=cost_per_dist,
        cost_per_stop=cost_per_stop,
        cost_fixed=cost_fixed,
        maxstop=maxstop,
        n_vehicles=math.ceil(n_customers / maxstop),
    )


def instance_from_dict(data: dict) -> OvrpInstance | AspInstance:
    if "affinity" in data:
        return AspInstance(np.array(data["affinity"], dtype=float), tuple(data["aisle_capacities"]))
    if "distance" in data:
        return OvrpInstance(
            np.array(data["distance"], dtype=float),
            cost_per_dist=float(data.get("cost_per_dist", 1.0)),
            cost_per_stop=float(data.get("cost_per_stop", 0.0)),
            cost_fixed=float(data.get("cost_fixed", 0.0)),
            maxstop=int(data.get("maxstop", 3)),
            n_vehicles=data.get("n_vehicles"),
        )
    raise InstanceError("instance JSON needs either 'distance' or 'affinity'")


def load_instance(path: str | Path) -> OvrpInstance | AspInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def save_instance(inst: OvrpInstance | AspInstance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(inst.to_dict(), indent=1) + "\n")


def orders_from_lists(orders: Iterable[Iterable[Hashable]]) -> OrderLog:
    return OrderLog(tuple(frozenset(o) for o in orders))
