"""Grid benchmark: instances x penalties x epsilons through the full HU pipeline."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Any, Iterable

import numpy as np

from .encoding import orient_for_maximization, qubo_to_ising
from .hu import HuConfig, HuTimeout, hu_solve
from .instances import AspInstance, OvrpInstance, generate_asp, generate_ovrp, load_instance
from .lasserre import SdpSizeError, emit_sdpa, first_order_sdp, second_order_sdp
from .oracle import OracleLimitError, brute_asp, brute_ovrp
from .reformulate import PenaltyChoice, build_asp_model, build_ovrp_model, penalty_heuristic, to_qubo
from .rounding import bounds_to_original

COLUMNS = [
    "instance", "penalty", "epsilon", "method", "z_star", "lower", "upper",
    "delta_abs_l", "delta_rel_l", "delta_abs_u", "delta_rel_u",
    "t_seconds", "t_quantum_seconds", "status", "seed",
]  # fmt: skip


@dataclass
class RunConfig:
    """Benchmark grid.

    ``instances`` holds JSON paths or generator specs such as
    ``"asp:materials=6,aisles=2,seed=1"`` or ``"ovrp:customers=3,seed=2"``.
    A penalty of ``"auto"`` uses the heuristic with factor 1.
    ``record_time=False`` leaves ``t_seconds`` blank in the result table so
    that reruns are byte-identical; wall times always go to ``timings.csv``.
    """

    instances: list[str]
    penalties: list[Any] = field(default_factory=lambda: ["auto"])
    epsilons: list[float] = field(default_factory=lambda: [1e-2])
    rounding_samples: int = 100
    time_limit: float = 600.0
    workers: int = 1
    out_dir: str = "results"
    seed: int = 0
    presolve: bool = False
    record_time: bool = True
    update: str = "adaptive"
    max_order2_dimension: int = 600

    def __post_init__(self) -> None:
        if not self.instances or not self.penalties or not self.epsilons:
            raise ValueError("instance, penalty and epsilon grids must be nonempty")
        if self.time_limit < 0:
            raise ValueError("time limit must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        return cls(**json.loads(Path(path).read_text()))


def resolve_instance(spec: str) -> tuple[str, AspInstance | OvrpInstance]:
    kind, _, args = spec.partition(":")
    if kind in ("asp", "ovrp") and not Path(spec).exists():
        kv = dict(part.split("=") for part in args.split(",") if part)
        seed = int(kv.get("seed", 0))
        if kind == "asp":
            inst = generate_asp(
                seed,
                int(kv.get("materials", 6)),
                int(kv.get("aisles", 2)),
                n_isolated=int(kv.get("isolated", 0)),
            )
        else:
            inst = generate_ovrp(seed, int(kv.get("customers", 3)), maxstop=int(kv.get("maxstop", 3)))
        return spec, inst
    return Path(spec).stem, load_instance(spec)


def build_model(inst: AspInstance | OvrpInstance, presolve: bool = False):
    if isinstance(inst, AspInstance):
        return build_asp_model(inst, presolve=presolve)
    return build_ovrp_model(inst)


def oracle_optimum(inst: AspInstance | OvrpInstance) -> float | None:
    try:
        return brute_asp(inst)[0] if isinstance(inst, AspInstance) else brute_ovrp(inst)[0]
    except OracleLimitError:
        return None


def resolve_penalty(model, penalty) -> PenaltyChoice:
    if isinstance(penalty, str) and penalty == "auto":
        return penalty_heuristic(model)
    return PenaltyChoice(float(penalty), "user")


def cell_seed(global_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([global_seed, index]).generate_state(1)[0])


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_cell(task: dict) -> dict:
    """One grid cell; never raises."""
    row = {k: None for k in COLUMNS}
    row.update(
        instance=task["name"],
        penalty=task["penalty"],
        epsilon=task["epsilon"],
        method="HU",
        z_star=task["z_star"],
        seed=task["seed"],
    )
    t0 = time.monotonic()
    deadline = t0 + task["time_limit"]
    try:
        if time.monotonic() >= deadline:
            raise HuTimeout("time limit reached before solving")
        _, inst = resolve_instance(task["spec"])
        model = build_model(inst, task["presolve"])
        qubo = to_qubo(model, resolve_penalty(model, task["penalty"]))
        row["penalty"] = qubo.penalty
        ising = orient_for_maximization(qubo_to_ising(qubo))
        cfg = HuConfig(
            epsilon=task["epsilon"], seed=task["seed"], n_samples=task["samples"], update=task["update"]
        )
        res = hu_solve(ising.c, cfg, deadline=deadline)
        rep = bounds_to_original(res, ising, qubo, model, task["z_star"])
        row.update(
            lower=rep.lower_bound,
            upper=rep.upper_bound,
            delta_abs_l=rep.delta_abs_lower,
            delta_rel_l=rep.delta_rel_lower,
            delta_abs_u=rep.delta_abs_upper,
            delta_rel_u=rep.delta_rel_upper,
            t_quantum_seconds=res.gate_estimate.seconds,
            status="ok" if rep.feasible_at_model else "ok-infeasible-rounding",
        )
    except HuTimeout:
        row["status"] = "timeout"
    except Exception as exc:  # recorded per row, the grid continues
        row["status"] = f"error: {type(exc).__name__}: {exc}"
    row["wall_seconds"] = time.monotonic() - t0
    return row


def _tasks(config: RunConfig) -> list[dict]:
    tasks = []
    z_cache: dict[str, float | None] = {}
    index = 0
    for spec in config.instances:
        name, inst = resolve_instance(spec)
        if spec not in z_cache:
            z_cache[spec] = oracle_optimum(inst)
        for penalty in config.penalties:
            for eps in config.epsilons:
                tasks.append(
                    dict(
                        spec=spec,
                        name=name,
                        penalty=penalty,
                        epsilon=float(eps),
                        z_star=z_cache[spec],
                        seed=cell_seed(config.seed, index),
                        samples=config.rounding_samples,
                        time_limit=config.time_limit,
                        presolve=config.presolve,
                        update=config.update,
                    )
                )
                index += 1
    return tasks


def run_pipeline(config: RunConfig, write: bool = True) -> list[dict]:
    tasks = _tasks(config)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(run_cell, tasks))
    else:
        rows = [run_cell(t) for t in tasks]
    for row in rows:
        if config.record_time:
            row["t_seconds"] = row["wall_seconds"]
    if write:
        write_results(rows, Path(config.out_dir))
    return rows


def write_results(rows: list[dict], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in COLUMNS])
    table = [{c: row.get(c) for c in COLUMNS} for row in rows]
    (out_dir / "results.json").write_text(json.dumps(table, indent=1) + "\n")
    with open(out_dir / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "penalty", "epsilon", "wall_seconds", "status"])
        for row in rows:
            w.writerow([row["instance"], _fmt(row["penalty"]), _fmt(row["epsilon"]), _fmt(row["wall_seconds"]), row["status"]])


def read_results(path: str | Path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row: dict[str, Any] = {}
            for k, v in rec.items():
                if k in ("instance", "method", "status"):
                    row[k] = v
                else:
                    row[k] = float(v) if v not in ("", None) else None
            out.append(row)
    return out


def emit_sdps(config: RunConfig) -> list[dict]:
    """Order-1 and, when small enough, order-2 SDPA files per instance x penalty."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for spec in config.instances:
        name, inst = resolve_instance(spec)
        model = build_model(inst, config.presolve)
        for penalty in config.penalties:
            qubo = to_qubo(model, resolve_penalty(model, penalty))
            ising = orient_for_maximization(qubo_to_ising(qubo))
            stem = f"{_safe(name)}_p{_fmt(qubo.penalty)}"
            p1 = emit_sdpa(first_order_sdp(ising), out_dir / f"{stem}_order1.dat-s")
            records.append({"instance": name, "penalty": qubo.penalty, "order": 1, "status": "ok", "path": str(p1)})
            try:
                sdp2 = second_order_sdp(ising, config.max_order2_dimension)
            except SdpSizeError as exc:
                records.append({"instance": name, "penalty": qubo.penalty, "order": 2, "status": f"skipped: {exc}", "path": None})
                continue
            p2 = emit_sdpa(sdp2, out_dir / f"{stem}_order2.dat-s")
            records.append({"instance": name, "penalty": qubo.penalty, "order": 2, "status": "ok", "path": str(p2)})
    return records


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def _mean(xs: Iterable[float]) -> float | None:
    xs = [x for x in xs if x is not None]
    return fmean(xs) if xs else None


def plot_data(rows: list[dict], out_dir: str | Path) -> dict[str, Path]:
    """CSV series for gap-vs-penalty and running-time plots, plus per-instance averages."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "delta": out / "delta_vs_penalty.csv",
        "times": out / "running_times.csv",
        "averages": out / "instance_averages.csv",
    }
    with open(paths["delta"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "epsilon", "penalty", "bound", "delta_rel", "method"])
        for r in rows:
            if r.get("z_star") is None:
                continue
            for bound, key in (("lower", "delta_rel_l"), ("upper", "delta_rel_u")):
                if r.get(key) is not None:
                    w.writerow([r["instance"], _fmt(r["epsilon"]), _fmt(r["penalty"]), bound, _fmt(r[key]), r["method"]])

    methods = sorted({r["method"] for r in rows})
    with open(paths["times"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "mean_t_seconds", "mean_t_quantum_seconds", "rows"])
        for m in methods:
            sel = [r for r in rows if r["method"] == m]
            w.writerow([m, _fmt(_mean(r.get("t_seconds") for r in sel)), _fmt(_mean(r.get("t_quantum_seconds") for r in sel)), len(sel)])

    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["instance"], r["method"], r["epsilon"]), []).append(r)
    with open(paths["averages"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "method", "epsilon", "mean_delta_rel_lower", "mean_delta_rel_upper", "rows", "no_optimum"])
        for (inst, m, eps), sel in sorted(groups.items(), key=lambda kv: tuple(map(str, kv[0]))):
            with_opt = [r for r in sel if r.get("z_star") is not None]
            w.writerow([
                inst, m, _fmt(eps),
                _fmt(_mean(r.get("delta_rel_l") for r in with_opt)),
                _fmt(_mean(r.get("delta_rel_u") for r in with_opt)),
                len(with_opt), len(sel) - len(with_opt),
            ])  # fmt: skip
    return paths
