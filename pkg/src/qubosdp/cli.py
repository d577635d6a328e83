"""Command-line entry point: ``qubosdp <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from .encoding import orient_for_maximization, qubo_to_ising
from .harness import (
    RunConfig,
    build_model,
    emit_sdps,
    oracle_optimum,
    plot_data,
    read_results,
    resolve_instance,
    resolve_penalty,
    run_pipeline,
)
from .hu import HuConfig, HuTimeout, hu_solve
from .instances import AspInstance, generate_asp, generate_ovrp, save_instance
from .oracle import OracleLimitError, brute_asp, brute_ovrp, brute_qubo
from .reformulate import to_qubo, write_qubo
from .rounding import bounds_to_original


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    return str(obj)


def _emit(payload, out: str | None) -> None:
    text = json.dumps(payload, indent=2, default=_jsonable) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _penalty_arg(value: str):
    return value if value == "auto" else float(value)


def _config(args) -> RunConfig:
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    if getattr(args, "instance", None):
        data["instances"] = args.instance
    if args.seed is not None:
        data["seed"] = args.seed
    if args.epsilon:
        data["epsilons"] = args.epsilon
    if args.penalty:
        data["penalties"] = args.penalty
    if args.time_limit is not None:
        data["time_limit"] = args.time_limit
    if args.workers is not None:
        data["workers"] = args.workers
    if args.out:
        data["out_dir"] = args.out
    if "instances" not in data:
        raise SystemExit("no instances given (use --config or positional instances)")
    return RunConfig(**data)


def cmd_generate(args) -> int:
    seed = args.seed or 0
    if args.kind == "asp":
        inst = generate_asp(seed, args.materials, args.aisles, n_isolated=args.isolated)
    else:
        inst = generate_ovrp(seed, args.customers, maxstop=args.maxstop)
    if args.out:
        save_instance(inst, args.out)
    else:
        _emit(inst.to_dict(), None)
    return 0


def cmd_compile(args) -> int:
    _, inst = resolve_instance(args.instance)
    model = build_model(inst, args.presolve)
    choice = resolve_penalty(model, args.penalty[0] if args.penalty else "auto")
    qubo = to_qubo(model, choice)
    out = args.out or "model.qubo"
    write_qubo(qubo, out)
    print(f"{qubo.n} bits, penalty {qubo.penalty} ({choice.provenance}), written to {out}")
    return 0


def cmd_solve(args) -> int:
    name, inst = resolve_instance(args.instance)
    model = build_model(inst, args.presolve)
    qubo = to_qubo(model, resolve_penalty(model, args.penalty[0] if args.penalty else "auto"))
    ising = orient_for_maximization(qubo_to_ising(qubo))
    eps = args.epsilon[0] if args.epsilon else 1e-2
    cfg = HuConfig(epsilon=eps, seed=args.seed or 0, log_path=args.log)
    deadline = time.monotonic() + args.time_limit if args.time_limit is not None else None
    z_star = None if args.no_oracle else oracle_optimum(inst)
    try:
        res = hu_solve(ising.c, cfg, deadline=deadline)
    except HuTimeout as exc:
        _emit({"instance": name, "status": "timeout", "detail": str(exc)}, args.out)
        return 0
    rep = bounds_to_original(res, ising, qubo, model, z_star)
    _emit(
        {
            "instance": name,
            "status": "ok",
            "penalty": qubo.penalty,
            "epsilon": eps,
            "qubo_bits": qubo.n,
            "z_star": z_star,
            "lower": rep.lower_bound,
            "upper": rep.upper_bound,
            "delta_abs_l": rep.delta_abs_lower,
            "delta_rel_l": rep.delta_rel_lower,
            "delta_abs_u": rep.delta_abs_upper,
            "delta_rel_u": rep.delta_rel_upper,
            "feasible_rounding": rep.feasible_at_model,
            "iterations": res.iterations_total,
            "t_seconds": res.wall_time_seconds,
            "t_quantum_seconds_model_estimate": res.gate_estimate.seconds,
        },
        args.out,
    )
    return 0


def cmd_emit_sdpa(args) -> int:
    cfg = _config(args)
    for rec in emit_sdps(cfg):
        print(f"order {rec['order']}: {rec['status']} {rec['path'] or ''}".rstrip())
    return 0


def cmd_brute(args) -> int:
    name, inst = resolve_instance(args.instance)
    try:
        if isinstance(inst, AspInstance):
            z, sol = brute_asp(inst)
            payload = {"instance": name, "z_star": z, "assignment": list(sol.assignment)}
        else:
            z, sol = brute_ovrp(inst)
            payload = {"instance": name, "z_star": z, "routes": [list(r) for r in sol.routes]}
        if args.qubo:
            model = build_model(inst, args.presolve)
            qubo = to_qubo(model, resolve_penalty(model, args.penalty[0] if args.penalty else "auto"))
            payload["qubo_min"], _ = brute_qubo(qubo)
    except OracleLimitError as exc:
        print(f"oracle refused: {exc}", file=sys.stderr)
        return 1
    _emit(payload, args.out)
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args)
    rows = run_pipeline(cfg)
    errors = [r for r in rows if str(r["status"]).startswith("error")]
    for r in rows:
        print(f"{r['instance']}  penalty={r['penalty']}  eps={r['epsilon']}  {r['status']}")
    print(f"{len(rows)} rows written to {cfg.out_dir}")
    return 1 if errors else 0


def cmd_plot_data(args) -> int:
    rows = read_results(args.results)
    paths = plot_data(rows, args.out or Path(args.results).parent)
    for p in paths.values():
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qubosdp", description="QUBO/SDP bounds for routing and slotting models.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file mirroring RunConfig")
    common.add_argument("--seed", type=int)
    common.add_argument("--epsilon", type=float, action="append")
    common.add_argument("--penalty", type=_penalty_arg, action="append", help="number or 'auto'")
    common.add_argument("--time-limit", type=float)
    common.add_argument("--workers", type=int)
    common.add_argument("--out")
    common.add_argument("--presolve", action="store_true", help="drop zero-affinity ASP materials")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a synthetic instance")
    g.add_argument("kind", choices=["asp", "ovrp"])
    g.add_argument("--materials", type=int, default=6)
    g.add_argument("--aisles", type=int, default=2)
    g.add_argument("--isolated", type=int, default=0)
    g.add_argument("--customers", type=int, default=3)
    g.add_argument("--maxstop", type=int, default=3)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("compile", parents=[common], help="model to QUBO file")
    c.add_argument("instance", help="instance JSON or generator spec")
    c.set_defaults(func=cmd_compile)

    s = sub.add_parser("solve", parents=[common], help="run the HU pipeline on one instance")
    s.add_argument("instance")
    s.add_argument("--log", help="JSONL iteration log")
    s.add_argument("--no-oracle", action="store_true")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("emit-sdpa", parents=[common], help="write order-1/order-2 SDPA files")
    e.add_argument("instance", nargs="*")
    e.set_defaults(func=cmd_emit_sdpa)

    b = sub.add_parser("brute", parents=[common], help="exact optimum by enumeration")
    b.add_argument("instance")
    b.add_argument("--qubo", action="store_true", help="also enumerate the compiled QUBO")
    b.set_defaults(func=cmd_brute)

    bench = sub.add_parser("bench", parents=[common], help="run a grid")
    bench.add_argument("instance", nargs="*")
    bench.set_defaults(func=cmd_bench)

    pd = sub.add_parser("plot-data", parents=[common], help="CSV series from results.csv")
    pd.add_argument("results")
    pd.set_defaults(func=cmd_plot_data)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
