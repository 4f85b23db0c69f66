"""Command-line entry point: planning, benchmarks and scenario demos.

Every experiment writes CSV files whose columns are the fields of
``BenchRecord`` (or, for summaries, documented below) together with a small
matplotlib script that reads those files back.  Exit codes: 0 solved or
finished, 2 unsolved, 1 error.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .domains import (WorldState, compile_action, drawer_problem, drawer_start, execute_plan,
                      make_conventional_domain, make_drawer_scene, make_multistep_scenario,
                      make_rearrange_problem, make_reach_scene, make_spec, make_vkc_domain,
                      multistep_start, reach_problem, reach_start)
from .motion import (DESK_PRESET, OptimizerConfig, SamplerConfig, base_arm_costs, dump_trajectory,
                     optimize_restarts, rrt_connect)
from .pddl import DomainDef, PDDLError, ProblemDef, apply, ground, parse, satisfies, validate_problem
from .sexpr import ParseError
from .planner import Limits, bfs, iws, parse_algorithm
from .world import SceneError, load_scene

VARIANTS = ("vkc", "conventional")
SOLVERS = ("trajopt", "rrt")
DEFAULT_M = (2, 4, 6, 8, 12, 16)
MAX_NODES = 8_000_000  # keeps one search inside a few GB


@dataclass
class BenchRecord:
    experiment: str
    seed: int
    variant: str
    instance: str
    solver: str
    plan_length: int | None = None
    nodes_generated: int | None = None
    plan_time_s: float | None = None
    motion_success: bool | None = None
    base_cost: float | None = None
    arm_cost: float | None = None


WALL_TIME_COLUMNS = ("plan_time_s",)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


def write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def write_records(path: Path, records: list[BenchRecord]) -> None:
    records = sorted(records, key=lambda r: (r.experiment, r.instance, r.variant, r.solver, r.seed))
    write_csv(path, [asdict(r) for r in records], [f.name for f in fields(BenchRecord)])


def _threads() -> int:
    try:
        n = int(os.environ.get("VKC_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, min(n, os.cpu_count() or 1))


def _map(fn, jobs: list) -> list:
    n = _threads()
    if n == 1 or len(jobs) < 2:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, *zip(*jobs)))


# ---------------------------------------------------------------------------
# rearrangement benchmark


def replay_ok(init, goal, plan) -> bool:
    s = frozenset(init)
    for a in plan:
        if not (a.pre_pos <= s and not (a.pre_neg & s)):
            return False
        s = apply(s, a)
    return satisfies(s, goal)


def rearrange_trial(m: int, seed: int, variant: str, timeout: float, max_nodes: int = MAX_NODES) -> BenchRecord:
    """One iws run on a seeded rearrangement instance; unsolved trials keep empty plan_length."""
    spec = make_spec(m, seed)
    domain = make_vkc_domain() if variant == "vkc" else make_conventional_domain()
    prob = make_rearrange_problem(spec, variant)
    acts = ground(domain, prob)
    r = iws(prob.init, prob.goal, acts, 2, Limits(max_nodes, timeout))
    rec = BenchRecord("rearrange", seed, variant, f"m={m}", "iws",
                      nodes_generated=r.metrics.nodes_generated, plan_time_s=r.metrics.wall_time)
    if r.solved:
        if not replay_ok(prob.init, prob.goal, r.plan):
            raise RuntimeError(f"plan for m={m} seed={seed} ({variant}) does not replay to the goal")
        rec.plan_length = len(r.plan)
    return rec


def summarize(records: list[BenchRecord]) -> list[dict]:
    """Mean nodes, time and plan length per (instance, variant)."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.instance, r.variant), []).append(r)
    out = []
    for (inst, var), rs in sorted(groups.items(), key=lambda kv: (_m_of(kv[0][0]), kv[0][1])):
        solved = [r for r in rs if r.plan_length is not None]
        out.append({"instance": inst, "variant": var, "trials": len(rs), "solved": len(solved),
                    "mean_nodes": float(np.mean([r.nodes_generated for r in rs])),
                    "mean_time_s": float(np.mean([r.plan_time_s for r in rs])),
                    "mean_plan_length": float(np.mean([r.plan_length for r in solved])) if solved else None})
    return out


SUMMARY_COLUMNS = ["instance", "variant", "trials", "solved", "mean_nodes", "mean_time_s", "mean_plan_length"]
MODEL_COLUMNS = ["instance", "nodes_per_depth_conventional", "nodes_per_depth_vkc", "depth_conventional",
                 "depth_vkc", "c1", "c2", "c1_reference", "c2_reference"]


def _m_of(instance: str) -> int:
    return int(instance.split("=", 1)[1]) if "=" in instance else 0


def node_model(summary: list[dict]) -> list[dict]:
    """Compare the variants under a ``(c1 N)^(c2 d)`` search-cost model.

    N is the mean number of generated nodes per unit of solution depth and d
    the mean plan length of solved trials; c1 = N_vkc / N_conv and
    c2 = d_vkc / d_conv.
    """
    by = {(s["instance"], s["variant"]): s for s in summary}
    out = []
    for inst in sorted({s["instance"] for s in summary}, key=_m_of):
        v, c = by.get((inst, "vkc")), by.get((inst, "conventional"))
        if not v or not c or not v["mean_plan_length"] or not c["mean_plan_length"]:
            continue
        nv = v["mean_nodes"] / v["mean_plan_length"]
        nc = c["mean_nodes"] / c["mean_plan_length"]
        out.append({"instance": inst, "nodes_per_depth_conventional": nc, "nodes_per_depth_vkc": nv,
                    "depth_conventional": c["mean_plan_length"], "depth_vkc": v["mean_plan_length"],
                    "c1": nv / nc, "c2": v["mean_plan_length"] / c["mean_plan_length"],
                    "c1_reference": 0.75, "c2_reference": 0.22})
    return out


BENCH_PLOT = '''\
"""Plot mean generated nodes and planning time per object count."""
import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("summary.csv")))
fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
for variant in ("vkc", "conventional"):
    rs = [r for r in rows if r["variant"] == variant]
    m = [int(r["instance"].split("=")[1]) for r in rs]
    axes[0].semilogy(m, [float(r["mean_nodes"]) for r in rs], "o-", label=variant)
    axes[1].semilogy(m, [float(r["mean_time_s"]) for r in rs], "o-", label=variant)
axes[0].set_ylabel("mean nodes generated")
axes[1].set_ylabel("mean planning time (s)")
for ax in axes:
    ax.set_xlabel("objects")
    ax.legend()
fig.tight_layout()
fig.savefig("bench.png", dpi=150)
'''


def bench_rearrange(ms, trials: int, seed: int, variants, timeout: float, out: Path,
                    max_nodes: int = MAX_NODES) -> tuple[list[BenchRecord], list[dict], list[dict]]:
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(m, seed + t, v, timeout, max_nodes) for m in ms for v in variants for t in range(trials)]
    records = _map(rearrange_trial, jobs)
    summary = summarize(records)
    model = node_model(summary)
    write_records(out / "bench.csv", records)
    write_csv(out / "summary.csv", summary, SUMMARY_COLUMNS)
    write_csv(out / "model.csv", model, MODEL_COLUMNS)
    (out / "plot_bench.py").write_text(BENCH_PLOT)
    return records, summary, model


# ---------------------------------------------------------------------------
# motion experiments


def _task_setup(task: str, rng):
    """Scene, VKC problem and a random start for a bundled motion task."""
    if task == "drawer":
        scene, prob = make_drawer_scene(), drawer_problem("vkc")
        q0 = drawer_start(rng, scene)
    elif task == "reach":
        scene, prob = make_reach_scene(), reach_problem()
        q0 = reach_start(rng, scene)
    elif task == "multistep":
        scene, prob, _ = make_multistep_scenario()
        q0 = multistep_start(rng, scene)
    else:
        raise ValueError(f"unknown task {task!r}")
    return scene, prob, q0


def _solver(solver: str, task: str, seed: int, timeout: float | None):
    if solver == "trajopt":
        cfg = OptimizerConfig()
        return lambda req, scene: optimize_restarts(req, scene, cfg, seed=seed)
    if solver == "rrt":
        base = DESK_PRESET["reach" if task == "reach" else "open"]
        cfg = SamplerConfig(timeout=base.timeout if timeout is None else timeout, seed=seed)
        return lambda req, scene: rrt_connect(req, scene, cfg)
    raise ValueError(f"unknown solver {solver!r}")


def vkc_plan(prob: ProblemDef) -> list:
    r = bfs(prob.init, prob.goal, ground(make_vkc_domain(), prob))
    if not r.solved:
        raise RuntimeError(f"{prob.name} has no plan")
    return r.plan


def motion_trial(task: str, solver: str, seed: int, timeout: float | None = None):
    """Run the VKC plan of ``task`` from a seeded random start.

    Returns the record, the per-step records and the trajectories.
    """
    rng = np.random.default_rng(seed)
    scene, prob, q0 = _task_setup(task, rng)
    plan = vkc_plan(prob)
    ws = WorldState.initial(scene, prob.init, q0)
    t0 = time.monotonic()
    ws, steps = execute_plan(ws, plan, _solver(solver, task, seed, timeout))
    elapsed = time.monotonic() - t0
    success = len(steps) == len(plan) and all(s.success for s in steps) and satisfies(ws.state, prob.goal)
    rec = BenchRecord("motion", seed, "vkc", task, solver, plan_length=len(plan), plan_time_s=elapsed,
                      motion_success=success)
    if success:
        costs = [base_arm_costs(s.trajectory) for s in steps]
        rec.base_cost = float(sum(c[0] for c in costs))
        rec.arm_cost = float(sum(c[1] for c in costs))
    return rec, steps


STEP_COLUMNS = ["seed", "step", "action", "success"]
CURVE_COLUMNS = ["step", "action", "success_rate"]

MOTION_PLOT = '''\
"""Success rate and base/arm path cost per solver."""
import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("motion.csv")))
solvers = sorted({r["solver"] for r in rows})
fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
for k, s in enumerate(solvers):
    rs = [r for r in rows if r["solver"] == s]
    ok = [r for r in rs if r["motion_success"] == "true"]
    axes[0].bar(k, len(ok) / len(rs))
    if ok:
        axes[1].bar([2 * k, 2 * k + 1], [sum(float(r["base_cost"]) for r in ok) / len(ok),
                                        sum(float(r["arm_cost"]) for r in ok) / len(ok)])
axes[0].set_xticks(range(len(solvers)), solvers)
axes[0].set_ylabel("success rate")
axes[1].set_xticks([2 * k + j for k in range(len(solvers)) for j in (0, 1)],
                   [f"{s} {p}" for s in solvers for p in ("base", "arm")], rotation=30)
axes[1].set_ylabel("mean path length")
fig.tight_layout()
fig.savefig("motion.png", dpi=150)
'''

CURVE_PLOT = '''\
"""Accumulated success rate along the multi-step plan."""
import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("step_curve.csv")))
plt.plot([int(r["step"]) + 1 for r in rows], [float(r["success_rate"]) for r in rows], "o-")
plt.xlabel("step")
plt.ylabel("accumulated success rate")
plt.ylim(0, 1.05)
plt.savefig("step_curve.png", dpi=150)
'''


def step_curve(step_rows: list[dict], trials: int) -> list[dict]:
    """Fraction of trials that completed every step up to and including each step."""
    n = max((r["step"] for r in step_rows), default=-1) + 1
    names = {r["step"]: r["action"] for r in step_rows}
    done = {}
    for r in step_rows:
        if r["success"]:
            done.setdefault(r["step"], set()).add(r["seed"])
    return [{"step": k, "action": names[k], "success_rate": len(done.get(k, ())) / trials} for k in range(n)]


def bench_motion(task: str, solvers, trials: int, seed: int, out: Path, timeout: float | None = None,
                 dump: bool = True) -> list[BenchRecord]:
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(task, s, seed + t, timeout) for s in solvers for t in range(trials)]
    results = _map(motion_trial, jobs)
    records = [r for r, _ in results]
    write_records(out / "motion.csv", records)
    (out / "plot_motion.py").write_text(MOTION_PLOT)
    if dump:
        tdir = out / "trajectories"
        tdir.mkdir(exist_ok=True)
        for rec, steps in results:
            for s in steps:
                if s.trajectory is not None:
                    name = f"{task}-{rec.solver}-seed{rec.seed}-step{s.index}.txt"
                    (tdir / name).write_text(dump_trajectory(s.trajectory))
    if task == "multistep":
        for solver in solvers:
            rows = [{"seed": rec.seed, "step": s.index, "action": s.action, "success": s.success}
                    for rec, steps in results if rec.solver == solver for s in steps]
            write_csv(out / f"steps-{solver}.csv", rows, STEP_COLUMNS)
            curve = step_curve(rows, trials)
            write_csv(out / f"step_curve-{solver}.csv" if len(solvers) > 1 else out / "step_curve.csv",
                      curve, CURVE_COLUMNS)
        (out / "plot_step_curve.py").write_text(CURVE_PLOT)
    return records


# ---------------------------------------------------------------------------
# subcommands


def _read_pddl(path: str, kind):
    text = Path(path).read_text()
    try:
        node = parse(text)
    except ParseError as e:
        raise ValueError(f"{path}:{e}") from None
    if not isinstance(node, kind):
        raise ValueError(f"{path}: expected a {'domain' if kind is DomainDef else 'problem'}")
    return node


def cmd_plan(args) -> int:
    domain = _read_pddl(args.domain, DomainDef)
    problem = _read_pddl(args.problem, ProblemDef)
    validate_problem(domain, problem)
    search = parse_algorithm(args.algorithm)
    acts = ground(domain, problem)
    r = search(problem.init, problem.goal, acts, Limits(args.max_nodes, args.timeout_s or math.inf))
    m = r.metrics
    print(f"solved={str(r.solved).lower()} plan_length={len(r.plan) if r.solved else ''} "
          f"nodes_generated={m.nodes_generated} nodes_expanded={m.nodes_expanded} "
          f"width={m.width_used} time_s={m.wall_time:.4f}" + ("" if r.solved else f" reason={r.reason}"))
    if not r.solved:
        return 2
    text = "".join(f"{a}\n" for a in r.plan)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench_rearrange(args) -> int:
    ms = args.m or list(DEFAULT_M)
    variants = [args.variant] if args.variant else list(VARIANTS)
    _, summary, model = bench_rearrange(ms, args.trials, args.seed, variants, args.timeout_s or 60.0,
                                        Path(args.out), args.max_nodes)
    for s in summary:
        print(f"{s['instance']:>5} {s['variant']:>12} solved {s['solved']}/{s['trials']} "
              f"nodes {s['mean_nodes']:.1f} time {s['mean_time_s']:.4f}s")
    for row in model:
        print(f"{row['instance']:>5} c1 {row['c1']:.3f} c2 {row['c2']:.3f}")
    return 0


def cmd_motion(args) -> int:
    if args.variant not in (None, "vkc"):
        raise ValueError("motion experiments run VKC plans only")
    solvers = [args.solver] if args.solver else list(SOLVERS)
    recs = bench_motion(args.task, solvers, args.trials, args.seed, Path(args.out), args.timeout_s)
    for solver in solvers:
        rs = [r for r in recs if r.solver == solver]
        ok = [r for r in rs if r.motion_success]
        cost = np.mean([r.base_cost + r.arm_cost for r in ok]) if ok else float("nan")
        print(f"{args.task} {solver}: success {len(ok)}/{len(rs)} mean cost {cost:.3f}")
    return 0


def cmd_demo_multistep(args) -> int:
    scene, pv, pc = make_multistep_scenario()
    plans = {}
    for name, domain, prob in (("vkc", make_vkc_domain(), pv), ("conventional", make_conventional_domain(), pc)):
        r = bfs(prob.init, prob.goal, ground(domain, prob))
        plans[name] = r.plan
        print(f"{name} plan ({len(r.plan)} actions):")
        for a in r.plan:
            print(f"  {a}")
    solvers = [args.solver] if args.solver else ["trajopt"]
    recs = bench_motion("multistep", solvers, args.trials, args.seed, Path(args.out), args.timeout_s)
    ok = sum(bool(r.motion_success) for r in recs)
    print(f"motion: {ok}/{len(recs)} trials completed the VKC plan")
    return 0 if ok else 2


def cmd_validate_scene(args) -> int:
    scene = load_scene(args.scene)
    print(f"objects: {', '.join(sorted(scene.objects)) or '-'}")
    print(f"obstacles: {len(scene.static_obstacles)}  placements: {len(scene.placements)}  "
          f"joint states: {len(scene.joint_states)}  grasps: {len(scene.grasps)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vkc-tamp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plan", help="solve a PDDL problem")
    sp.add_argument("domain")
    sp.add_argument("problem")
    sp.add_argument("--algorithm", default="iws", help="bfs | iw:K | iws | iws:K")
    sp.add_argument("--timeout-s", type=float, default=None)
    sp.add_argument("--max-nodes", type=int, default=MAX_NODES)
    sp.add_argument("--out", help="plan file (default: standard output)")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("bench-rearrange", help="rearrangement scaling benchmark")
    sp.add_argument("--m", type=int, action="append", help="object count (repeatable)")
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--variant", choices=VARIANTS)
    sp.add_argument("--timeout-s", type=float, default=60.0)
    sp.add_argument("--max-nodes", type=int, default=MAX_NODES)
    sp.add_argument("--out", default="bench-rearrange")
    sp.set_defaults(func=cmd_bench_rearrange)

    sp = sub.add_parser("motion", help="motion solver comparison on a bundled task")
    sp.add_argument("task", choices=("drawer", "reach", "multistep"))
    sp.add_argument("--solver", choices=SOLVERS)
    sp.add_argument("--variant", choices=VARIANTS)
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--timeout-s", type=float, default=None, help="sampler timeout per request")
    sp.add_argument("--out", default="bench-motion")
    sp.set_defaults(func=cmd_motion)

    sp = sub.add_parser("demo-multistep", help="plan and execute the multi-step scenario")
    sp.add_argument("--solver", choices=SOLVERS)
    sp.add_argument("--trials", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--timeout-s", type=float, default=None)
    sp.add_argument("--out", default="demo-multistep")
    sp.set_defaults(func=cmd_demo_multistep)

    sp = sub.add_parser("validate-scene", help="parse and check a .scene file")
    sp.add_argument("scene")
    sp.set_defaults(func=cmd_validate_scene)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "trials", 1) < 1:
        print("error: --trials must be at least 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (PDDLError, SceneError, OSError, ValueError, KeyError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
