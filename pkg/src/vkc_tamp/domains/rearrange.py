"""Seeded table-rearrangement problems for both domain variants.

``m`` objects sit on ``m + 1`` round tables laid out on a circle; each table
holds at most one object.  The conventional variant also needs explicit base
poses and ``reachable`` facts, which come from a reachability sweep of the arm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..kinematics import Transform
from ..pddl import Literal, ProblemDef
from ..world import Scene
from . import robots

VARIANTS = ("vkc", "conventional")
BASE_STANDOFF = 0.8  # base centre to table centre
REACH_TOL = 0.05


@dataclass(frozen=True)
class RearrangeSpec:
    m: int
    tables: tuple
    init: dict
    goal: dict
    seed: int | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if len(self.tables) != self.m + 1:
            raise ValueError(f"expected {self.m + 1} tables, got {len(self.tables)}")
        for label, mapping in (("init", self.init), ("goal", self.goal)):
            if sorted(mapping) != sorted(self.objects):
                raise ValueError(f"{label} must place exactly the objects {self.objects}")
            if len(set(mapping.values())) != self.m:
                raise ValueError(f"{label} map is not injective")
            if not set(mapping.values()) <= set(self.tables):
                raise ValueError(f"{label} uses unknown tables")

    @property
    def objects(self) -> tuple:
        return tuple(f"o{i + 1}" for i in range(self.m))

    @property
    def misplaced(self) -> list[str]:
        return [o for o in self.objects if self.init[o] != self.goal[o]]


def make_spec(m: int, seed: int) -> RearrangeSpec:
    """Random init and goal placements; the goal moves at least one object."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng([seed, m])
    tables = tuple(f"t{j}" for j in range(m + 1))
    objects = [f"o{i + 1}" for i in range(m)]
    init_perm = rng.permutation(m + 1)
    init = {o: tables[int(init_perm[i])] for i, o in enumerate(objects)}
    while True:
        perm = rng.permutation(m + 1)
        goal = {o: tables[int(perm[i])] for i, o in enumerate(objects)}
        if goal != init:
            break
    return RearrangeSpec(m, tables, init, goal, seed)


def table_layout(n_tables: int) -> list[tuple[float, float]]:
    radius = max(2.5, 0.6 * n_tables)
    return [(radius * math.cos(2 * math.pi * j / n_tables), radius * math.sin(2 * math.pi * j / n_tables))
            for j in range(n_tables)]


def base_pose_for(x: float, y: float) -> tuple[float, float, float]:
    """Base pose facing a table from the circle's inside."""
    d = math.hypot(x, y)
    ux, uy = x / d, y / d
    return (x - BASE_STANDOFF * ux, y - BASE_STANDOFF * uy, math.atan2(uy, ux))


def make_rearrange_scene(spec: RearrangeSpec) -> Scene:
    """Tables, placements on their tops, one base pose per table plus ``home``."""
    xy = table_layout(len(spec.tables))
    placements = {t: Transform.planar(x, y, 0.0, robots.OBJECT_HEIGHT) for t, (x, y) in zip(spec.tables, xy)}
    obstacles = [robots.table_obstacle(x, y) for x, y in xy]
    objects = {o: robots.rigid_object(o) for o in spec.objects}
    poses = {o: placements[spec.init[o]] for o in spec.objects}
    grasps = {(o, "top"): robots.top_grasp() for o in spec.objects}
    configs = {"home": ("base", (0.0, 0.0, 0.0))}
    for j, (x, y) in enumerate(xy):
        configs[f"b{j}"] = ("base", base_pose_for(x, y))
    return Scene(robots.planar_robot(), objects, obstacles, placements, grasps, poses, {}, {}, configs)


@lru_cache(maxsize=None)
def _arm_points() -> np.ndarray:
    return robots.arm_grid()


def reachable_pairs(placements: dict, base_poses: dict, tol: float = REACH_TOL) -> set[tuple[str, str]]:
    """(placement, base) pairs where some arm grid configuration puts the end-effector
    within ``tol`` (in the plane) of the placement."""
    from scipy.spatial import cKDTree

    tree = cKDTree(_arm_points())
    out = set()
    for b, (bx, by, yaw) in base_poses.items():
        c, s = math.cos(yaw), math.sin(yaw)
        for pid, T in placements.items():
            dx, dy = T.translation[0] - bx, T.translation[1] - by
            local = (c * dx + s * dy, -s * dx + c * dy)
            if math.hypot(*local) > robots.REACH + tol:
                continue
            d, _ = tree.query(local)
            if d <= tol:
                out.add((pid, b))
    return out


def _lit(pred: str, *args: str) -> Literal:
    return Literal(pred, tuple(args))


def make_rearrange_problem(spec: RearrangeSpec, domain: str = "vkc") -> ProblemDef:
    if domain not in VARIANTS:
        raise ValueError(f"unknown domain variant {domain!r}")
    objs = spec.objects
    goal = tuple(_lit("objconf", o, spec.goal[o]) for o in objs)
    init = {("objconf", o, spec.init[o]) for o in objs}
    init |= {("occupied", spec.init[o]) for o in objs}
    init |= {("placeable", o, t) for o in objs for t in spec.tables}
    init |= {("rigidobj", o) for o in objs}
    if domain == "vkc":
        objects = {o: "obj" for o in objs}
        objects.update({t: "state" for t in spec.tables})
        objects["vkc"] = "vkc"
        init |= {("free", "vkc")}
        init |= {("graspable", o, "vkc") for o in objs}
        init |= {("reachable", t, "vkc") for t in spec.tables}
    else:
        scene = make_rearrange_scene(spec)
        bases = {k: v for k, (g, v) in scene.configs.items() if g == "base"}
        objects = {o: "obj" for o in objs}
        objects.update({t: "state" for t in spec.tables})
        objects.update({b: "base" for b in sorted(bases)})
        init |= {("robotat", "home"), ("handempty",)}
        init |= {("abletopick", b) for b in bases}
        init |= {("reachable", t, b) for t, b in reachable_pairs(scene.placements, bases)}
    name = f"rearrange-{domain}-m{spec.m}" + ("" if spec.seed is None else f"-s{spec.seed}")
    return ProblemDef(name, "vkc" if domain == "vkc" else "conventional", objects, frozenset(init), goal)
