"""Bundled desk-scale scenes: drawer opening, reaching, and the multi-step task."""
from __future__ import annotations

import math
from importlib import resources

import numpy as np

from ..kinematics import Transform
from ..pddl import Literal, ProblemDef
from ..world import CollisionModel, Scene, load_scene
from . import robots

ARM_START = (0.0, 1.0, 1.0)
TASKS = ("drawer", "reach", "multistep")


def fixture_path(name: str):
    """Path of a bundled fixture (``.scene`` or ``.pddl``) by file name."""
    return resources.files("vkc_tamp.data") / name


def load_fixture_scene(task: str) -> Scene:
    return load_scene(fixture_path(f"{task}.scene"))


# ---------------------------------------------------------------------------
# drawer


def make_drawer_scene() -> Scene:
    drawer = robots.drawer_object("drawer")
    return Scene(
        robot=robots.planar_robot(),
        objects={"drawer": drawer},
        static_obstacles=(robots.pillar_obstacle(1.0, 1.4, 0.2),),
        grasps={("drawer", "handle"): robots.handle_grasp()},
        object_poses={"drawer": Transform.planar(2.0, 0.0, math.pi)},
        object_configs={"drawer": {"drawer_joint": 0.0}},
        joint_states={"drawer-closed": ("drawer", "drawer_joint", 0.0),
                      "drawer-open": ("drawer", "drawer_joint", 0.3)},
        configs={"home": ("base", (0.0, 0.0, 0.0)), "arm-start": ("arm", ARM_START)},
    )


def _collision_free_start(scene: Scene, rng: np.random.Generator, box, margin: float) -> np.ndarray:
    model = CollisionModel(scene, scene.robot_chain())
    for _ in range(1000):
        base = tuple(rng.uniform(lo, hi) for lo, hi in box)
        q = np.array(base + ARM_START)
        if not model.report(q, margin).in_collision:
            return q
    raise RuntimeError("no collision-free start found")


def drawer_start(rng: np.random.Generator, scene: Scene | None = None, margin: float = 0.02) -> np.ndarray:
    """Random collision-free base placement in front of the drawer, arm in its start pose."""
    box = ((0.0, 0.8), (-0.8, 0.8), (-0.6, 0.6))
    return _collision_free_start(scene or make_drawer_scene(), rng, box, margin)


def drawer_problem(variant: str = "vkc") -> ProblemDef:
    if variant == "vkc":
        objects = {"drawer": "obj", "drawer-closed": "state", "drawer-open": "state", "vkc": "vkc"}
        init = {("objconf", "drawer", "drawer-closed"), ("occupied", "drawer-closed"), ("free", "vkc"),
                ("graspable", "drawer", "vkc"), ("reachable", "drawer-closed", "vkc"),
                ("reachable", "drawer-open", "vkc"), ("placeable", "drawer", "drawer-open"),
                ("artiobj", "drawer")}
        goal = (Literal("objconf", ("drawer", "drawer-open")),)
        return ProblemDef("drawer-vkc", "vkc", objects, frozenset(init), goal)
    objects = {"drawer": "obj", "drawer-closed": "state", "b0": "base", "b1": "base"}
    init = {("objconf", "drawer", "drawer-closed"), ("robotat", "b0"), ("handempty",),
            ("artiobj", "drawer"), ("reachable", "drawer-closed", "b1"), ("abletopick", "b1")}
    goal = (Literal("isopen", ("drawer",)),)
    return ProblemDef("drawer-conventional", "conventional", objects, frozenset(init), goal)


# ---------------------------------------------------------------------------
# reach


def make_reach_scene() -> Scene:
    ball = robots.rigid_object("ball", 0.04)
    return Scene(
        robot=robots.planar_robot(),
        objects={"ball": ball},
        static_obstacles=(robots.pillar_obstacle(1.3, 0.0, 0.3),),
        grasps={("ball", "top"): robots.top_grasp()},
        placements={"ball-start": Transform.planar(2.2, 0.1, 0.0, robots.OBJECT_HEIGHT)},
        object_poses={"ball": Transform.planar(2.2, 0.1, 0.0, robots.OBJECT_HEIGHT)},
        configs={"home": ("base", (0.0, 0.0, 0.0)), "arm-start": ("arm", ARM_START)},
    )


def reach_problem() -> ProblemDef:
    """Pick the ball from where it lies."""
    objects = {"ball": "obj", "ball-start": "state", "vkc": "vkc"}
    init = {("objconf", "ball", "ball-start"), ("occupied", "ball-start"), ("free", "vkc"),
            ("graspable", "ball", "vkc"), ("reachable", "ball-start", "vkc"), ("rigidobj", "ball")}
    goal = (Literal("carry", ("ball", "vkc")),)
    return ProblemDef("reach-vkc", "vkc", objects, frozenset(init), goal)


def reach_start(rng: np.random.Generator, scene: Scene | None = None, margin: float = 0.02) -> np.ndarray:
    box = ((-0.4, 0.4), (-0.8, 0.8), (-0.8, 0.8))
    return _collision_free_start(scene or make_reach_scene(), rng, box, margin)


# ---------------------------------------------------------------------------
# multi-step: fetch a cube from a nook with a stick, then store it in a cabinet

NOOK = (-2.0, 1.0)
NOOK_RING = 1.0
CABINET_POSE = (1.5, 2.2, math.pi)
DOOR_OPEN = 1.5


def _ring(center, radius: float, n: int = 8, r: float = 0.15, h: float = 0.52):
    """Table legs around ``center``; the gaps are too narrow for the base."""
    cx, cy = center
    return tuple(robots.pillar_obstacle(cx + radius * math.cos(a), cy + radius * math.sin(a), r, h)
                 for a in (2 * math.pi * (k + 0.5) / n for k in range(n)))


def make_multistep_scene() -> Scene:
    h = robots.OBJECT_HEIGHT
    cab = Transform.planar(*CABINET_POSE)
    obstacles = _ring(NOOK, NOOK_RING) + (
        robots.table_obstacle(0.8, -1.2),    # stick table
        robots.table_obstacle(2.0, -0.8),    # stick rest
        robots.table_obstacle(-0.8, -1.2),   # staging table
    )
    return Scene(
        robot=robots.planar_robot(),
        objects={"stick": robots.stick_object("stick"), "cube": robots.rigid_object("cube", 0.05),
                 "cabinet": robots.door_object("cabinet")},
        static_obstacles=obstacles,
        placements={
            "stick-table": Transform.planar(0.55, -1.2, 0.0, h),
            "stick-rest": Transform.planar(1.75, -0.8, 0.0, h),
            "nook": Transform.planar(NOOK[0], NOOK[1], 0.0, h),
            "cube-out": Transform.planar(-0.8, -1.2, 0.0, h),
            "cab-in": cab @ Transform.planar(0.0, 0.15, 0.0, h),
        },
        grasps={("stick", "vkc"): robots.top_grasp(), ("cube", "vkc"): robots.top_grasp(),
                ("cube", "stick"): Transform.planar(0.09, 0.0, 0.0),
                ("cabinet", "vkc"): robots.handle_grasp()},
        object_poses={"stick": Transform.planar(0.55, -1.2, 0.0, h),
                      "cube": Transform.planar(NOOK[0], NOOK[1], 0.0, h), "cabinet": cab},
        object_configs={"cabinet": {"cabinet_hinge": 0.0}},
        # the closed door blocks the space inside the cabinet
        joint_states={"cab-in": ("cabinet", "cabinet_hinge", 0.0),
                      "door-open": ("cabinet", "cabinet_hinge", DOOR_OPEN)},
        configs={"home": ("base", (0.0, 0.0, 0.0)), "arm-start": ("arm", ARM_START)},
    )


def multistep_start(rng: np.random.Generator, scene: Scene | None = None, margin: float = 0.02) -> np.ndarray:
    box = ((-0.5, 0.5), (-0.5, 0.5), (-math.pi, math.pi))
    return _collision_free_start(scene or make_multistep_scene(), rng, box, margin)


def multistep_problems() -> tuple[ProblemDef, ProblemDef]:
    """VKC and conventional problems for the multi-step scene.

    Both goals ask for the cube inside the cabinet, the stick on its rest and
    the door open.  The VKC problem lets the stick act as a chain (it is
    graspable by the robot and can itself grasp the cube from the nook); the
    conventional problem has a single gripper and marks the nook base with
    ``hasTool`` instead.
    """
    states = ("stick-table", "stick-rest", "nook", "cube-out", "cab-in", "door-open")
    objects = {"stick": "obj", "cube": "obj", "cabinet": "obj", "vkc": "vkc"}
    objects.update({s: "state" for s in states})
    init = {("objconf", "stick", "stick-table"), ("objconf", "cube", "nook"), ("objconf", "cabinet", "cab-in"),
            ("occupied", "stick-table"), ("occupied", "nook"), ("occupied", "cab-in"), ("free", "vkc"),
            ("graspable", "stick", "vkc"), ("graspable", "cube", "vkc"), ("graspable", "cube", "stick"),
            ("graspable", "cabinet", "vkc"), ("toolobj", "stick"), ("rigidobj", "stick"), ("rigidobj", "cube"),
            ("artiobj", "cabinet"), ("containspace", "cabinet", "cab-in"),
            ("placeable", "stick", "stick-table"), ("placeable", "stick", "stick-rest"),
            ("placeable", "cube", "cube-out"), ("placeable", "cube", "cab-in"),
            ("placeable", "cabinet", "door-open"), ("placeable", "cabinet", "cab-in"),
            ("reachable", "nook", "stick"), ("reachable", "cube-out", "stick")}
    init |= {("reachable", s, "vkc") for s in states if s != "nook"}
    goal = (Literal("objconf", ("cube", "cab-in")), Literal("objconf", ("stick", "stick-rest")),
            Literal("objconf", ("cabinet", "door-open")))
    vkc = ProblemDef("multistep-vkc", "vkc", objects, frozenset(init), goal)

    bases = {"home": None, "b-stick": "stick-table", "b-rest": "stick-rest", "b-nook": "nook",
             "b-out": "cube-out", "b-cab": "cab-in"}
    objects = {"stick": "obj", "cube": "obj", "cabinet": "obj"}
    objects.update({s: "state" for s in states if s != "door-open"})
    objects.update({b: "base" for b in bases})
    init = {("objconf", "stick", "stick-table"), ("objconf", "cube", "nook"), ("objconf", "cabinet", "cab-in"),
            ("occupied", "stick-table"), ("occupied", "nook"), ("robotat", "home"), ("handempty",),
            ("rigidobj", "stick"), ("rigidobj", "cube"), ("artiobj", "cabinet"), ("hastool", "b-nook"),
            ("placeable", "stick", "stick-rest"), ("placeable", "cube", "cube-out"),
            ("placeable", "cube", "cab-in")}
    init |= {("reachable", s, b) for b, s in bases.items() if s}
    init |= {("abletopick", b) for b, s in bases.items() if s}
    goal = (Literal("objconf", ("cube", "cab-in")), Literal("objconf", ("stick", "stick-rest")),
            Literal("isopen", ("cabinet",)))
    conv = ProblemDef("multistep-conventional", "conventional", objects, frozenset(init), goal)
    return vkc, conv


def make_multistep_scenario() -> tuple[Scene, ProblemDef, ProblemDef]:
    return (make_multistep_scene(),) + multistep_problems()
