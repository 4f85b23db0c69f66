"""Desk-scale planar models: a mobile manipulator and simple objects.

Everything moves in the plane; heights only separate layers so the arm can
reach over tables while the base cannot drive through them.
"""
from __future__ import annotations

import math

import numpy as np

from ..kinematics import Joint, KinematicTree, Link, Transform
from ..world import CollisionPrimitive

ARM_HEIGHT = 0.85
OBJECT_HEIGHT = 0.68
TABLE_TOP = 0.6
BASE_RADIUS = 0.3
LINK_RADIUS = 0.04
ARM_MOUNT = 0.1
LINK_LENGTHS = (0.4, 0.35, 0.2)
EE_OFFSET = 0.25
ARM_LIMITS = ((-2.9, 2.9), (-2.5, 2.5), (-2.5, 2.5))
ARM_VEL = 1.0
ARM_ACC = 2.0
REACH = ARM_MOUNT + LINK_LENGTHS[0] + LINK_LENGTHS[1] + EE_OFFSET


def planar_robot() -> KinematicTree:
    S, C = CollisionPrimitive.sphere, CollisionPrimitive.capsule
    base = Link("base", (S(BASE_RADIUS, (0, 0, BASE_RADIUS), "base"),))
    l1 = Link("link1", (C(LINK_RADIUS, (0, 0, 0), (LINK_LENGTHS[0], 0, 0), "link1"),))
    l2 = Link("link2", (C(LINK_RADIUS, (0, 0, 0), (LINK_LENGTHS[1], 0, 0), "link2"),))
    l3 = Link("link3", (C(LINK_RADIUS, (0, 0, 0), (LINK_LENGTHS[2], 0, 0), "link3"),),
              {"ee": Transform.from_xyz_rpy((EE_OFFSET, 0, 0))})
    z = (0, 0, 1)
    j1 = Joint("arm_1", "revolute", z, Transform.from_xyz_rpy((ARM_MOUNT, 0, ARM_HEIGHT)),
               ARM_LIMITS[0], ARM_VEL, ARM_ACC)
    j2 = Joint("arm_2", "revolute", z, Transform.from_xyz_rpy((LINK_LENGTHS[0], 0, 0)),
               ARM_LIMITS[1], ARM_VEL, ARM_ACC)
    j3 = Joint("arm_3", "revolute", z, Transform.from_xyz_rpy((LINK_LENGTHS[1], 0, 0)),
               ARM_LIMITS[2], ARM_VEL, ARM_ACC)
    topo = {"link1": ("base", "arm_1"), "link2": ("link1", "arm_2"), "link3": ("link2", "arm_3")}
    return KinematicTree((base, l1, l2, l3), (j1, j2, j3), topo, "base")


def rigid_object(name: str, radius: float = 0.05) -> KinematicTree:
    """A graspable ball; its link frame is the attachable frame."""
    link = Link(name, (CollisionPrimitive.sphere(radius, (0, 0, 0), name),),
                {"at": Transform.identity()})
    return KinematicTree((link,), (), {}, name)


def stick_object(name: str = "stick", length: float = 0.5) -> KinematicTree:
    """A rod held at one end; its far end carries an ``ee`` frame for tool use."""
    link = Link(
        name,
        (CollisionPrimitive.capsule(0.02, (0, 0, 0), (length, 0, 0), name),),
        {"at": Transform.identity(), "ee": Transform.from_xyz_rpy((length, 0, 0))},
    )
    return KinematicTree((link,), (), {}, name)


def drawer_object(name: str = "drawer", travel: float = 0.4) -> KinematicTree:
    """Cabinet body with a prismatic drawer; the handle is the attachable frame.

    The drawer slides along the body's +x axis.
    """
    S, C = CollisionPrimitive.sphere, CollisionPrimitive.capsule
    body = Link(f"{name}_body", (C(0.3, (-0.1, 0, 0), (-0.1, 0, 0.25), f"{name}_body"),))
    slide = Link(
        f"{name}_slide",
        (S(0.04, (0.3, 0, OBJECT_HEIGHT), f"{name}_slide"),),
        {"at": Transform.from_xyz_rpy((0.3, 0, OBJECT_HEIGHT))},
    )
    j = Joint(f"{name}_joint", "prismatic", (1, 0, 0), Transform.identity(), (0.0, travel), 0.3, 1.0)
    return KinematicTree((body, slide), (j,), {slide.name: (body.name, j.name)}, body.name)


def door_object(name: str = "cabinet", width: float = 0.5) -> KinematicTree:
    """Cabinet body with a revolute door hinged at the body's corner."""
    C = CollisionPrimitive.capsule
    body = Link(f"{name}_body", (C(0.25, (0, 0, 0), (0, 0, 0.3), f"{name}_body"),))
    door = Link(
        f"{name}_door",
        (C(0.03, (0.05, 0, OBJECT_HEIGHT), (width - 0.05, 0, OBJECT_HEIGHT), f"{name}_door"),),
        {"at": Transform.from_xyz_rpy((width - 0.05, 0, OBJECT_HEIGHT))},
    )
    j = Joint(f"{name}_hinge", "revolute", (0, 0, 1), Transform.from_xyz_rpy((-width / 2, 0.35, 0)),
              (0.0, 1.6), 0.5, 1.0)
    return KinematicTree((body, door), (j,), {door.name: (body.name, j.name)}, body.name)


def table_obstacle(x: float, y: float, radius: float = 0.25) -> CollisionPrimitive:
    """Round table: a vertical capsule whose top is at ``TABLE_TOP``."""
    top = TABLE_TOP - radius
    return CollisionPrimitive.capsule(radius, (x, y, 0.0), (x, y, top))


def pillar_obstacle(x: float, y: float, radius: float = 0.15, height: float = 1.2) -> CollisionPrimitive:
    return CollisionPrimitive.capsule(radius, (x, y, 0.0), (x, y, height))


def top_grasp(yaw: float = 0.0, standoff: float = 0.06) -> Transform:
    """Pose of an object's attachable frame in the end-effector frame.

    The object hangs ``standoff`` ahead of the end-effector, at object height.
    """
    return Transform.planar(standoff, 0.0, yaw, OBJECT_HEIGHT - ARM_HEIGHT)


def handle_grasp(standoff: float = 0.06) -> Transform:
    """Grasp of a handle facing the end-effector; the handle frame points back at it."""
    return Transform.planar(standoff, 0.0, math.pi, OBJECT_HEIGHT - ARM_HEIGHT)


def arm_grid(n: int = 24) -> np.ndarray:
    """End-effector xy positions (robot base frame) over a dense joint grid."""
    from ..kinematics import fk_matrices

    chain = planar_robot().chain_to("link3", "robot")
    axes = [np.linspace(lo, hi, n) for lo, hi in ARM_LIMITS]
    pts = []
    ee = chain.tip.named_frames["ee"].matrix
    for a in axes[0][:1]:
        for b in axes[1]:
            for c in axes[2]:
                M = fk_matrices(chain, np.array([a, b, c])) [-1] @ ee
                pts.append(M[:2, 3])
    base = np.array(pts)
    # rotate the first-joint slice instead of recomputing it
    out = []
    for a in axes[0]:
        ca, sa = math.cos(a - axes[0][0]), math.sin(a - axes[0][0])
        mount = np.array([ARM_MOUNT, 0.0])
        rel = base - mount
        out.append(mount + rel @ np.array([[ca, sa], [-sa, ca]]))
    return np.concatenate(out)
