"""Trajectories, goal specifications, motion requests and the feasibility audit."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..kinematics import SerialChain, Transform, fk_matrices, rotation_log
from ..world import CollisionModel, Scene

GOAL_KINDS = ("joints", "ee-pose", "object-joint", "object-pose")
CHAIN_EDITS = ("none", "attach", "detach")
DEFAULT_TOLERANCE = 1e-3
ANCHOR_TOLERANCE = 1e-3
_SLACK = 1e-7


class MotionError(RuntimeError):
    pass


@dataclass(frozen=True)
class GoalSpec:
    """Task-space goal ``f_task(q) = g`` checked element-wise against ``tolerance``.

    ``joints``/``object-joint`` select configuration entries; ``ee-pose`` and
    ``object-pose`` compare the pose of a frame on the chain tip with
    ``pose``.  For pose goals, ``orientation=False`` keeps only the position
    rows.  ``offset`` is composed onto the tip frame before comparison.
    """

    kind: str
    indices: tuple = ()
    values: tuple = ()
    pose: Transform | None = None
    frame: str | None = None
    offset: Transform | None = None
    orientation: bool = True
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        if self.kind not in GOAL_KINDS:
            raise ValueError(f"unknown goal kind {self.kind!r}")
        if not self.tolerance > 0:
            raise ValueError("goal tolerance must be positive")
        if self.kind in ("joints", "object-joint"):
            if len(self.indices) != len(self.values) or not self.indices:
                raise ValueError("joint goals need matching, non-empty indices and values")
            object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        elif self.pose is None:
            raise ValueError(f"{self.kind} goal needs a target pose")

    @classmethod
    def joints(cls, indices, values, tolerance: float = DEFAULT_TOLERANCE, kind: str = "joints"):
        return cls(kind, tuple(indices), tuple(values), tolerance=tolerance)

    @classmethod
    def ee_pose(cls, pose: Transform, frame: str = "ee", offset: Transform | None = None,
                orientation: bool = True, tolerance: float = DEFAULT_TOLERANCE):
        return cls("ee-pose", pose=pose, frame=frame, offset=offset, orientation=orientation,
                   tolerance=tolerance)

    @classmethod
    def object_pose(cls, pose: Transform, orientation: bool = True, tolerance: float = DEFAULT_TOLERANCE):
        return cls("object-pose", pose=pose, orientation=orientation, tolerance=tolerance)

    @property
    def k(self) -> int:
        if self.kind in ("joints", "object-joint"):
            return len(self.indices)
        return 6 if self.orientation else 3

    def check_dims(self, chain: SerialChain) -> None:
        if self.k > chain.dof and self.kind in ("joints", "object-joint"):
            raise ValueError("goal dimension exceeds chain dimension")
        for i in self.indices:
            if not 0 <= i < chain.dof:
                raise ValueError(f"goal index {i} outside chain with {chain.dof} joints")


def tip_frame_matrix(chain: SerialChain, frame: str | None) -> np.ndarray:
    M = np.eye(4)
    if frame is not None:
        M = chain.tip.frame(frame).matrix
    return M


def pose_error(M: np.ndarray, target: Transform, orientation: bool) -> np.ndarray:
    dp = M[:3, 3] - target.translation
    if not orientation:
        return dp
    return np.concatenate([dp, rotation_log(target.rotation.T @ M[:3, :3])])


def goal_residual(goal: GoalSpec, chain: SerialChain, q, mats: np.ndarray | None = None) -> np.ndarray:
    """``f_task(q) - g``."""
    q = np.asarray(q, dtype=float)
    if goal.kind in ("joints", "object-joint"):
        return q[list(goal.indices)] - np.array(goal.values)
    if mats is None:
        mats = fk_matrices(chain, q)
    M = mats[-1] @ tip_frame_matrix(chain, goal.frame)
    if goal.offset is not None:
        M = M @ goal.offset.matrix
    return pose_error(M, goal.pose, goal.orientation)


def anchor_residual(anchor: Transform | None, chain: SerialChain, q, mats: np.ndarray | None = None) -> np.ndarray:
    """Closure error: chain tip link pose vs. the fixed world pose it must keep."""
    if anchor is None:
        return np.zeros(0)
    if mats is None:
        mats = fk_matrices(chain, q)
    return pose_error(mats[-1], anchor, True)


@dataclass
class MotionRequest:
    """One motion problem: plan on ``chain`` from ``start`` to ``goal``, then edit the chain.

    ``frozen`` lists configuration indices held at their start values,
    ``anchor`` is the world pose the chain tip must keep (articulated
    objects fixed to the world), and ``ignore`` names objects or object
    links excluded from collision checks.
    """

    chain_edit: str
    chain: SerialChain
    start: np.ndarray
    goal: GoalSpec
    object: str | None = None
    grasp_id: str | None = None
    frozen: tuple = ()
    anchor: Transform | None = None
    ignore: frozenset = frozenset()
    label: str = ""
    final: bool = True

    def __post_init__(self):
        if self.chain_edit not in CHAIN_EDITS:
            raise ValueError(f"unknown chain edit {self.chain_edit!r}")
        self.start = np.asarray(self.start, dtype=float)
        if self.start.shape != (self.chain.dof,):
            raise ValueError(f"start has shape {self.start.shape}, chain needs ({self.chain.dof},)")
        if not self.chain.within_limits(self.start, 1e-9):
            raise ValueError("start configuration violates joint limits")
        if self.chain_edit == "attach" and "attachment" in self.chain.tags and self.object is None:
            raise ValueError("attach edit needs an object")
        self.goal.check_dims(self.chain)
        self.ignore = frozenset(self.ignore)
        self.frozen = tuple(sorted(set(int(i) for i in self.frozen)))


@dataclass
class Trajectory:
    points: np.ndarray
    chain: SerialChain
    dt: float = 0.25

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.shape[0] < 2:
            raise ValueError("a trajectory needs at least two points")
        if self.points.shape[1] != self.chain.dof:
            raise ValueError(f"points have {self.points.shape[1]} columns, chain has {self.chain.dof} joints")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def __len__(self):
        return len(self.points)

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]


class Violation(NamedTuple):
    timestep: int
    kind: str  # limits | velocity | acceleration | collision | goal | anchor
    detail: str
    amount: float


@dataclass
class MotionResult:
    success: bool
    trajectory: Trajectory | None
    violations: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __bool__(self):
        return self.success


def check_trajectory(traj: Trajectory, scene: Scene, req: MotionRequest | None = None,
                     margin: float = 0.01, anchor_tol: float = ANCHOR_TOLERANCE) -> list[Violation]:
    """Every (timestep, constraint) violation of a trajectory.

    Without a request only limits, bounds and collisions are audited.
    """
    chain, P, dt = traj.chain, traj.points, traj.dt
    out: list[Violation] = []
    names = chain.active_names
    lo, hi = chain.lower, chain.upper
    for t, q in enumerate(P):
        for i in np.nonzero((q < lo - _SLACK) | (q > hi + _SLACK))[0]:
            amt = float(max(lo[i] - q[i], q[i] - hi[i]))
            out.append(Violation(t, "limits", names[i], amt))
    if len(P) >= 2:
        V = np.abs(np.diff(P, axis=0)) - chain.vel_bounds * dt
        for t, i in zip(*np.nonzero(V > _SLACK)):
            out.append(Violation(int(t) + 1, "velocity", names[i], float(V[t, i])))
    if len(P) >= 3:
        A = np.abs(np.diff(P, n=2, axis=0)) - chain.acc_bounds * dt * dt
        for t, i in zip(*np.nonzero(A > _SLACK)):
            out.append(Violation(int(t) + 1, "acceleration", names[i], float(A[t, i])))
    model = CollisionModel(scene, chain, req.ignore if req else ())
    for t, q in enumerate(P):
        rep = model.report(q, margin)
        if rep.in_collision:
            a, b = rep.witness_pair
            out.append(Violation(t, "collision", f"{a.link}/{b.link}", margin - rep.min_signed_distance))
    if req is not None:
        if not np.allclose(P[0], req.start, atol=1e-9, rtol=0):
            out.append(Violation(0, "start", "first point differs from start", float(np.abs(P[0] - req.start).max())))
        for i in req.frozen:
            dev = float(np.abs(P[:, i] - req.start[i]).max())
            if dev > 1e-6:
                out.append(Violation(int(np.argmax(np.abs(P[:, i] - req.start[i]))), "frozen", names[i], dev))
        r = goal_residual(req.goal, chain, P[-1])
        sq = float(np.max(r * r)) if r.size else 0.0
        if sq > req.goal.tolerance:
            out.append(Violation(len(P) - 1, "goal", req.goal.kind, sq))
        if req.anchor is not None:
            for t, q in enumerate(P):
                e = float(np.abs(anchor_residual(req.anchor, chain, q)).max())
                if e > anchor_tol:
                    out.append(Violation(t, "anchor", "closure", e))
    out.sort(key=lambda v: (v.timestep, v.kind, v.detail))
    return out


def base_arm_costs(traj: Trajectory) -> tuple[float, float]:
    """Planar base travel (m) and arm joint-space path length (rad)."""
    chain, P = traj.chain, traj.points
    tags = chain.active_tags
    names = chain.active_names
    bxy = [i for i, n in enumerate(names) if n in ("base_x", "base_y")]
    arm = [i for i, t in enumerate(tags) if t == "robot"]
    D = np.diff(P, axis=0)
    base = float(np.linalg.norm(D[:, bxy], axis=1).sum()) if bxy else 0.0
    arm_c = float(np.linalg.norm(D[:, arm], axis=1).sum()) if arm else 0.0
    return base, arm_c


def dump_trajectory(traj: Trajectory) -> str:
    """Plain-text table: a header of joint names, then one row per timestep."""
    lines = ["t " + " ".join(traj.chain.active_names)]
    for k, q in enumerate(traj.points):
        lines.append(" ".join([format(k * traj.dt, ".12g")] + [format(v, ".12g") for v in q]))
    return "\n".join(lines) + "\n"


def load_trajectory_table(text: str) -> tuple[list[str], np.ndarray]:
    rows = [l.split() for l in text.strip().splitlines()]
    header = rows[0][1:]
    data = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    return header, data
