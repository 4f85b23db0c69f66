"""Turning ground actions into motion requests and applying motion results.

Ids used by actions resolve against the scene: placements and joint states
for ``?s`` arguments (a joint state wins when it belongs to the object, so
one id can name both a door's closed state and the space it blocks), ``configs`` for goto/move targets, and ``grasps`` keyed
``(object, id)``.  A grasp keyed by the carrying chain's name (``vkc`` or a
tool object) wins over the object's other grasps.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..kinematics import (SerialChain, Transform, attach, detach, fixed_virtual_joint, fk_matrices,
                          invert_chain)
from ..pddl import ContractViolation, GroundAction, apply, applicable
from ..world import Scene
from ..motion.core import GoalSpec, MotionRequest, Trajectory, goal_residual

VKC_ACTIONS = ("goto-vkc", "pick-vkc", "place-vkc")
CONVENTIONAL_ACTIONS = ("move", "pick", "place", "open", "close")


class MotionRejected(RuntimeError):
    """A trajectory does not reach its request's goal; the world state is kept."""


@dataclass(frozen=True)
class WorldState:
    scene: Scene
    chain: SerialChain
    q: np.ndarray
    state: frozenset
    carried: tuple = ()  # attached objects, innermost first

    @classmethod
    def initial(cls, scene: Scene, state, q=None) -> "WorldState":
        chain = scene.robot_chain()
        if q is None:
            base = scene.configs.get("home", ("base", (0.0, 0.0, 0.0)))[1]
            q = np.concatenate([np.asarray(base, dtype=float), np.zeros(chain.dof - 3)])
        ws = cls(scene, chain, np.asarray(q, dtype=float), frozenset(state))
        ws.check()
        return ws

    def with_base(self, pose) -> "WorldState":
        q = self.q.copy()
        q[:3] = pose
        return replace(self, q=q)

    def check(self) -> None:
        """Symbolic carry/holding atoms agree with the chain's attachments."""
        n_att = sum(1 for t in self.chain.tags if t == "attachment")
        if n_att != len(self.carried):
            raise ContractViolation("attachment count differs from carried objects")
        held = {a[1] for a in self.state if a[0] in ("carry", "holding")}
        if held != set(self.carried):
            raise ContractViolation(f"symbolic state holds {sorted(held)}, chain carries {list(self.carried)}")
        if self.q.shape != (self.chain.dof,):
            raise ContractViolation("configuration does not match chain")


def _grasp(scene: Scene, obj: str, carrier: str) -> tuple[str, Transform]:
    if (obj, carrier) in scene.grasps:
        return carrier, scene.grasps[(obj, carrier)]
    ids = sorted(g for (o, g) in scene.grasps if o == obj)
    if not ids:
        raise KeyError(f"no grasp for object {obj!r}")
    return ids[0], scene.grasps[(obj, ids[0])]


def _is_round(scene: Scene, obj: str) -> bool:
    return all(p.shape == "sphere" for l in scene.objects[obj].links for p in l.geometry)


def _at_pose(scene: Scene, obj: str) -> Transform:
    tree = scene.objects[obj]
    link = tree.find_frame("at")
    return scene.object_link_poses(obj)[link] @ tree.link(link).frame("at")


def _base_indices(chain: SerialChain) -> list[int]:
    return chain.indices_tagged("virtual-base")


def _arm_indices(chain: SerialChain) -> list[int]:
    return chain.indices_tagged("robot")


def _anchor(ws: WorldState) -> Transform | None:
    """World pose the chain tip must keep when it ends in an articulated object."""
    if not ws.carried:
        return None
    obj = ws.carried[-1]
    if not ws.scene.objects[obj].joints:
        return None
    return ws.scene.object_pose(obj)


def _reach(ws: WorldState, obj: str, carrier: str, frozen=(), label="") -> MotionRequest:
    gid, grasp = _grasp(ws.scene, obj, carrier)
    tree = ws.scene.objects[obj]
    at_link = tree.find_frame("at")
    goal = GoalSpec.ee_pose(_at_pose(ws.scene, obj), frame="ee", offset=grasp,
                            orientation=not _is_round(ws.scene, obj))
    return MotionRequest("attach", ws.chain, ws.q, goal, object=obj, grasp_id=gid, frozen=frozen,
                         anchor=_anchor(ws), ignore=frozenset({at_link}), label=label, final=False)


def _joint_goal(ws: WorldState, obj: str, value: float, frozen=(), label="") -> MotionRequest:
    tree = ws.scene.objects[obj]
    names = ws.chain.active_names
    jn = [j.name for j in tree.joints if not j.is_fixed]
    idx = [names.index(n) for n in jn if n in names]
    if len(idx) != 1:
        raise KeyError(f"object {obj!r} needs exactly one actuated joint in the chain")
    goal = GoalSpec.joints(idx, [value], kind="object-joint")
    return MotionRequest("detach", ws.chain, ws.q, goal, object=obj, frozen=frozen,
                         anchor=_anchor(ws), label=label, final=False)


def _place_goal(ws: WorldState, obj: str, sid: str, frozen=(), label="") -> MotionRequest:
    scene = ws.scene
    if sid in scene.joint_states and scene.joint_states[sid][0] == obj:
        return _joint_goal(ws, obj, scene.joint_states[sid][2], frozen, label)
    if sid not in scene.placements:
        raise KeyError(f"no placement or joint state {sid!r} for {obj!r}")
    goal = GoalSpec.object_pose(scene.placements[sid], orientation=not _is_round(scene, obj))
    return MotionRequest("detach", ws.chain, ws.q, goal, object=obj, frozen=frozen,
                         anchor=_anchor(ws), label=label, final=False)


def _config_goal(ws: WorldState, cid: str, frozen=(), label="") -> MotionRequest:
    if cid not in ws.scene.configs:
        raise KeyError(f"unknown configuration {cid!r}")
    group, values = ws.scene.configs[cid]
    if group == "base":
        idx = _base_indices(ws.chain)
    elif group == "arm":
        idx = _arm_indices(ws.chain)
    else:
        idx = list(range(ws.chain.dof))
    if len(idx) != len(values):
        raise ValueError(f"configuration {cid!r} has {len(values)} values for {len(idx)} joints")
    goal = GoalSpec.joints(idx, values)
    return MotionRequest("none", ws.chain, ws.q, goal, frozen=frozen, anchor=_anchor(ws),
                         label=label, final=False)


def action_steps(a: GroundAction) -> int:
    """Number of motion requests an action compiles to."""
    return 2 if a.name in ("open", "close") else 1


def compile_action(ws: WorldState, a: GroundAction, step: int = 0) -> MotionRequest:
    """Motion request for step ``step`` of action ``a``.

    Most actions are a single step.  Conventional ``open``/``close`` first
    reach and attach to the handle, then drive the object joint and detach;
    the second step is compiled from the state the first one produced.
    Conventional actions other than ``move`` keep the base fixed; ``move``
    keeps the arm fixed.  The request of the last step has ``final`` set.
    """
    if not 0 <= step < action_steps(a):
        raise ValueError(f"{a} has no step {step}")
    if not applicable(ws.state, a):
        raise ContractViolation(f"{a} is not applicable")
    name, args = a.name, a.args
    label = str(a)
    if name == "goto-vkc":
        req = _config_goal(ws, args[2], label=label)
    elif name == "pick-vkc":
        obj, _, carrier = args
        outer = ws.carried[-1] if ws.carried else "vkc"
        if outer != carrier:
            raise ContractViolation(f"chain ends in {outer!r}, not {carrier!r}")
        req = _reach(ws, obj, carrier, label=label)
    elif name == "place-vkc":
        obj, sid, _ = args
        if not ws.carried or ws.carried[-1] != obj:
            raise ContractViolation(f"{obj!r} is not the outermost attached object")
        req = _place_goal(ws, obj, sid, label=label)
    elif name == "move":
        req = _config_goal(ws, args[1], frozen=_arm_indices(ws.chain), label=label)
    elif name == "pick":
        req = _reach(ws, args[0], "robot", frozen=_base_indices(ws.chain), label=label)
    elif name == "place":
        req = _place_goal(ws, args[0], args[1], frozen=_base_indices(ws.chain), label=label)
    elif name in ("open", "close"):
        obj = args[0]
        if step == 0:
            req = _reach(ws, obj, "robot", frozen=_base_indices(ws.chain), label=label)
        else:
            sid = f"{obj}-{'open' if name == 'open' else 'closed'}"
            if sid not in ws.scene.joint_states:
                raise KeyError(f"scene has no joint state {sid!r}")
            req = _joint_goal(ws, obj, ws.scene.joint_states[sid][2],
                              frozen=_base_indices(ws.chain), label=label)
    else:
        raise ContractViolation(f"no motion semantics for action {name!r}")
    req.final = step == action_steps(a) - 1
    return req


def apply_motion_result(ws: WorldState, req: MotionRequest, traj: Trajectory,
                        action: GroundAction | None = None) -> WorldState:
    """Move to the trajectory's endpoint, perform the chain edit and, for the
    last request of an action, advance the symbolic state."""
    if traj.points.shape[1] != req.chain.dof:
        raise MotionRejected("trajectory does not match the request's chain")
    r = goal_residual(req.goal, req.chain, traj.end)
    if r.size and float(np.max(r * r)) > req.goal.tolerance:
        raise MotionRejected(f"endpoint misses the goal (max squared residual {float(np.max(r * r)):.3g})")
    q = np.array(traj.end, dtype=float)
    scene, chain, carried = ws.scene, req.chain, ws.carried
    if req.chain_edit == "attach":
        obj = req.object
        ochain, oq = scene.object_full_chain(obj)
        inv = invert_chain(ochain, "at", oq)
        mats = fk_matrices(chain, q)
        ee = mats[-1] @ chain.tip.frame("ee").matrix
        grasp = Transform.from_matrix(np.linalg.inv(ee) @ _at_pose(scene, obj).matrix).orthonormalized()
        chain = attach(chain, inv, fixed_virtual_joint(f"attach_{obj}"), grasp)
        q = np.concatenate([q, oq[::-1]])
        carried = carried + (obj,)
    elif req.chain_edit == "detach":
        d = detach(chain, q)
        obj = carried[-1]
        tree = scene.objects[obj]
        names = [j.name for j in d.object_chain.active_joints]
        values = dict(scene.object_configs.get(obj, {}))
        values.update(zip(names, map(float, d.object_q)))
        pose = d.object_pose.orthonormalized()
        if tree.joints and obj in scene.object_poses:
            pose = scene.object_pose(obj)  # articulated objects stay bolted down
        scene = scene.with_object_state(obj, pose, values)
        chain, q = d.robot_chain, d.robot_q
        carried = carried[:-1]
    state = ws.state
    if req.final and action is not None:
        state = apply(state, action)
    new = WorldState(scene, chain, q, state, carried)
    if req.final:
        new.check()
    return new


@dataclass
class StepRecord:
    index: int
    action: str
    step: int
    success: bool
    violations: list
    trajectory: Trajectory | None


def execute_plan(ws: WorldState, plan, solve) -> tuple[WorldState, list[StepRecord]]:
    """Compile, solve and apply every step of ``plan`` until one fails.

    ``solve(req, scene)`` returns a MotionResult.  The returned state is the
    last one reached; the records end with the failing step, if any.
    """
    records: list[StepRecord] = []
    for a in plan:
        for k in range(action_steps(a)):
            req = compile_action(ws, a, k)
            res = solve(req, ws.scene)
            rec = StepRecord(len(records), str(a), k, bool(res.success), list(res.violations), res.trajectory)
            records.append(rec)
            if res.success:
                try:
                    ws = apply_motion_result(ws, req, res.trajectory, a)
                except MotionRejected as e:
                    rec.success = False
                    rec.violations.append(str(e))
            if not rec.success:
                return ws, records
    return ws, records
