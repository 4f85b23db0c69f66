"""Scene model, primitive collision geometry and the ``.scene`` file format."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .kinematics import (
    Joint,
    KinematicTree,
    Link,
    SerialChain,
    Transform,
    add_virtual_base,
    fk_matrices,
)
from .sexpr import Atom, ParseError, SExpr, SList, lst, parse_all, to_string


class SceneError(ValueError):
    """Scene content is syntactically fine but semantically invalid."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        where = f"{line}:{column}: " if line else ""
        super().__init__(where + message)
        self.line = line
        self.column = column


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class CollisionPrimitive:
    """Sphere (``a == b``) or capsule around segment ``a``-``b``, in link frame."""

    shape: str
    radius: float
    a: tuple
    b: tuple
    link: str = "world"

    def __post_init__(self):
        if self.shape not in ("sphere", "capsule"):
            raise SceneError(f"unknown shape {self.shape!r}")
        if not self.radius > 0:
            raise SceneError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if self.shape == "capsule" and self.a == self.b:
            raise SceneError("capsule endpoints must be distinct")
        if self.shape == "sphere" and self.a != self.b:
            raise SceneError("sphere has a single center")

    @classmethod
    def sphere(cls, radius: float, center=(0.0, 0.0, 0.0), link: str = "world"):
        return cls("sphere", radius, tuple(center), tuple(center), link)

    @classmethod
    def capsule(cls, radius: float, a, b, link: str = "world"):
        return cls("capsule", radius, tuple(a), tuple(b), link)

    def at(self, pose: Transform, link: str | None = None) -> "CollisionPrimitive":
        a = pose.apply(np.array(self.a))
        b = pose.apply(np.array(self.b))
        return CollisionPrimitive(self.shape, self.radius, tuple(a), tuple(b), link or self.link)


def segment_distance(p1, q1, p2, q2) -> np.ndarray:
    """Closest distance between segments; broadcasts over leading axes.

    Degenerate (zero-length) segments are points.
    """
    p1, q1, p2, q2 = (np.asarray(x, dtype=float) for x in (p1, q1, p2, q2))
    eps = 1e-15
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.einsum("...i,...i", d1, d1)
    e = np.einsum("...i,...i", d2, d2)
    f = np.einsum("...i,...i", d2, r)
    c = np.einsum("...i,...i", d1, r)
    b = np.einsum("...i,...i", d1, d2)
    a_deg = a <= eps
    e_deg = e <= eps
    a_s = np.where(a_deg, 1.0, a)
    e_s = np.where(e_deg, 1.0, e)
    denom = a * e - b * b
    gen = denom > eps * np.maximum(a * e, eps)
    s = np.where(gen, np.clip((b * f - c * e) / np.where(gen, denom, 1.0), 0.0, 1.0), 0.0)
    t = (b * s + f) / e_s
    s = np.where(t < 0.0, np.clip(-c / a_s, 0.0, 1.0), np.where(t > 1.0, np.clip((b - c) / a_s, 0.0, 1.0), s))
    t = np.clip(t, 0.0, 1.0)
    # degenerate cases
    s = np.where(e_deg, np.clip(-c / a_s, 0.0, 1.0), s)
    t = np.where(e_deg, 0.0, t)
    s = np.where(a_deg, 0.0, s)
    t = np.where(a_deg, np.where(e_deg, 0.0, np.clip(f / e_s, 0.0, 1.0)), t)
    c1 = p1 + d1 * s[..., None]
    c2 = p2 + d2 * t[..., None]
    return np.linalg.norm(c1 - c2, axis=-1)


def signed_distance(a: CollisionPrimitive, pose_a: Transform, b: CollisionPrimitive,
                    pose_b: Transform) -> float:
    """Signed distance between two posed primitives (negative = penetration)."""
    A = a.at(pose_a)
    B = b.at(pose_b)
    d = segment_distance(A.a, A.b, B.a, B.b)
    return float(d) - a.radius - b.radius


class CollisionReport(NamedTuple):
    in_collision: bool
    min_signed_distance: float
    witness_pair: tuple


class CollisionModel:
    """Vectorized collision queries for one chain in one scene.

    Static geometry (obstacles and every object link not in the chain) is
    posed once; chain primitives are re-posed per query.  ``ignore`` may name
    whole objects or single object links.
    """

    def __init__(self, scene: "Scene", chain: SerialChain, ignore: Iterable[str] = ()):
        self.chain = chain
        chain_links = [l.name for l in chain.links]
        link_pos = {name: i for i, name in enumerate(chain_links)}
        prims = []
        idx = []
        for i, link in enumerate(chain.links):
            for p in link.geometry:
                prims.append(p)
                idx.append(i)
        self.prims = prims
        self.link_idx = np.array(idx, dtype=int)
        self.local_a = np.array([p.a for p in prims]).reshape(-1, 3)
        self.local_b = np.array([p.b for p in prims]).reshape(-1, 3)
        self.radius = np.array([p.radius for p in prims])
        ignore = set(ignore)
        statics = list(scene.static_obstacles)
        for name, tree in scene.objects.items():
            if name in ignore or any(l.name in link_pos for l in tree.links):
                continue
            statics.extend(g for g in scene.object_geometry(name) if g.link not in ignore)
        self.statics = statics
        sa = np.array([p.a for p in statics]).reshape(-1, 3)
        sb = np.array([p.b for p in statics]).reshape(-1, 3)
        sr = np.array([p.radius for p in statics])
        self_pairs = [
            (i, j)
            for i in range(len(prims))
            for j in range(i + 1, len(prims))
            if abs(idx[i] - idx[j]) > 1
        ]
        self.self_pairs = np.array(self_pairs, dtype=int).reshape(-1, 2)
        self.n_self = len(self_pairs)
        self.n_static = len(prims) * len(statics)
        self.static_a = sa
        self.static_b = sb
        self.static_r = sr

    @property
    def n_pairs(self) -> int:
        return self.n_self + self.n_static

    def posed(self, q) -> tuple[np.ndarray, np.ndarray]:
        mats = fk_matrices(self.chain, q)
        M = mats[self.link_idx]
        A = np.einsum("kij,kj->ki", M[:, :3, :3], self.local_a) + M[:, :3, 3]
        B = np.einsum("kij,kj->ki", M[:, :3, :3], self.local_b) + M[:, :3, 3]
        return A, B

    def distances(self, q) -> np.ndarray:
        """Signed distances of all pairs: self pairs first, then chain x static."""
        if not self.prims:
            return np.zeros(0)
        A, B = self.posed(q)
        out = []
        if self.n_self:
            i, j = self.self_pairs[:, 0], self.self_pairs[:, 1]
            d = segment_distance(A[i], B[i], A[j], B[j]) - self.radius[i] - self.radius[j]
            out.append(d)
        if len(self.statics):
            d = segment_distance(A[:, None, :], B[:, None, :], self.static_a[None], self.static_b[None])
            d = d - self.radius[:, None] - self.static_r[None, :]
            out.append(d.ravel())
        return np.concatenate(out) if out else np.zeros(0)

    def pair(self, k: int) -> tuple:
        if k < self.n_self:
            i, j = self.self_pairs[k]
            return self.prims[i], self.prims[j]
        k -= self.n_self
        i, s = divmod(k, len(self.statics))
        return self.prims[i], self.statics[s]

    def report(self, q, safety_margin: float = 0.0) -> CollisionReport:
        d = self.distances(q)
        if d.size == 0:
            return CollisionReport(False, math.inf, ())
        k = int(np.argmin(d))
        return CollisionReport(bool(d[k] < safety_margin), float(d[k]), self.pair(k))


def check_collision(scene: "Scene", chain: SerialChain, q, safety_margin: float = 0.0,
                    ignore: Iterable[str] = ()) -> CollisionReport:
    """Self (non-adjacent links) and environment collision check at ``q``.

    ``in_collision`` compares the minimum signed distance with the margin.
    """
    return CollisionModel(scene, chain, ignore).report(q, safety_margin)


# ---------------------------------------------------------------------------
# scene


@dataclass(frozen=True)
class Scene:
    robot: KinematicTree | None = None
    objects: dict = field(default_factory=dict)
    static_obstacles: tuple = ()
    placements: dict = field(default_factory=dict)
    grasps: dict = field(default_factory=dict)
    object_poses: dict = field(default_factory=dict)
    object_configs: dict = field(default_factory=dict)  # object -> {joint: value}
    joint_states: dict = field(default_factory=dict)  # id -> (object, joint, value)
    configs: dict = field(default_factory=dict)  # id -> (group, values)

    def __post_init__(self):
        object.__setattr__(self, "static_obstacles", tuple(self.static_obstacles))
        for (obj, gid) in self.grasps:
            if obj not in self.objects:
                raise SceneError(f"grasp {gid!r} references unknown object {obj!r}")
        for sid, (obj, joint, _) in self.joint_states.items():
            if obj not in self.objects:
                raise SceneError(f"joint state {sid!r} references unknown object {obj!r}")
            self.objects[obj].joint(joint)
        seen = {}
        trees = ([("robot", self.robot)] if self.robot else []) + list(self.objects.items())
        for owner, tree in trees:
            for l in tree.links:
                if l.name in seen:
                    raise SceneError(f"link name {l.name!r} used by both {seen[l.name]} and {owner}")
                seen[l.name] = owner

    # -- object helpers ------------------------------------------------------
    def object_pose(self, name: str) -> Transform:
        return self.object_poses.get(name, Transform.identity())

    def object_full_chain(self, name: str) -> tuple[SerialChain, np.ndarray]:
        """Chain from the object root to its attachable link, and its joint values."""
        tree = self.objects[name]
        tip = tree.find_frame("at")
        chain = tree.chain_to(tip, "object", self.object_pose(name), root_frame=None)
        values = self.object_configs.get(name, {})
        q = np.array([values.get(j.name, 0.0) for j in chain.active_joints])
        return chain, q

    def object_link_poses(self, name: str) -> dict[str, Transform]:
        """World pose of every link of an object tree at its current joint values."""
        tree = self.objects[name]
        values = self.object_configs.get(name, {})
        poses = {tree.root: self.object_pose(name)}
        pending = [l.name for l in tree.links if l.name != tree.root]
        while pending:
            rest = []
            for lname in pending:
                parent, jname = tree.topology[lname]
                if parent not in poses:
                    rest.append(lname)
                    continue
                j = tree.joint(jname)
                poses[lname] = poses[parent] @ j.transform(values.get(jname, 0.0))
            pending = rest
        return poses

    def object_geometry(self, name: str) -> list[CollisionPrimitive]:
        poses = self.object_link_poses(name)
        tree = self.objects[name]
        return [p.at(poses[l.name], l.name) for l in tree.links for p in l.geometry]

    def robot_chain(self, virtual_base: bool = True) -> SerialChain:
        if self.robot is None:
            raise SceneError("scene has no robot")
        tip = self.robot.find_frame("ee")
        chain = self.robot.chain_to(tip, "robot")
        return add_virtual_base(chain) if virtual_base else chain

    def with_object_state(self, name: str, pose: Transform, joint_values: dict | None = None) -> "Scene":
        poses = dict(self.object_poses)
        poses[name] = pose
        configs = dict(self.object_configs)
        if joint_values is not None:
            configs[name] = dict(joint_values)
        return replace(self, object_poses=poses, object_configs=configs)

    def is_empty(self) -> bool:
        return (self.robot is None and not self.objects and not self.static_obstacles
                and not self.placements and not self.grasps)


# ---------------------------------------------------------------------------
# file format


def _num(node: SExpr) -> float:
    if not isinstance(node, Atom):
        raise SceneError("expected a number", node.line, node.column)
    try:
        return float(node.text)
    except ValueError:
        raise SceneError(f"expected a number, got {node.text!r}", node.line, node.column) from None


def _vec(node: SExpr, n: int = 3) -> tuple:
    if not isinstance(node, SList) or len(node) != n:
        raise SceneError(f"expected a list of {n} numbers", node.line, node.column)
    return tuple(_num(c) for c in node)


def _name(node: SExpr) -> str:
    if not isinstance(node, Atom):
        raise SceneError("expected a name", node.line, node.column)
    return node.text


def _expect_list(node: SExpr, what: str) -> SList:
    if not isinstance(node, SList) or not node.head():
        raise SceneError(f"expected a ({what} ...) form", node.line, node.column)
    return node


def _pose(xyz: SExpr, rpy: SExpr) -> Transform:
    return Transform.from_xyz_rpy(_vec(xyz), _vec(rpy))


def _read_prim(node: SList, link: str) -> CollisionPrimitive:
    head = node.head()
    try:
        if head == "sphere":
            return CollisionPrimitive.sphere(_num(node[1]), _vec(node[2]), link)
        if head == "capsule":
            return CollisionPrimitive.capsule(_num(node[1]), _vec(node[2]), _vec(node[3]), link)
    except IndexError:
        raise SceneError(f"incomplete {head} form", node.line, node.column) from None
    except SceneError as e:
        if e.line:
            raise
        raise SceneError(str(e), node.line, node.column) from None
    raise SceneError(f"unknown shape {head!r}", node.line, node.column)


def _read_tree(items, where: SList) -> tuple[KinematicTree, dict]:
    links, joints, topology = [], [], {}
    root = None
    extras = {}
    for it in items:
        it = _expect_list(it, "link|joint|root")
        head = it.head()
        if head == "root":
            root = _name(it[1])
        elif head == "link":
            lname = _name(it[1])
            geom, frames = [], {}
            for sub in it.children[2:]:
                sub = _expect_list(sub, "sphere|capsule|frame")
                if sub.head() == "frame":
                    frames[_name(sub[1])] = _pose(sub[2], sub[3])
                else:
                    geom.append(_read_prim(sub, lname))
            links.append(Link(lname, tuple(geom), frames))
        elif head == "joint":
            jname, kind, parent, child = (_name(x) for x in it.children[1:5])
            opts = {"axis": (0.0, 0.0, 1.0), "origin": Transform.identity(), "limits": (0.0, 0.0),
                    "vel_bound": 1.0, "acc_bound": 1.0}
            for sub in it.children[5:]:
                sub = _expect_list(sub, "axis|origin|limits|vel|acc")
                h = sub.head()
                if h == "axis":
                    opts["axis"] = tuple(_num(c) for c in sub.children[1:4])
                elif h == "origin":
                    opts["origin"] = _pose(sub[1], sub[2])
                elif h == "limits":
                    opts["limits"] = (_num(sub[1]), _num(sub[2]))
                elif h == "vel":
                    opts["vel_bound"] = _num(sub[1])
                elif h == "acc":
                    opts["acc_bound"] = _num(sub[1])
                else:
                    raise SceneError(f"unknown joint option {h!r}", sub.line, sub.column)
            try:
                joints.append(Joint(jname, kind, **opts))
            except ValueError as e:
                raise SceneError(str(e), it.line, it.column) from None
            topology[child] = (parent, jname)
        else:
            extras.setdefault(head, []).append(it)
    if root is None:
        if not links:
            raise SceneError("kinematic tree has no links", where.line, where.column)
        root = links[0].name
    try:
        tree = KinematicTree(tuple(links), tuple(joints), topology, root)
    except ValueError as e:
        raise SceneError(str(e), where.line, where.column) from None
    return tree, extras


def parse_scene(text: str) -> Scene:
    forms = parse_all(text)
    robot = None
    objects, poses, configs = {}, {}, {}
    obstacles, placements, grasps, jstates, named_configs = [], {}, {}, {}, {}
    for form in forms:
        form = _expect_list(form, "robot|object|obstacle|placement|grasp")
        head = form.head()
        try:
            if head == "robot":
                robot, _ = _read_tree(form.children[1:], form)
            elif head == "object":
                name = _name(form[1])
                if name in objects:
                    raise SceneError(f"duplicate object {name!r}", form.line, form.column)
                tree, extras = _read_tree(form.children[2:], form)
                objects[name] = tree
                for p in extras.pop("pose", []):
                    poses[name] = _pose(p[1], p[2])
                for s in extras.pop("state", []):
                    configs.setdefault(name, {})[_name(s[1])] = _num(s[2])
                if extras:
                    bad = next(iter(extras.values()))[0]
                    raise SceneError(f"unknown object form {bad.head()!r}", bad.line, bad.column)
            elif head == "obstacle":
                for sub in form.children[1:]:
                    obstacles.append(_read_prim(_expect_list(sub, "sphere|capsule"), "world"))
            elif head == "placement":
                pid = _name(form[1])
                if pid in placements:
                    raise SceneError(f"duplicate placement {pid!r}", form.line, form.column)
                placements[pid] = _pose(form[2], form[3])
            elif head == "joint-state":
                sid = _name(form[1])
                if sid in jstates:
                    raise SceneError(f"duplicate joint state {sid!r}", form.line, form.column)
                jstates[sid] = (_name(form[2]), _name(form[3]), _num(form[4]))
            elif head == "grasp":
                key = (_name(form[1]), _name(form[2]))
                if key in grasps:
                    raise SceneError(f"duplicate grasp {key!r}", form.line, form.column)
                grasps[key] = _pose(form[3], form[4])
            elif head == "config":
                named_configs[_name(form[1])] = (_name(form[2]), tuple(_num(c) for c in form.children[3:]))
            else:
                raise SceneError(f"unknown top-level form {head!r}", form.line, form.column)
        except IndexError:
            raise SceneError(f"incomplete ({head} ...) form", form.line, form.column) from None
    try:
        return Scene(robot, objects, tuple(obstacles), placements, grasps, poses, configs,
                     jstates, named_configs)
    except KeyError as e:
        raise SceneError(f"unknown joint {e}") from None


def load_scene(path) -> Scene:
    return parse_scene(Path(path).read_text(encoding="utf-8"))


def _fmt(v: float) -> str:
    v = float(v)
    if v == 0.0:
        return "0"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _vec_node(v) -> SList:
    return lst(*(_fmt(x) for x in v))


def _pose_nodes(t: Transform) -> tuple[SList, SList]:
    return _vec_node(t.translation), _vec_node(t.rpy())


def _prim_node(p: CollisionPrimitive) -> SList:
    if p.shape == "sphere":
        return lst("sphere", _fmt(p.radius), _vec_node(p.a))
    return lst("capsule", _fmt(p.radius), _vec_node(p.a), _vec_node(p.b))


def _tree_nodes(tree: KinematicTree) -> list[SList]:
    out = [lst("root", tree.root)]
    for l in tree.links:
        items = ["link", l.name] + [_prim_node(p) for p in l.geometry]
        items += [lst("frame", k, *_pose_nodes(v)) for k, v in l.named_frames.items()]
        out.append(lst(*items))
    parents = {jn: (parent, child) for child, (parent, jn) in tree.topology.items()}
    for j in tree.joints:
        parent, child = parents[j.name]
        items = ["joint", j.name, j.kind, parent, child]
        if not j.is_fixed:
            items.append(lst("axis", *(_fmt(a) for a in j.axis)))
        items.append(lst("origin", *_pose_nodes(j.origin)))
        if not j.is_fixed:
            items.append(lst("limits", _fmt(j.limits[0]), _fmt(j.limits[1])))
        items += [lst("vel", _fmt(j.vel_bound)), lst("acc", _fmt(j.acc_bound))]
        out.append(lst(*items))
    return out


def format_scene(scene: Scene) -> str:
    forms = []
    if scene.robot is not None:
        forms.append(lst("robot", *_tree_nodes(scene.robot)))
    for name, tree in scene.objects.items():
        items = ["object", name]
        if name in scene.object_poses:
            items.append(lst("pose", *_pose_nodes(scene.object_poses[name])))
        for jn, v in scene.object_configs.get(name, {}).items():
            items.append(lst("state", jn, _fmt(v)))
        items += _tree_nodes(tree)
        forms.append(lst(*items))
    if scene.static_obstacles:
        forms.append(lst("obstacle", *(_prim_node(p) for p in scene.static_obstacles)))
    for pid, t in scene.placements.items():
        forms.append(lst("placement", pid, *_pose_nodes(t)))
    for sid, (obj, jn, v) in scene.joint_states.items():
        forms.append(lst("joint-state", sid, obj, jn, _fmt(v)))
    for (obj, gid), t in scene.grasps.items():
        forms.append(lst("grasp", obj, gid, *_pose_nodes(t)))
    for cid, (group, values) in scene.configs.items():
        forms.append(lst("config", cid, group, *(_fmt(v) for v in values)))
    return "\n".join(to_string(f) for f in forms) + ("\n" if forms else "")


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(format_scene(scene), encoding="utf-8")


__all__ = [
    "CollisionModel",
    "CollisionPrimitive",
    "CollisionReport",
    "ParseError",
    "Scene",
    "SceneError",
    "check_collision",
    "format_scene",
    "load_scene",
    "parse_scene",
    "save_scene",
    "segment_distance",
    "signed_distance",
]
