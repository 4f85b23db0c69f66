"""Rigid transforms, kinematic trees and serial chains.

A :class:`SerialChain` is the working structure for every planner in the
package: a root link placed in the world by ``base_pose`` followed by an
ordered list of ``(joint, child_link)`` segments.  Each joint maps its parent
link frame to its child link frame by ``origin @ motion(q) @ post``.  ``post``
is the identity for joints read from model files; it becomes non-trivial for
inverted joints and for attachment joints, which need a constant offset on
the child side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

JOINT_KINDS = (
    "revolute",
    "prismatic",
    "fixed",
    "virtual-revolute",
    "virtual-prismatic",
    "virtual-fixed",
)
SEGMENT_TAGS = ("virtual-base", "robot", "attachment", "object")

BASE_JOINT_NAMES = ("base_x", "base_y", "base_yaw")
BASE_TRANSLATION_LIMIT = 50.0

_ORTHO_TOL = 1e-9


class KinematicsError(ValueError):
    """Raised when a kinematic contract is violated."""


class FrameNotFound(KeyError):
    pass


# ---------------------------------------------------------------------------
# rotations


def rot_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    C = 1.0 - c
    return np.array(
        [
            [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
            [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
            [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
        ]
    )


def rpy_to_matrix(rpy: Sequence[float]) -> np.ndarray:
    r, p, y = rpy
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def matrix_to_rpy(R: np.ndarray) -> tuple[float, float, float]:
    sp = -R[2, 0]
    if abs(sp) >= 1.0 - 1e-12:
        # gimbal lock: fold roll into yaw
        p = math.copysign(math.pi / 2, sp)
        y = math.atan2(-R[0, 1], R[1, 1])
        return 0.0, p, y
    p = math.asin(sp)
    r = math.atan2(R[2, 1], R[2, 2])
    y = math.atan2(R[1, 0], R[0, 0])
    return r, p, y


def rotation_log(R: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of a rotation matrix."""
    cos_theta = (np.trace(R) - 1.0) / 2.0
    cos_theta = min(1.0, max(-1.0, cos_theta))
    theta = math.acos(cos_theta)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-9:
        return 0.5 * w
    if math.pi - theta < 1e-6:
        # near pi the antisymmetric part vanishes; use the symmetric part
        B = 0.5 * (R + np.eye(3))
        k = int(np.argmax(np.diag(B)))
        axis = B[:, k] / math.sqrt(max(B[k, k], 1e-300))
        if w @ axis < 0:
            axis = -axis
        return theta * axis / np.linalg.norm(axis)
    return theta / (2.0 * math.sin(theta)) * w


def wrap_angle(a: float) -> float:
    """Normalize to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def yaw_of(R: np.ndarray) -> float:
    return math.atan2(R[1, 0], R[0, 0])


# ---------------------------------------------------------------------------
# Transform


class Transform:
    """Rigid-body pose: a rotation matrix and a translation vector."""

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation=None, translation=None, *, check: bool = True):
        R = np.eye(3) if rotation is None else np.array(rotation, dtype=float)
        p = np.zeros(3) if translation is None else np.array(translation, dtype=float)
        if R.shape != (3, 3) or p.shape != (3,):
            raise KinematicsError("rotation must be 3x3 and translation a 3-vector")
        if check:
            err = np.abs(R.T @ R - np.eye(3)).max()
            det = np.linalg.det(R)
            if err > _ORTHO_TOL or abs(det - 1.0) > _ORTHO_TOL:
                raise KinematicsError(
                    f"rotation is not a proper orthonormal matrix (|RtR-I|={err:.3g}, det={det:.12g})"
                )
        R.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", p)

    def __setattr__(self, name, value):
        raise AttributeError("Transform is immutable")

    @classmethod
    def identity(cls) -> "Transform":
        return cls(check=False)

    @classmethod
    def from_matrix(cls, M: np.ndarray, check: bool = True) -> "Transform":
        M = np.asarray(M, dtype=float)
        return cls(M[:3, :3], M[:3, 3], check=check)

    @classmethod
    def from_xyz_rpy(cls, xyz=(0.0, 0.0, 0.0), rpy=(0.0, 0.0, 0.0)) -> "Transform":
        return cls(rpy_to_matrix(rpy), xyz, check=False)

    @classmethod
    def planar(cls, x: float, y: float, yaw: float, z: float = 0.0) -> "Transform":
        return cls(rot_axis(np.array([0.0, 0.0, 1.0]), yaw), (x, y, z), check=False)

    @property
    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def rpy(self) -> tuple[float, float, float]:
        return matrix_to_rpy(self.rotation)

    def __matmul__(self, other: "Transform") -> "Transform":
        R = self.rotation @ other.rotation
        p = self.rotation @ other.translation + self.translation
        return Transform(R, p, check=False)

    compose = __matmul__

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.rotation.T + self.translation

    def inverse(self) -> "Transform":
        return invert_transform(self)

    def orthonormalized(self) -> "Transform":
        """Project the rotation back onto SO(3) (polar decomposition)."""
        U, _, Vt = np.linalg.svd(self.rotation)
        R = U @ Vt
        if np.linalg.det(R) < 0:
            U[:, -1] *= -1
            R = U @ Vt
        return Transform(R, self.translation, check=False)

    def allclose(self, other: "Transform", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=atol, rtol=0)
            and np.allclose(self.translation, other.translation, atol=atol, rtol=0)
        )

    def __eq__(self, other):
        if not isinstance(other, Transform):
            return NotImplemented
        return bool(
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))

    def __repr__(self):
        xyz = ", ".join(f"{v:.4g}" for v in self.translation)
        rpy = ", ".join(f"{v:.4g}" for v in self.rpy())
        return f"Transform(xyz=({xyz}), rpy=({rpy}))"


def invert_transform(t: Transform) -> Transform:
    """Inverse of a rigid transform: ``(R^T, -R^T p)``."""
    R = t.rotation
    err = np.abs(R.T @ R - np.eye(3)).max()
    if err > _ORTHO_TOL or abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
        raise KinematicsError("cannot invert a transform with a non-orthonormal rotation")
    Rt = R.T
    return Transform(Rt, -Rt @ t.translation, check=False)


def _maybe_reproject(M: np.ndarray) -> np.ndarray:
    R = M[:3, :3]
    if np.abs(R.T @ R - np.eye(3)).max() > _ORTHO_TOL:
        M = M.copy()
        M[:3, :3] = Transform(R, M[:3, 3], check=False).orthonormalized().rotation
    return M


# ---------------------------------------------------------------------------
# structure


@dataclass(frozen=True, eq=False)
class Joint:
    name: str
    kind: str
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    origin: Transform = field(default_factory=Transform.identity)
    limits: tuple[float, float] = (0.0, 0.0)
    vel_bound: float = 1.0
    acc_bound: float = 1.0
    post: Transform = field(default_factory=Transform.identity)
    continuous: bool = False

    def __post_init__(self):
        if self.kind not in JOINT_KINDS:
            raise KinematicsError(f"unknown joint kind {self.kind!r}")
        axis = np.array(self.axis, dtype=float)
        lo, hi = float(self.limits[0]), float(self.limits[1])
        if self.is_fixed:
            lo = hi = 0.0
        else:
            n = np.linalg.norm(axis)
            if n == 0.0:
                raise KinematicsError(f"joint {self.name}: zero axis")
            if abs(n - 1.0) > 1e-12:
                axis = axis / n
        if lo > hi:
            raise KinematicsError(f"joint {self.name}: lower limit {lo} > upper limit {hi}")
        if self.vel_bound < 0 or self.acc_bound < 0:
            raise KinematicsError(f"joint {self.name}: negative bound")
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "limits", (lo, hi))

    @property
    def is_fixed(self) -> bool:
        return self.kind in ("fixed", "virtual-fixed")

    @property
    def is_revolute(self) -> bool:
        return self.kind in ("revolute", "virtual-revolute")

    @property
    def is_prismatic(self) -> bool:
        return self.kind in ("prismatic", "virtual-prismatic")

    @property
    def is_virtual(self) -> bool:
        return self.kind.startswith("virtual")

    def motion(self, q: float) -> np.ndarray:
        M = np.eye(4)
        if self.is_revolute:
            M[:3, :3] = rot_axis(self.axis, q)
        elif self.is_prismatic:
            M[:3, 3] = self.axis * q
        return M

    def transform(self, q: float = 0.0) -> Transform:
        M = self.origin.matrix @ self.motion(q) @ self.post.matrix
        return Transform.from_matrix(M, check=False)

    def same_as(self, other: "Joint", atol: float = 1e-9) -> bool:
        return (
            self.name == other.name
            and self.kind == other.kind
            and np.allclose(self.axis, other.axis, atol=atol)
            and self.origin.allclose(other.origin, atol)
            and self.post.allclose(other.post, atol)
            and self.limits == other.limits
            and self.vel_bound == other.vel_bound
            and self.acc_bound == other.acc_bound
        )


@dataclass(frozen=True, eq=False)
class Link:
    name: str
    geometry: tuple = ()
    named_frames: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "geometry", tuple(self.geometry))
        object.__setattr__(self, "named_frames", dict(self.named_frames))

    def frame(self, label: str) -> Transform:
        try:
            return self.named_frames[label]
        except KeyError:
            raise FrameNotFound(f"link {self.name!r} has no frame {label!r}") from None


@dataclass(frozen=True, eq=False)
class KinematicTree:
    links: tuple
    joints: tuple
    topology: dict  # child link -> (parent link, joint name)
    root: str

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "topology", dict(self.topology))
        names = [l.name for l in self.links]
        if len(set(names)) != len(names):
            raise KinematicsError("duplicate link names")
        link_set = set(names)
        if self.root not in link_set:
            raise KinematicsError(f"root link {self.root!r} not in tree")
        if self.root in self.topology:
            raise KinematicsError("root link has a parent")
        joint_names = {j.name for j in self.joints}
        for child, (parent, jname) in self.topology.items():
            if child not in link_set or parent not in link_set:
                raise KinematicsError(f"topology references unknown link ({parent}->{child})")
            if jname not in joint_names:
                raise KinematicsError(f"topology references unknown joint {jname!r}")
        for name in names:
            if name == self.root:
                continue
            if name not in self.topology:
                raise KinematicsError(f"link {name!r} has no parent")
            seen = {name}
            cur = name
            while cur != self.root:
                cur = self.topology[cur][0]
                if cur in seen:
                    raise KinematicsError("kinematic tree contains a cycle")
                seen.add(cur)

    def link(self, name: str) -> Link:
        for l in self.links:
            if l.name == name:
                return l
        raise KeyError(name)

    def joint(self, name: str) -> Joint:
        for j in self.joints:
            if j.name == name:
                return j
        raise KeyError(name)

    def find_frame(self, label: str) -> str:
        """Name of the (unique) link carrying a frame label."""
        hits = [l.name for l in self.links if label in l.named_frames]
        if not hits:
            raise FrameNotFound(f"no link carries frame {label!r}")
        if len(hits) > 1:
            raise KinematicsError(f"frame {label!r} is ambiguous: {hits}")
        return hits[0]

    def chain_to(self, tip: str, tag: str, base_pose: Transform | None = None,
                 root_frame: str | None = None) -> "SerialChain":
        """Serial chain from the root link down to ``tip``."""
        path = []
        cur = tip
        while cur != self.root:
            parent, jname = self.topology[cur]
            path.append((self.joint(jname), self.link(cur)))
            cur = parent
        path.reverse()
        return SerialChain(
            root=self.link(self.root),
            segments=tuple(path),
            tags=tuple(tag for _ in path),
            base_pose=base_pose or Transform.identity(),
            root_frame=root_frame,
        )


@dataclass(frozen=True, eq=False)
class SerialChain:
    root: Link
    segments: tuple  # ((Joint, Link), ...)
    tags: tuple
    base_pose: Transform = field(default_factory=Transform.identity)
    root_frame: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(tuple(s) for s in self.segments))
        object.__setattr__(self, "tags", tuple(self.tags))
        if len(self.tags) != len(self.segments):
            raise KinematicsError("one segment tag per joint required")
        for t in self.tags:
            if t not in SEGMENT_TAGS:
                raise KinematicsError(f"unknown segment tag {t!r}")
        names = [self.root.name] + [l.name for _, l in self.segments]
        if len(set(names)) != len(names):
            raise KinematicsError("chain is not serial: a link appears twice")
        jn = [j.name for j, _ in self.segments]
        if len(set(jn)) != len(jn):
            raise KinematicsError("duplicate joint names in chain")

    # -- structure -----------------------------------------------------------
    @property
    def joints(self) -> list[Joint]:
        return [j for j, _ in self.segments]

    @property
    def links(self) -> list[Link]:
        return [self.root] + [l for _, l in self.segments]

    @property
    def tip(self) -> Link:
        return self.segments[-1][1] if self.segments else self.root

    @cached_property
    def active(self) -> tuple[int, ...]:
        """Indices of non-fixed joints (configuration entries)."""
        return tuple(i for i, (j, _) in enumerate(self.segments) if not j.is_fixed)

    @property
    def dof(self) -> int:
        return len(self.active)

    @cached_property
    def active_joints(self) -> tuple[Joint, ...]:
        return tuple(self.segments[i][0] for i in self.active)

    @cached_property
    def active_names(self) -> tuple[str, ...]:
        return tuple(j.name for j in self.active_joints)

    @cached_property
    def active_tags(self) -> tuple[str, ...]:
        return tuple(self.tags[i] for i in self.active)

    @cached_property
    def lower(self) -> np.ndarray:
        return np.array([j.limits[0] if not j.continuous else -np.inf for j in self.active_joints])

    @cached_property
    def upper(self) -> np.ndarray:
        return np.array([j.limits[1] if not j.continuous else np.inf for j in self.active_joints])

    @cached_property
    def vel_bounds(self) -> np.ndarray:
        return np.array([j.vel_bound for j in self.active_joints])

    @cached_property
    def acc_bounds(self) -> np.ndarray:
        return np.array([j.acc_bound for j in self.active_joints])

    def index_of(self, joint_name: str) -> int:
        """Configuration index of an active joint."""
        return self.active_names.index(joint_name)

    def link_index(self, link_name: str) -> int:
        for i, l in enumerate(self.links):
            if l.name == link_name:
                return i
        raise KeyError(link_name)

    def indices_tagged(self, *tags: str) -> list[int]:
        return [k for k, t in enumerate(self.active_tags) if t in tags]

    @cached_property
    def _kernel(self):
        n = len(self.segments)
        origins = np.empty((n, 4, 4))
        posts = np.empty((n, 4, 4))
        kinds = np.zeros(n, dtype=int)  # 0 fixed, 1 revolute, 2 prismatic
        axes = np.zeros((n, 3))
        for i, (j, _) in enumerate(self.segments):
            origins[i] = j.origin.matrix
            posts[i] = j.post.matrix
            axes[i] = j.axis
            kinds[i] = 0 if j.is_fixed else (1 if j.is_revolute else 2)
        post_is_identity = [bool(np.array_equal(posts[i], np.eye(4))) for i in range(n)]
        return origins, posts, kinds, axes, post_is_identity

    def full_values(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise KinematicsError(f"configuration has shape {q.shape}, chain needs ({self.dof},)")
        v = np.zeros(len(self.segments))
        v[list(self.active)] = q
        return v

    def within_limits(self, q, tol: float = 0.0) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.lower - tol) and np.all(q <= self.upper + tol))

    def clip(self, q) -> np.ndarray:
        return np.clip(np.asarray(q, dtype=float), self.lower, self.upper)

    def same_structure(self, other: "SerialChain", atol: float = 1e-9) -> bool:
        if len(self.segments) != len(other.segments) or self.tags != other.tags:
            return False
        if [l.name for l in self.links] != [l.name for l in other.links]:
            return False
        return all(a.same_as(b, atol) for a, b in zip(self.joints, other.joints)) and \
            self.base_pose.allclose(other.base_pose, atol)


class Poses(list):
    """World poses of every chain link; ``out_of_limits`` lists violating joints."""

    out_of_limits: tuple = ()


def fk_matrices(chain: SerialChain, q) -> np.ndarray:
    """(n_links, 4, 4) world homogeneous matrices; the hot path for solvers."""
    vals = chain.full_values(q)
    origins, posts, kinds, axes, post_id = chain._kernel
    n = len(vals)
    out = np.empty((n + 1, 4, 4))
    cur = chain.base_pose.matrix
    out[0] = cur
    for i in range(n):
        M = cur @ origins[i]
        k = kinds[i]
        if k == 1:
            M[:3, :3] = M[:3, :3] @ rot_axis(axes[i], vals[i])
        elif k == 2:
            M[:3, 3] += M[:3, :3] @ (axes[i] * vals[i])
        if not post_id[i]:
            M = M @ posts[i]
        cur = M
        out[i + 1] = cur
    if n > 64:
        out[-1] = _maybe_reproject(out[-1])
    return out


def forward_kinematics(chain: SerialChain, q) -> Poses:
    """World pose of every link (root first) at configuration ``q``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.dof,):
        raise KinematicsError(f"configuration has shape {q.shape}, chain needs ({chain.dof},)")
    if not np.all(np.isfinite(q)):
        raise KinematicsError("configuration contains non-finite values")
    mats = fk_matrices(chain, q)
    poses = Poses(Transform.from_matrix(M, check=False) for M in mats)
    bad = np.nonzero((q < chain.lower) | (q > chain.upper))[0]
    poses.out_of_limits = tuple(chain.active_names[i] for i in bad)
    return poses


def relative_pose(poses: Sequence[Transform], a: int, b: int) -> Transform:
    """Pose of link ``b`` expressed in link ``a``."""
    return invert_transform(poses[a]) @ poses[b]


# ---------------------------------------------------------------------------
# chain surgery


def _invert_joint(j: Joint) -> Joint:
    # (O M(a,q) P)^-1 = P^-1 M(-a,q) O^-1
    return replace(
        j,
        axis=-j.axis if not j.is_fixed else j.axis,
        origin=invert_transform(j.post),
        post=invert_transform(j.origin),
    )


def invert_chain(chain: SerialChain, new_root_frame: str = "at", q=None) -> SerialChain:
    """Reverse the chain so that its tip link becomes the root.

    Joint values keep their meaning: the inverted chain evaluated at the
    reversed configuration reproduces every relative link pose.  The new
    root is placed at the tip's world pose for ``q`` (default: zeros clipped
    into the joint limits).
    """
    if new_root_frame not in chain.tip.named_frames:
        raise FrameNotFound(f"tip link {chain.tip.name!r} has no frame {new_root_frame!r}")
    if q is None:
        q = chain.clip(np.zeros(chain.dof))
    tip_pose = Transform.from_matrix(fk_matrices(chain, q)[-1], check=False)
    links = chain.links
    segs = []
    n = len(chain.segments)
    for i in range(n - 1, -1, -1):
        joint = chain.segments[i][0]
        segs.append((_invert_joint(joint), links[i]))
    return SerialChain(
        root=chain.tip,
        segments=tuple(segs),
        tags=tuple(reversed(chain.tags)),
        base_pose=tip_pose,
        root_frame=new_root_frame,
    )


def attach(robot_chain: SerialChain, object_chain_inverted: SerialChain, virtual_joint: Joint,
           grasp: Transform, ee_frame: str = "ee") -> SerialChain:
    """Join an inverted object chain to the robot's end-effector.

    ``grasp`` is the pose of the object's attachable frame in the
    end-effector frame.  The virtual joint is placed at the end-effector
    frame composed with ``grasp`` and its child side is offset so that the
    object's root link frame lands where the attachable frame says.
    """
    tip = robot_chain.tip
    if ee_frame not in tip.named_frames:
        raise FrameNotFound(f"robot tip link {tip.name!r} has no frame {ee_frame!r}")
    at_label = object_chain_inverted.root_frame or "at"
    obj_root = object_chain_inverted.root
    if at_label not in obj_root.named_frames:
        raise FrameNotFound(f"object root link {obj_root.name!r} has no frame {at_label!r}")
    if not virtual_joint.is_virtual:
        raise KinematicsError("attachment joint must be of a virtual kind")
    vj = replace(
        virtual_joint,
        origin=tip.frame(ee_frame) @ grasp,
        post=invert_transform(obj_root.frame(at_label)),
    )
    return SerialChain(
        root=robot_chain.root,
        segments=robot_chain.segments + ((vj, obj_root),) + object_chain_inverted.segments,
        tags=robot_chain.tags + ("attachment",) + object_chain_inverted.tags,
        base_pose=robot_chain.base_pose,
        root_frame=robot_chain.root_frame,
    )


class Detached(NamedTuple):
    robot_chain: SerialChain
    object_chain: SerialChain
    object_pose: Transform
    robot_q: np.ndarray
    object_q: np.ndarray


def detach(vkc: SerialChain, q) -> Detached:
    """Break the VKC at its outermost attachment joint.

    The object segment is re-inverted back to the object's own root, which
    is placed at its world pose for configuration ``q``.
    """
    q = np.asarray(q, dtype=float)
    idx = [i for i, t in enumerate(vkc.tags) if t == "attachment"]
    if not idx:
        raise KinematicsError("chain has no attachment joint")
    k = idx[-1]
    mats = fk_matrices(vkc, q)
    vals = vkc.full_values(q)
    robot = SerialChain(
        root=vkc.root,
        segments=vkc.segments[:k],
        tags=vkc.tags[:k],
        base_pose=vkc.base_pose,
        root_frame=vkc.root_frame,
    )
    attached_link = vkc.segments[k][1]
    inv_obj = SerialChain(
        root=attached_link,
        segments=vkc.segments[k + 1:],
        tags=vkc.tags[k + 1:],
        base_pose=Transform.from_matrix(mats[k + 1], check=False),
        root_frame="at",
    )
    obj_vals = vals[k + 1:]
    inv_q = np.array([obj_vals[i] for i in inv_obj.active])
    # re-invert back to the object's own root; the tip of the inverted chain
    # carries no attach frame requirement, so rebuild directly
    links = inv_obj.links
    segs = []
    for i in range(len(inv_obj.segments) - 1, -1, -1):
        segs.append((_invert_joint(inv_obj.segments[i][0]), links[i]))
    obj_pose = Transform.from_matrix(mats[-1], check=False)
    obj_chain = SerialChain(
        root=inv_obj.tip,
        segments=tuple(segs),
        tags=tuple(reversed(inv_obj.tags)),
        base_pose=obj_pose,
        root_frame=None,
    )
    robot_q = np.array([vals[i] for i in robot.active])
    return Detached(robot, obj_chain, obj_pose, robot_q, inv_q[::-1].copy())


def add_virtual_base(robot_chain: SerialChain, vel_bounds=(0.5, 0.5, 1.0),
                     acc_bounds=(1.0, 1.0, 2.0)) -> SerialChain:
    """Prepend planar x / y / yaw virtual joints below the robot base."""
    if "virtual-base" in robot_chain.tags:
        raise KinematicsError("chain already has a virtual base")
    L = BASE_TRANSLATION_LIMIT
    jx = Joint("base_x", "virtual-prismatic", (1, 0, 0), limits=(-L, L),
               vel_bound=vel_bounds[0], acc_bound=acc_bounds[0])
    jy = Joint("base_y", "virtual-prismatic", (0, 1, 0), limits=(-L, L),
               vel_bound=vel_bounds[1], acc_bound=acc_bounds[1])
    jt = Joint("base_yaw", "virtual-revolute", (0, 0, 1), limits=(-math.pi, math.pi),
               vel_bound=vel_bounds[2], acc_bound=acc_bounds[2], continuous=True)
    world = Link("world")
    lx = Link("base_x_link")
    ly = Link("base_y_link")
    segs = ((jx, lx), (jy, ly), (jt, robot_chain.root)) + robot_chain.segments
    return SerialChain(
        root=world,
        segments=segs,
        tags=("virtual-base",) * 3 + robot_chain.tags,
        base_pose=Transform.identity(),
        root_frame=None,
    )


def fixed_virtual_joint(name: str = "attach") -> Joint:
    return Joint(name, "virtual-fixed")


def revolute_virtual_joint(name: str = "attach", limits=(-math.pi, math.pi),
                           vel_bound: float = 1.0, acc_bound: float = 2.0) -> Joint:
    return Joint(name, "virtual-revolute", (0, 0, 1), limits=limits,
                 vel_bound=vel_bound, acc_bound=acc_bound)


def end_to_end(chain: SerialChain, q) -> Transform:
    mats = fk_matrices(chain, q)
    return Transform.from_matrix(np.linalg.inv(mats[0]) @ mats[-1], check=False)


def chain_link_names(chain: SerialChain) -> list[str]:
    return [l.name for l in chain.links]


def iter_tagged(chain: SerialChain, tag: str) -> Iterable[Joint]:
    return (j for j, t in zip(chain.joints, chain.tags) if t == tag)
