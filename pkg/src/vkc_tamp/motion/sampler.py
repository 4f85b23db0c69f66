"""RRT-Connect with shortcut smoothing, densification and time scaling.

Chains that must keep their tip fixed (an articulated object bolted to the
world) are handled by projecting every new configuration back onto the
closure constraint before it is checked.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from ..kinematics import fk_matrices
from ..world import CollisionModel, Scene
from .core import (ANCHOR_TOLERANCE, MotionRequest, MotionResult, Trajectory, anchor_residual,
                   check_trajectory, goal_residual)
from .optimizer import goal_seed


@dataclass(frozen=True)
class SamplerConfig:
    step_size: float = 0.3
    goal_bias: float = 0.1
    resolution: float = 0.05
    timeout: float = 30.0
    density: float = 0.05
    shortcut_iters: int = 100
    seed: int = 0
    goal_restarts: int = 20
    margin: float = 0.01
    clearance: float = 0.02  # extra clearance demanded while searching
    base_padding: float = 1.5

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step size must be positive")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal bias must lie in [0, 1]")
        if not self.density > 0:
            raise ValueError("interpolation density must be positive")


DESK_PRESET = {"reach": SamplerConfig(timeout=30.0), "open": SamplerConfig(timeout=10.0)}
LONG_PRESET = {"reach": SamplerConfig(timeout=300.0), "open": SamplerConfig(timeout=50.0)}


class _Space:
    def __init__(self, req: MotionRequest, scene: Scene, cfg: SamplerConfig, q_goal: np.ndarray):
        self.req, self.cfg = req, cfg
        chain = req.chain
        self.model = CollisionModel(scene, chain, req.ignore)
        self.free = np.array([i for i in range(chain.dof) if i not in req.frozen], dtype=int)
        lo = chain.lower.copy()
        hi = chain.upper.copy()
        names = chain.active_names
        ends = np.vstack([req.start, q_goal])
        for i, nm in enumerate(names):
            if nm in ("base_x", "base_y"):
                lo[i] = max(lo[i], ends[:, i].min() - cfg.base_padding)
                hi[i] = min(hi[i], ends[:, i].max() + cfg.base_padding)
            elif not np.isfinite(lo[i]) or not np.isfinite(hi[i]):
                lo[i] = ends[:, i].min() - math.pi
                hi[i] = ends[:, i].max() + math.pi
        self.lo, self.hi = lo, hi
        self.checks = 0

    def valid(self, q) -> bool:
        self.checks += 1
        if self.req.anchor is not None:
            if np.abs(anchor_residual(self.req.anchor, self.req.chain, q)).max() > ANCHOR_TOLERANCE:
                return False
        return not self.model.report(q, self.cfg.margin + self.cfg.clearance).in_collision

    def project(self, q):
        if self.req.anchor is None:
            return q
        return _project(self.req, q, self.free, self.lo, self.hi)

    def edge(self, a, b, resolution) -> bool:
        """Straight (or projected) edge from ``a`` to ``b``, endpoints excluded."""
        n = int(math.ceil(np.abs(b - a).max() / resolution))
        for k in range(1, n):
            q = self.project(a + (b - a) * (k / n))
            if q is None or not self.valid(q):
                return False
        return True

    def sample(self, rng):
        q = self.req.start.copy()
        q[self.free] = rng.uniform(self.lo[self.free], self.hi[self.free])
        return q


def _project(req: MotionRequest, q, free, lo, hi):
    chain = req.chain
    x0 = np.clip(q[free], lo[free] + 1e-9, hi[free] - 1e-9)

    def fun(x):
        z = q.copy()
        z[free] = x
        return anchor_residual(req.anchor, chain, z)

    sol = least_squares(fun, x0, bounds=(lo[free], hi[free]), xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=100)
    z = q.copy()
    z[free] = sol.x
    if np.abs(fun(sol.x)).max() > ANCHOR_TOLERANCE * 0.1:
        return None
    return z


def _goal_config(req: MotionRequest, space: _Space, cfg: SamplerConfig, rng,
                 deadline: float = math.inf) -> np.ndarray | None:
    for k in range(cfg.goal_restarts):
        if time.monotonic() > deadline:
            return None
        start = req.start.copy()
        if k % 2:
            start[space.free] += rng.normal(0.0, 0.5, size=space.free.size)
        elif k:
            start = space.sample(rng)
        start = np.clip(start, req.chain.lower, req.chain.upper)
        q = goal_seed(req, start=start)
        r = goal_residual(req.goal, req.chain, q)
        if r.size and float(np.max(r * r)) > req.goal.tolerance * 1e-2:
            continue
        if space.valid(q):
            return q
    return None


class _Tree:
    def __init__(self, root):
        self.nodes = [np.asarray(root, dtype=float)]
        self.parent = [-1]
        self._arr = np.array([root], dtype=float)

    def nearest(self, q) -> int:
        return int(np.argmin(np.sum((self._arr - q) ** 2, axis=1)))

    def add(self, q, parent: int) -> int:
        self.nodes.append(q)
        self.parent.append(parent)
        self._arr = np.vstack([self._arr, q])
        return len(self.nodes) - 1

    def path(self, i: int) -> list:
        out = []
        while i >= 0:
            out.append(self.nodes[i])
            i = self.parent[i]
        return out[::-1]


def _steer(a, b, step):
    d = b - a
    dist = float(np.linalg.norm(d))
    if dist <= step:
        return b, True
    return a + d * (step / dist), False


def _extend(tree: _Tree, q, space: _Space, cfg: SamplerConfig):
    i = tree.nearest(q)
    new, reached = _steer(tree.nodes[i], q, cfg.step_size)
    new = space.project(new)
    if new is None or not space.valid(new) or not space.edge(tree.nodes[i], new, cfg.resolution):
        return "trapped", -1
    j = tree.add(new, i)
    return ("reached" if reached and np.allclose(new, q, atol=1e-6) else "advanced"), j


def _connect(tree: _Tree, q, space: _Space, cfg: SamplerConfig, deadline: float):
    while time.monotonic() < deadline:
        status, j = _extend(tree, q, space, cfg)
        if status != "advanced":
            return status, j
    return "trapped", -1


def _shortcut(path: list, space: _Space, cfg: SamplerConfig, rng, deadline: float) -> list:
    path = list(path)
    for _ in range(cfg.shortcut_iters):
        if len(path) < 3 or time.monotonic() > deadline:
            break
        i, j = sorted(rng.choice(len(path), size=2, replace=False))
        if j - i < 2:
            continue
        if space.edge(path[i], path[j], cfg.resolution):
            path = path[: i + 1] + path[j:]
    return path


def densify(path: list, density: float, space: _Space | None = None) -> np.ndarray:
    """Insert points so consecutive configurations differ by at most ``density``."""
    pts = [path[0]]
    for a, b in zip(path[:-1], path[1:]):
        n = max(1, int(math.ceil(np.abs(b - a).max() / density)))
        for k in range(1, n + 1):
            q = a + (b - a) * (k / n)
            if space is not None and k < n:
                q = space.project(q)
            pts.append(q)
    return np.array(pts)


def time_scale(points: np.ndarray, chain) -> float:
    """Smallest uniform step duration that keeps velocity and acceleration in bounds."""
    dt = 1e-3
    if len(points) >= 2:
        dt = max(dt, float((np.abs(np.diff(points, axis=0)) / chain.vel_bounds).max()))
    if len(points) >= 3:
        dt = max(dt, math.sqrt(float((np.abs(np.diff(points, n=2, axis=0)) / chain.acc_bounds).max())))
    return dt * (1.0 + 1e-6)


def rrt_connect(req: MotionRequest, scene: Scene, cfg: SamplerConfig = SamplerConfig(),
                q_goal: np.ndarray | None = None) -> MotionResult:
    """Bidirectional search from start and goal configurations.

    The returned trajectory has every waypoint and edge collision-free at
    the configured resolution and is re-validated at twice that resolution
    after smoothing and interpolation.
    """
    t0 = time.monotonic()
    deadline = t0 + cfg.timeout
    rng = np.random.default_rng(cfg.seed)
    probe = _Space(req, scene, cfg, req.start)
    info = {"tree_sizes": (0, 0), "collision_checks": 0}
    if not probe.valid(req.start):
        return MotionResult(False, None, [], dict(info, reason="start in collision"))
    if q_goal is None:
        q_goal = _goal_config(req, probe, cfg, rng, deadline)
        if q_goal is None:
            reason = "timeout" if time.monotonic() > deadline else "no valid goal configuration"
            return MotionResult(False, None, [], dict(info, reason=reason))
    space = _Space(req, scene, cfg, q_goal)
    if not space.valid(q_goal):
        return MotionResult(False, None, [], dict(info, reason="goal in collision"))

    ta, tb = _Tree(req.start), _Tree(q_goal)
    path = None
    if time.monotonic() < deadline and space.edge(req.start, q_goal, cfg.resolution):
        path = [req.start, q_goal]
    from_start = True
    while path is None and time.monotonic() < deadline:
        q_rand = q_goal if (from_start and rng.random() < cfg.goal_bias) else space.sample(rng)
        status, i = _extend(ta, q_rand, space, cfg)
        if status != "trapped":
            s2, j = _connect(tb, ta.nodes[i], space, cfg, deadline)
            if s2 == "reached":
                pa, pb = ta.path(i), tb.path(j)
                path = pa + pb[::-1][1:] if from_start else pb + pa[::-1][1:]
                break
        ta, tb = tb, ta
        from_start = not from_start
    info["tree_sizes"] = (len(ta.nodes), len(tb.nodes))
    if path is None:
        info["collision_checks"] = space.checks
        return MotionResult(False, None, [], dict(info, reason="timeout"))
    info["raw_waypoints"] = len(path)
    smooth = _shortcut(path, space, cfg, rng, deadline + cfg.timeout)
    for candidate in (smooth, path):
        ok = all(space.valid(q) for q in candidate) and all(
            space.edge(a, b, cfg.resolution / 2) for a, b in zip(candidate[:-1], candidate[1:]))
        if ok:
            break
    else:
        return MotionResult(False, None, [], dict(info, reason="revalidation failed"))
    info["waypoints"] = [np.array(q) for q in candidate]
    pts = densify(candidate, cfg.density, space)
    traj = Trajectory(pts, req.chain, time_scale(pts, req.chain))
    info["collision_checks"] = space.checks
    info["wall_time"] = time.monotonic() - t0
    report = check_trajectory(traj, scene, req, cfg.margin)
    return MotionResult(not report, traj, report, info)
