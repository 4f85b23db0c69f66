import math

import numpy as np
import pytest

from vkc_tamp.domains import make_reach_scene, reach_start
from vkc_tamp.domains.robots import planar_robot, pillar_obstacle
from vkc_tamp.kinematics import Transform, fk_matrices
from vkc_tamp.motion import (GoalSpec, MotionRequest, OptimizerConfig, SamplerConfig, Trajectory,
                             base_arm_costs, check_trajectory, densify, dump_trajectory, goal_residual,
                             goal_seed, objective, objective_grad, optimize, rrt_connect, time_scale)
from vkc_tamp.motion.core import load_trajectory_table
from vkc_tamp.world import Scene

START = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 1.0])


def _open_scene(*obstacles):
    return Scene(robot=planar_robot(), static_obstacles=tuple(obstacles))


def _joint_request(scene, goal_values=(1.0, 0.5, 0.3), frozen=()):
    chain = scene.robot_chain()
    return MotionRequest("none", chain, START, GoalSpec.joints([0, 1, 2], goal_values), frozen=frozen)


# -- objective -----------------------------------------------------------------

def test_objective_gradient_matches_central_differences():
    rng = np.random.default_rng(7)
    h = 1e-6
    for k in range(20):
        T, n = int(rng.integers(3, 25)), int(rng.integers(1, 8))
        P = rng.normal(size=(T, n))
        cfg = OptimizerConfig(w_vel=tuple(rng.uniform(0.1, 2, n)), w_acc=tuple(rng.uniform(0.1, 2, n)))
        G = objective_grad(P, cfg)
        F = np.zeros_like(P)
        for i in range(T):
            for j in range(n):
                E = np.zeros_like(P)
                E[i, j] = h
                F[i, j] = (objective(P + E, cfg) - objective(P - E, cfg)) / (2 * h)
        assert np.abs(G - F).max() / max(1.0, np.abs(F).max()) <= 1e-6


def test_objective_of_constant_trajectory_is_zero():
    assert objective(np.ones((5, 3))) == 0.0
    assert np.all(objective_grad(np.ones((5, 3))) == 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(T=2)
    with pytest.raises(ValueError):
        OptimizerConfig(mu_growth=1.0)
    with pytest.raises(ValueError):
        OptimizerConfig(w_vel=(-1.0,))
    with pytest.raises(ValueError):
        OptimizerConfig(w_vel=(1.0, 1.0)).weights(3)


# -- goals and requests --------------------------------------------------------

def test_goal_spec_validation():
    with pytest.raises(ValueError):
        GoalSpec.joints([0, 1], [1.0])
    with pytest.raises(ValueError):
        GoalSpec("ee-pose")
    with pytest.raises(ValueError):
        GoalSpec("teleport", (0,), (1.0,))
    with pytest.raises(ValueError):
        GoalSpec.joints([0], [1.0], tolerance=0.0)
    assert GoalSpec.ee_pose(Transform.identity(), orientation=False).k == 3


def test_request_validation():
    chain = _open_scene().robot_chain()
    with pytest.raises(ValueError):
        MotionRequest("none", chain, np.zeros(3), GoalSpec.joints([0], [1.0]))
    with pytest.raises(ValueError):
        MotionRequest("none", chain, START, GoalSpec.joints([9], [1.0]))
    with pytest.raises(ValueError):
        MotionRequest("rotate", chain, START, GoalSpec.joints([0], [1.0]))
    bad = START.copy()
    bad[3] = 10.0
    with pytest.raises(ValueError):
        MotionRequest("none", chain, bad, GoalSpec.joints([0], [1.0]))


def test_ee_pose_residual_vanishes_at_fk_pose():
    chain = _open_scene().robot_chain()
    q = np.array([0.3, -0.2, 0.4, 0.5, -0.6, 0.7])
    M = fk_matrices(chain, q)[-1] @ chain.tip.frame("ee").matrix
    goal = GoalSpec.ee_pose(Transform.from_matrix(M))
    assert np.abs(goal_residual(goal, chain, q)).max() < 1e-12


def test_goal_seed_reaches_pose_goal():
    scene = _open_scene()
    chain = scene.robot_chain()
    goal = GoalSpec.ee_pose(Transform.planar(1.5, 0.8, 0.4, 0.85), orientation=True)
    req = MotionRequest("none", chain, START, goal)
    q = goal_seed(req)
    assert np.max(goal_residual(goal, chain, q) ** 2) < 1e-8


# -- audit -----------------------------------------------------------------------

def _audit_kinds(points, req, scene, dt=0.25):
    return {v.kind for v in check_trajectory(Trajectory(points, req.chain, dt), scene, req)}


def test_audit_flags_each_violation_kind():
    scene = _open_scene(pillar_obstacle(3.0, 0.0, 0.3))
    req = _joint_request(scene, (0.1, 0.0, 0.0), frozen=(2,))
    T = 12
    P = np.linspace(START, START + [0.1, 0, 0, 0, 0, 0], T)
    assert _audit_kinds(P, req, scene) == set()
    Q = P.copy()
    Q[-1, 4] = 5.0
    assert {"limits", "velocity", "acceleration"} <= _audit_kinds(Q, req, scene)
    Q = P.copy()
    Q[5:, 0] = np.linspace(0.1, 3.0, T - 5)
    assert {"collision", "goal"} <= _audit_kinds(Q, req, scene, dt=10.0)
    Q = P.copy()
    Q[0, 1] = 0.01
    assert "start" in _audit_kinds(Q, req, scene)
    Q = P.copy()
    Q[3, 2] = 0.05
    assert "frozen" in _audit_kinds(Q, req, scene)


def test_audit_without_request_checks_only_limits_bounds_and_collisions():
    scene = _open_scene()
    chain = scene.robot_chain()
    P = np.linspace(START, START + 0.01, 5)
    assert check_trajectory(Trajectory(P, chain), scene) == []


def test_trajectory_validation_and_dump_round_trip():
    chain = _open_scene().robot_chain()
    with pytest.raises(ValueError):
        Trajectory(np.zeros((1, chain.dof)), chain)
    with pytest.raises(ValueError):
        Trajectory(np.zeros((3, 2)), chain)
    traj = Trajectory(np.linspace(START, START + 0.3, 4), chain, 0.5)
    names, data = load_trajectory_table(dump_trajectory(traj))
    assert tuple(names) == chain.active_names
    assert np.allclose(data, traj.points, atol=1e-11)


def test_costs_are_nonnegative_and_additive():
    chain = _open_scene().robot_chain()
    rng = np.random.default_rng(3)
    P = START + np.cumsum(rng.normal(0, 0.05, size=(15, chain.dof)), axis=0)
    full = base_arm_costs(Trajectory(P, chain))
    a = base_arm_costs(Trajectory(P[:8], chain))
    b = base_arm_costs(Trajectory(P[7:], chain))
    assert min(full) >= 0
    assert np.allclose(full, np.add(a, b))


# -- optimizer -------------------------------------------------------------------

def test_optimizer_solves_joint_goal_and_respects_frozen():
    scene = _open_scene()
    req = _joint_request(scene, (1.0, 0.5, 0.3), frozen=(4, 5))
    res = optimize(req, scene)
    assert res.success, res.violations
    assert np.allclose(res.trajectory.points[:, 4:], START[4:])
    assert check_trajectory(res.trajectory, scene, req) == []
    assert res.info["merit_history"] == sorted(res.info["merit_history"], reverse=True)


def test_optimizer_is_deterministic():
    scene = make_reach_scene()
    from vkc_tamp.domains import WorldState, compile_action, reach_problem
    from vkc_tamp.pddl import find_action, ground
    from vkc_tamp.domains import make_vkc_domain
    prob = reach_problem()
    ws = WorldState.initial(scene, prob.init, reach_start(np.random.default_rng(0), scene))
    req = compile_action(ws, find_action(ground(make_vkc_domain(), prob), "(pick-vkc ball ball-start vkc)"))
    a, b = optimize(req, scene), optimize(req, scene)
    assert np.array_equal(a.trajectory.points, b.trajectory.points)


def test_optimizer_routes_around_obstacle():
    scene = _open_scene(pillar_obstacle(1.0, 0.0, 0.25))
    req = _joint_request(scene, (2.0, 0.0, 0.0))
    res = optimize(req, scene, OptimizerConfig(T=30))
    assert res.success, res.violations
    assert np.abs(res.trajectory.points[:, 1]).max() > 0.2


# -- sampler ---------------------------------------------------------------------

def test_densify_and_time_scale():
    chain = _open_scene().robot_chain()
    path = [START, START + [1.0, 0, 0, 0, 0, 0], START + [1.0, 1.0, 0.5, 0, 0, 0]]
    P = densify(path, 0.05)
    assert np.abs(np.diff(P, axis=0)).max() <= 0.05 + 1e-12
    assert np.allclose(P[0], path[0]) and np.allclose(P[-1], path[-1])
    dt = time_scale(P, chain)
    traj = Trajectory(P, chain, dt)
    assert not [v for v in check_trajectory(traj, _open_scene()) if v.kind in ("velocity", "acceleration")]


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(step_size=0.0)
    with pytest.raises(ValueError):
        SamplerConfig(goal_bias=1.5)


def test_rrt_connect_is_deterministic_and_audits_clean():
    scene = _open_scene(pillar_obstacle(1.0, 0.0, 0.25))
    req = _joint_request(scene, (2.0, 0.0, 0.0))
    cfg = SamplerConfig(seed=4, timeout=20.0)
    a, b = rrt_connect(req, scene, cfg), rrt_connect(req, scene, cfg)
    assert a.success, a.info
    assert np.array_equal(a.trajectory.points, b.trajectory.points)
    assert check_trajectory(a.trajectory, scene, req) == []


def test_rrt_connect_reports_start_collision_and_timeout():
    scene = _open_scene(pillar_obstacle(0.0, 0.0, 0.25))
    res = rrt_connect(_joint_request(scene), scene)
    assert not res.success and res.info["reason"] == "start in collision"
    scene = _open_scene()
    res = rrt_connect(_joint_request(scene), scene, SamplerConfig(timeout=0.0))
    assert not res.success and res.info["reason"] == "timeout"
