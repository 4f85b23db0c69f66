import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vkc_tamp.kinematics import (Joint, KinematicTree, KinematicsError, Link, SerialChain, Transform,
                                 add_virtual_base, attach, detach, fixed_virtual_joint, fk_matrices,
                                 forward_kinematics, invert_chain, invert_transform, matrix_to_rpy,
                                 relative_pose, rotation_log, rpy_to_matrix, wrap_angle)

from conftest import random_chain, random_q, random_transform


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=200, deadline=None)
def test_invert_transform_matches_matrix_inverse(seed):
    T = random_transform(np.random.default_rng(seed))
    assert np.abs(invert_transform(T).matrix - np.linalg.inv(T.matrix)).max() <= 1e-12


def test_invert_transform_rejects_skewed_rotation():
    M = np.eye(4)
    M[0, 1] = 0.3
    with pytest.raises(KinematicsError):
        invert_transform(Transform.from_matrix(M, check=False))


def test_composition_with_inverse_is_identity(rng):
    for _ in range(50):
        T = random_transform(rng)
        assert (T @ invert_transform(T)).allclose(Transform.identity(), 1e-12)


@given(st.floats(-3.0, 3.0), st.floats(-1.5, 1.5), st.floats(-3.0, 3.0))
def test_rpy_round_trip(r, p, y):
    R = rpy_to_matrix((r, p, y))
    assert np.allclose(rpy_to_matrix(matrix_to_rpy(R)), R, atol=1e-9)


def test_rotation_log_of_axis_angle():
    axis = np.array([1.0, 2.0, -0.5]) / np.linalg.norm([1.0, 2.0, -0.5])
    R = rpy_to_matrix((0, 0, 0))
    assert np.allclose(rotation_log(R), 0.0)
    from vkc_tamp.kinematics import rot_axis
    assert np.allclose(rotation_log(rot_axis(axis, 0.7)), 0.7 * axis, atol=1e-12)


def test_wrap_angle_range():
    for a in np.linspace(-20, 20, 101):
        w = wrap_angle(a)
        assert -math.pi <= w <= math.pi
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-12)


def test_revolute_fk_matches_hand_computation():
    j1 = Joint("a", "revolute", (0, 0, 1), Transform.identity(), (-3, 3))
    j2 = Joint("b", "revolute", (0, 0, 1), Transform.from_xyz_rpy((1.0, 0, 0)), (-3, 3))
    tip = Link("l2", (), {"ee": Transform.from_xyz_rpy((0.5, 0, 0))})
    chain = SerialChain(Link("l0"), ((j1, Link("l1")), (j2, tip)), ("robot", "robot"))
    q = np.array([0.3, -0.8])
    M = fk_matrices(chain, q)[-1] @ tip.frame("ee").matrix
    x = math.cos(0.3) + 0.5 * math.cos(0.3 - 0.8)
    y = math.sin(0.3) + 0.5 * math.sin(0.3 - 0.8)
    assert np.allclose(M[:2, 3], [x, y], atol=1e-12)


def test_forward_kinematics_reports_limit_violations_and_bad_shapes(rng):
    chain = random_chain(rng, 4, with_post=False)
    q = chain.upper + 1.0
    assert set(forward_kinematics(chain, q).out_of_limits) == set(chain.active_names)
    with pytest.raises(KinematicsError):
        forward_kinematics(chain, np.zeros(chain.dof + 1))
    with pytest.raises(KinematicsError):
        forward_kinematics(chain, np.full(chain.dof, np.nan))


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_invert_chain_preserves_relative_poses(rng, n):
    for _ in range(10):
        chain = random_chain(rng, n)
        q = random_q(rng, chain)
        inv = invert_chain(chain, "at", q)
        P = forward_kinematics(chain, q)
        Pi = forward_kinematics(inv, q[::-1])
        m = len(P) - 1
        assert Pi[0].allclose(P[-1], 1e-12)
        for a in range(len(P)):
            for b in range(len(P)):
                rel = relative_pose(P, a, b).matrix
                rel_i = relative_pose(Pi, m - a, m - b).matrix
                assert np.abs(rel - rel_i).max() <= 1e-9


def test_invert_chain_is_an_involution(rng):
    for _ in range(20):
        chain = random_chain(rng, int(rng.integers(1, 9)))
        twice = invert_chain(invert_chain(chain, "at"), "at")
        assert twice.same_structure(chain)


def test_invert_chain_needs_tip_frame(rng):
    chain = random_chain(rng, 3)
    with pytest.raises(KeyError):
        invert_chain(chain, "missing")


def _robot():
    j = Joint("arm", "revolute", (0, 0, 1), Transform.identity(), (-3, 3))
    tip = Link("hand", (), {"ee": Transform.from_xyz_rpy((0.5, 0, 0))})
    return add_virtual_base(SerialChain(Link("torso"), ((j, tip),), ("robot",)))


def _hinged_object():
    body = Link("body", ())
    door = Link("door", (), {"at": Transform.from_xyz_rpy((0.4, 0, 0))})
    j = Joint("hinge", "revolute", (0, 0, 1), Transform.from_xyz_rpy((1.0, 0.0, 0.0)), (0, 1.5))
    return KinematicTree((body, door), (j,), {"door": ("body", "hinge")}, "body")


def test_attach_places_object_at_grasp_and_detach_restores_it():
    robot = _robot()
    tree = _hinged_object()
    obj_pose = Transform.planar(2.0, 1.0, 0.5)
    ochain = tree.chain_to("door", "object", obj_pose)
    oq = np.array([0.6])
    at_world = Transform.from_matrix(fk_matrices(ochain, oq)[-1]) @ tree.link("door").frame("at")
    grasp = Transform.planar(0.1, 0.0, math.pi)
    # put the end-effector exactly where the grasp says
    ee_world = at_world @ grasp.inverse()
    qr = np.zeros(robot.dof)
    hand_in_base = robot.tip.frame("ee")
    base = ee_world @ hand_in_base.inverse()
    qr[:3] = [base.translation[0], base.translation[1], math.atan2(base.rotation[1, 0], base.rotation[0, 0])]
    vkc = attach(robot, invert_chain(ochain, "at", oq), fixed_virtual_joint("grip"), grasp)
    q = np.concatenate([qr, oq[::-1]])
    assert vkc.dof == robot.dof + 1
    assert "attachment" in vkc.tags
    mats = fk_matrices(vkc, q)
    # the object's root link lands on its world pose
    assert np.allclose(mats[-1], obj_pose.matrix, atol=1e-9)
    d = detach(vkc, q)
    assert d.robot_chain.same_structure(robot)
    assert np.allclose(d.robot_q, qr)
    assert np.allclose(d.object_q, oq)
    assert d.object_pose.allclose(obj_pose, 1e-9)


def test_detach_without_attachment_fails(rng):
    with pytest.raises(KinematicsError):
        detach(random_chain(rng, 2), np.zeros(2))


def test_virtual_base_layout():
    chain = _robot()
    assert chain.active_names[:3] == ("base_x", "base_y", "base_yaw")
    assert chain.indices_tagged("virtual-base") == [0, 1, 2]
    with pytest.raises(KinematicsError):
        add_virtual_base(chain)


def test_tree_rejects_cycles_and_orphans():
    a, b = Link("a"), Link("b")
    j = Joint("j", "fixed")
    with pytest.raises(KinematicsError):
        KinematicTree((a, b), (j,), {}, "a")
    with pytest.raises(KinematicsError):
        KinematicTree((a, b), (j,), {"a": ("b", "j"), "b": ("a", "j")}, "a")


def test_joint_validation():
    with pytest.raises(KinematicsError):
        Joint("j", "revolute", (0, 0, 0), limits=(-1, 1))
    with pytest.raises(KinematicsError):
        Joint("j", "revolute", limits=(1, -1))
    with pytest.raises(KinematicsError):
        Joint("j", "spherical")
