from dataclasses import replace

import numpy as np
import pytest

from vkc_tamp.domains import (MotionRejected, RearrangeSpec, WorldState, action_steps, apply_motion_result,
                              compile_action, drawer_problem, drawer_start, execute_plan,
                              make_conventional_domain, make_drawer_scene, make_multistep_scenario,
                              make_rearrange_problem, make_reach_scene, make_spec, make_vkc_domain,
                              multistep_start, reach_problem, reach_start)
from vkc_tamp.domains.rearrange import make_rearrange_scene
from vkc_tamp.domains.robots import planar_robot
from vkc_tamp.domains.scenarios import load_fixture_scene
from vkc_tamp.motion import MotionResult, Trajectory, optimize, optimize_restarts
from vkc_tamp.pddl import ContractViolation, find_action, ground, satisfies, validate_problem
from vkc_tamp.planner import bfs
from vkc_tamp.world import Scene, check_collision, format_scene

from oracles import replays_to_goal


def test_planar_robot_layout():
    chain = Scene(robot=planar_robot()).robot_chain()
    assert chain.dof == 6
    assert chain.active_names[:3] == ("base_x", "base_y", "base_yaw")


@pytest.mark.parametrize("m", [1, 2, 5])
def test_make_spec_is_valid_and_seeded(m):
    a, b = make_spec(m, 3), make_spec(m, 3)
    assert a == b
    assert a.misplaced
    assert len(a.tables) == m + 1


def test_rearrange_spec_validation():
    with pytest.raises(ValueError):
        RearrangeSpec(0, ("t0",), {}, {})
    with pytest.raises(ValueError):
        RearrangeSpec(2, ("t0", "t1", "t2"), {"o1": "t0", "o2": "t0"}, {"o1": "t1", "o2": "t2"})
    with pytest.raises(ValueError):
        RearrangeSpec(1, ("t0", "t1"), {"o1": "t0"}, {"o1": "t9"})


@pytest.mark.parametrize("variant", ["vkc", "conventional"])
def test_rearrange_problems_validate_and_replay(variant):
    spec = make_spec(2, 1)
    dom = make_vkc_domain() if variant == "vkc" else make_conventional_domain()
    prob = make_rearrange_problem(spec, variant)
    validate_problem(dom, prob)
    acts = ground(dom, prob)
    r = bfs(prob.init, prob.goal, acts)
    assert r.solved and replays_to_goal(prob.init, prob.goal, r.plan)


def test_rearrange_scene_is_collision_free_at_home():
    scene = make_rearrange_scene(make_spec(3, 0))
    ws = WorldState.initial(scene, set())
    assert not check_collision(scene, ws.chain, ws.q).in_collision


def _reach_ws(seed=0):
    scene, prob = make_reach_scene(), reach_problem()
    prob = replace(prob, init=prob.init | {("placeable", "ball", "ball-start")})
    ws = WorldState.initial(scene, prob.init, reach_start(np.random.default_rng(seed), scene))
    acts = ground(make_vkc_domain(), prob)
    return ws, prob, acts


def test_pick_attaches_and_place_detaches():
    ws, prob, acts = _reach_ws()
    pick = find_action(acts, "(pick-vkc ball ball-start vkc)")
    req = compile_action(ws, pick)
    assert req.chain_edit == "attach" and req.final
    res = optimize_restarts(req, ws.scene)
    assert res.success
    ws2 = apply_motion_result(ws, req, res.trajectory, pick)
    assert ws2.carried == ("ball",)
    assert ws2.chain.dof == ws.chain.dof  # rigid object adds no active joint
    assert satisfies(ws2.state, prob.goal)
    place = find_action(acts, "(place-vkc ball ball-start vkc)")
    req2 = compile_action(ws2, place)
    assert req2.chain_edit == "detach"
    res2 = optimize_restarts(req2, ws2.scene)
    ws3 = apply_motion_result(ws2, req2, res2.trajectory, place)
    assert ws3.carried == ()
    assert np.allclose(ws3.scene.object_pose("ball").translation, ws.scene.object_pose("ball").translation, atol=0.05)


def test_rejected_result_keeps_state():
    ws, _, acts = _reach_ws()
    pick = find_action(acts, "(pick-vkc ball ball-start vkc)")
    req = compile_action(ws, pick)
    stay = Trajectory(np.tile(ws.q, (4, 1)), req.chain)
    with pytest.raises(MotionRejected):
        apply_motion_result(ws, req, stay, pick)
    assert ws.carried == () and ws.check() is None


def test_inapplicable_action_is_rejected():
    ws, _, acts = _reach_ws()
    place = find_action(acts, "(place-vkc ball ball-start vkc)")
    with pytest.raises(ContractViolation):
        compile_action(ws, place)


def test_world_state_check_detects_mismatch():
    ws, _, _ = _reach_ws()
    with pytest.raises(ContractViolation):
        WorldState(ws.scene, ws.chain, ws.q, ws.state | {("carry", "ball", "vkc")}).check()


def test_conventional_open_takes_two_steps_and_freezes_base():
    scene, prob = make_drawer_scene(), drawer_problem("conventional")
    acts = ground(make_conventional_domain(), prob)
    r = bfs(prob.init, prob.goal, acts)
    assert r.solved
    opens = [a for a in r.plan if a.name == "open"]
    assert opens and action_steps(opens[0]) == 2
    assert all(action_steps(a) == 1 for a in r.plan if a.name != "open")


def test_execute_plan_drawer_vkc():
    scene, prob = make_drawer_scene(), drawer_problem("vkc")
    plan = bfs(prob.init, prob.goal, ground(make_vkc_domain(), prob)).plan
    ws = WorldState.initial(scene, prob.init, drawer_start(np.random.default_rng(1), scene))
    ws, recs = execute_plan(ws, plan, optimize_restarts)
    assert all(r.success for r in recs) and len(recs) == len(plan)
    assert satisfies(ws.state, prob.goal) and ws.carried == ()


def test_execute_plan_stops_at_first_failure():
    scene, prob = make_drawer_scene(), drawer_problem("vkc")
    plan = bfs(prob.init, prob.goal, ground(make_vkc_domain(), prob)).plan
    ws0 = WorldState.initial(scene, prob.init, drawer_start(np.random.default_rng(1), scene))

    def fail(req, scene):
        return MotionResult(False, Trajectory(np.tile(req.start, (3, 1)), req.chain), ["forced"], {})

    ws, recs = execute_plan(ws0, plan, fail)
    assert len(recs) == 1 and not recs[0].success
    assert ws.state == ws0.state


def test_multistep_plans():
    scene, pv, pc = make_multistep_scenario()
    rv = bfs(pv.init, pv.goal, ground(make_vkc_domain(), pv))
    rc = bfs(pc.init, pc.goal, ground(make_conventional_domain(), pc))
    assert rv.solved and rc.solved
    assert {a.name for a in rv.plan} <= {"pick-vkc", "place-vkc", "goto-vkc"}
    assert len(rv.plan) < len(rc.plan)
    # the cube leaves the nook on the stick
    assert any(a.name == "pick-vkc" and a.args[0] == "cube" and a.args[2] == "stick" for a in rv.plan)


def test_multistep_starts_are_collision_free():
    scene, _, _ = make_multistep_scenario()
    rng = np.random.default_rng(0)
    chain = scene.robot_chain()
    for _ in range(5):
        assert not check_collision(scene, chain, multistep_start(rng, scene)).in_collision


@pytest.mark.parametrize("task", ["drawer", "reach", "multistep"])
def test_fixture_scenes_match_builders(task):
    build = {"drawer": make_drawer_scene, "reach": make_reach_scene,
             "multistep": lambda: make_multistep_scenario()[0]}[task]
    assert format_scene(load_fixture_scene(task)) == format_scene(build())
