"""Builtin domains, problem generators, scenarios and the action compiler."""
from .builtin import CONVENTIONAL_DOMAIN, VKC_DOMAIN, make_conventional_domain, make_vkc_domain
from .rearrange import RearrangeSpec, make_rearrange_problem, make_spec
from .compile import (MotionRejected, StepRecord, WorldState, action_steps, apply_motion_result,
                      compile_action, execute_plan)
from .scenarios import (drawer_problem, drawer_start, make_drawer_scene, make_multistep_scenario,
                        make_multistep_scene, make_reach_scene, multistep_problems, multistep_start,
                        reach_problem, reach_start)
