"""Motion solvers for VKC requests: trajectory optimization and RRT-Connect."""
from .core import (GoalSpec, MotionError, MotionRequest, MotionResult, Trajectory, Violation,
                   anchor_residual, base_arm_costs, check_trajectory, dump_trajectory, goal_residual)
from .optimizer import OptimizerConfig, goal_seed, objective, objective_grad, optimize, optimize_restarts
from .sampler import DESK_PRESET, LONG_PRESET, SamplerConfig, densify, rrt_connect, time_scale
