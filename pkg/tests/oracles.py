"""Independent reference implementations used as test oracles."""
from collections import deque

from vkc_tamp.pddl import satisfies


def shortest_plan_length(init, goal, actions, max_states: int = 2_000_000):
    """Breadth-first search over explicit atom sets; None when unsolvable."""
    start = frozenset(init)
    if satisfies(start, goal):
        return 0
    seen = {start}
    frontier = deque([(start, 0)])
    while frontier:
        s, d = frontier.popleft()
        for a in actions:
            if a.pre_pos <= s and not (a.pre_neg & s):
                t = (s - a.delete) | a.add
                if t in seen:
                    continue
                if satisfies(t, goal):
                    return d + 1
                seen.add(t)
                if len(seen) > max_states:
                    raise RuntimeError("oracle state budget exceeded")
                frontier.append((t, d + 1))
    return None


def replays_to_goal(init, goal, plan) -> bool:
    s = frozenset(init)
    for a in plan:
        if not (a.pre_pos <= s and not (a.pre_neg & s)):
            return False
        s = (s - a.delete) | a.add
    return satisfies(s, goal)
