"""Forward state-space search: BFS, IW(k) and iterated width with BFS fallback.

States are encoded as Python ints used as bitsets over the grounded atom
universe; successor generation follows the canonical ground-action order so
node counts are reproducible.
"""
from __future__ import annotations

import itertools
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .pddl import GroundAction, Literal, goal_atoms

BFS_FALLBACK = "bfs-fallback"


@dataclass(frozen=True)
class Limits:
    max_nodes: int = 10_000_000
    max_time: float = float("inf")


@dataclass
class SearchMetrics:
    nodes_generated: int = 0
    nodes_expanded: int = 0
    wall_time: float = 0.0
    solution_depth: int | None = None
    width_used: int | str | None = None

    def add(self, other: "SearchMetrics") -> None:
        self.nodes_generated += other.nodes_generated
        self.nodes_expanded += other.nodes_expanded
        self.wall_time += other.wall_time


@dataclass
class PlanResult:
    solved: bool
    plan: list = field(default_factory=list)
    metrics: SearchMetrics = field(default_factory=SearchMetrics)
    reason: str = ""

    def __bool__(self):
        return self.solved


@dataclass(frozen=True)
class SearchNode:
    state: frozenset
    parent: int | None
    action: GroundAction | None
    depth: int


def _bits(x: int) -> list[int]:
    out = []
    while x:
        low = x & -x
        out.append(low.bit_length() - 1)
        x ^= low
    return out


class Task:
    """Bitset compilation of (init, goal, ground actions)."""

    def __init__(self, init: Iterable[tuple], goal: Sequence[Literal], actions: Sequence[GroundAction]):
        gpos, gneg = goal_atoms(goal)
        init = frozenset(init)
        fluent = set(gpos) | set(gneg)
        for a in actions:
            fluent |= a.add | a.delete
        # atoms no action changes are constant: drop actions that need a false
        # one and strip the true ones from states, which keeps bitsets small
        kept = []
        for a in actions:
            if any(x not in fluent and x not in init for x in a.pre_pos):
                continue
            if any(x not in fluent and x in init for x in a.pre_neg):
                continue
            kept.append(a)
        self.actions = sorted(kept, key=lambda a: a.key)
        self.static = frozenset(x for x in init if x not in fluent)
        self.atoms = sorted(fluent)
        self.index = {a: i for i, a in enumerate(self.atoms)}
        enc = self.encode
        fl = lambda atoms: [x for x in atoms if x in self.index]
        self.init = enc(fl(init))
        self.goal_pos = enc(gpos)
        self.goal_neg = enc(gneg)
        self.goal_list = [self.index[a] for a in sorted(gpos)]
        self.pre_pos = [enc(fl(a.pre_pos)) for a in self.actions]
        self.pre_neg = [enc(fl(a.pre_neg)) for a in self.actions]
        self.add = [enc(a.add) for a in self.actions]
        self.keep = [~enc(a.delete) for a in self.actions]
        # trigger index: actions keyed by one positive precondition atom
        self.trigger: dict[int, list[int]] = {}
        self.always: list[int] = []
        for i, a in enumerate(self.actions):
            pos = fl(a.pre_pos)
            if pos:
                atom = max(pos, key=lambda x: self.index[x])
                self.trigger.setdefault(self.index[atom], []).append(i)
            else:
                self.always.append(i)

    def encode(self, atoms: Iterable[tuple]) -> int:
        x = 0
        index = self.index
        for a in atoms:
            i = index.get(a)
            if i is not None:
                x |= 1 << i
            elif a not in self.static:
                raise KeyError(f"unknown atom {a}")
        return x

    def decode(self, bits: int) -> frozenset:
        return frozenset(self.atoms[i] for i in _bits(bits)) | self.static

    def is_goal(self, s: int) -> bool:
        return (s & self.goal_pos) == self.goal_pos and not (s & self.goal_neg)

    def goal_count(self, s: int) -> int:
        return sum(1 for g in self.goal_list if (s >> g) & 1)

    def successors(self, s: int):
        cand = list(self.always)
        for b in _bits(s):
            cand.extend(self.trigger.get(b, ()))
        cand.sort()
        pp, pn, add, keep = self.pre_pos, self.pre_neg, self.add, self.keep
        for i in cand:
            if (s & pp[i]) == pp[i] and not (s & pn[i]):
                yield i, (s & keep[i]) | add[i]


def _extract(nodes_parent, nodes_action, task: Task, idx: int) -> list[GroundAction]:
    plan = []
    while nodes_parent[idx] is not None:
        plan.append(task.actions[nodes_action[idx]])
        idx = nodes_parent[idx]
    plan.reverse()
    return plan


class NoveltyTable:
    """Atom tuples (size <= k) seen so far, optionally partitioned.

    Sizes 1 and 2 use bitsets; larger tuples fall back to explicit sets.
    """

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("width must be >= 1")
        self.k = k
        self._parts: dict = {}

    def _part(self, key):
        p = self._parts.get(key)
        if p is None:
            p = {"seen1": 0, "seen2": {}, "big": [set() for _ in range(self.k + 1)]}
            self._parts[key] = p
        return p

    def novelty(self, s: int, partition=None) -> int:
        p = self._part(partition)
        k = self.k
        result = k + 1
        new1 = s & ~p["seen1"]
        if new1:
            result = 1
        p["seen1"] |= s
        if k >= 2:
            seen2 = p["seen2"]
            idx = _bits(s)
            for a in idx:
                row = seen2.get(a, 0)
                higher = s & ~((1 << (a + 1)) - 1)
                if higher & ~row:
                    if result > 2:
                        result = 2
                    seen2[a] = row | higher
        if k >= 3:
            idx = _bits(s)
            for size in range(3, k + 1):
                if size > len(idx):
                    break
                seen = p["big"][size]
                fresh = False
                for combo in itertools.combinations(idx, size):
                    if combo not in seen:
                        seen.add(combo)
                        fresh = True
                if fresh and result > size:
                    result = size
        return result


def novelty(s: frozenset, table: NoveltyTable, k: int, index: dict | None = None) -> int:
    """Novelty of a state given as a set of atoms (convenience wrapper)."""
    if k != table.k:
        raise ValueError("table width differs from k")
    if index is None:
        index = table.__dict__.setdefault("_atom_index", {})
    bits = 0
    for a in sorted(s):
        if a not in index:
            index[a] = len(index)
        bits |= 1 << index[a]
    return table.novelty(bits)


def _run(task: Task, limits: Limits, width: int | None, partition_goals: bool,
         deadline: float | None = None) -> PlanResult:
    t0 = time.monotonic()
    if deadline is None:
        deadline = t0 + limits.max_time
    m = SearchMetrics(width_used=width)
    parent: list = [None]
    action: list = [None]
    depth: list = [0]
    m.nodes_generated = 1
    if task.is_goal(task.init):
        m.solution_depth = 0
        m.wall_time = time.monotonic() - t0
        return PlanResult(True, [], m)
    table = NoveltyTable(width) if width is not None else None
    closed = None
    if table is not None:
        table.novelty(task.init, task.goal_count(task.init) if partition_goals else None)
    else:
        closed = {task.init}
    states = [task.init]
    queue = deque([0])
    reason = "exhausted"
    check = 0
    while queue:
        node = queue.popleft()
        s = states[node]
        m.nodes_expanded += 1
        for ai, s2 in task.successors(s):
            m.nodes_generated += 1
            if closed is not None:
                if s2 in closed:
                    continue
                closed.add(s2)
            else:
                part = task.goal_count(s2) if partition_goals else None
                if table.novelty(s2, part) > width:
                    continue
            states.append(s2)
            parent.append(node)
            action.append(ai)
            depth.append(depth[node] + 1)
            idx = len(states) - 1
            if task.is_goal(s2):
                m.solution_depth = depth[idx]
                m.wall_time = time.monotonic() - t0
                return PlanResult(True, _extract(parent, action, task, idx), m)
            queue.append(idx)
        check += 1
        if m.nodes_generated >= limits.max_nodes:
            reason = "node limit"
            break
        if (check & 63) == 0 and time.monotonic() > deadline:
            reason = "timeout"
            break
    if reason == "exhausted" and time.monotonic() > deadline:
        reason = "timeout"
    m.wall_time = time.monotonic() - t0
    return PlanResult(False, [], m, reason)


def _task(init, goal, actions) -> Task:
    return actions if isinstance(actions, Task) else Task(init, goal, actions)


def bfs(init, goal, actions, limits: Limits = Limits()) -> PlanResult:
    """Breadth-first search with full duplicate detection; plans are shortest."""
    return _run(_task(init, goal, actions), limits, None, False)


def iw(k: int, init, goal, actions, limits: Limits = Limits(), partition_goals: bool = False,
       deadline: float | None = None) -> PlanResult:
    """Breadth-first search pruning generated states whose novelty exceeds ``k``."""
    if k < 1:
        raise ValueError("width must be >= 1")
    return _run(_task(init, goal, actions), limits, k, partition_goals, deadline)


def iws(init, goal, actions, max_width: int = 2, limits: Limits = Limits(),
        partition_goals: bool = True) -> PlanResult:
    """IW(1), IW(2), ... IW(max_width), then plain BFS; metrics accumulate."""
    if max_width < 1:
        raise ValueError("max_width must be >= 1")
    task = _task(init, goal, actions)
    t0 = time.monotonic()
    deadline = t0 + limits.max_time
    total = SearchMetrics()
    for w in range(1, max_width + 1):
        budget = Limits(max(1, limits.max_nodes - total.nodes_generated), limits.max_time)
        r = _run(task, budget, w, partition_goals, deadline)
        total.add(r.metrics)
        if r.solved:
            total.solution_depth = r.metrics.solution_depth
            total.width_used = w
            return PlanResult(True, r.plan, total)
        if r.reason in ("timeout", "node limit") and (time.monotonic() > deadline or
                                                     total.nodes_generated >= limits.max_nodes):
            total.width_used = w
            return PlanResult(False, [], total, r.reason)
    budget = Limits(max(1, limits.max_nodes - total.nodes_generated), limits.max_time)
    r = _run(task, budget, None, False, deadline)
    total.add(r.metrics)
    total.width_used = BFS_FALLBACK
    total.solution_depth = r.metrics.solution_depth
    return PlanResult(r.solved, r.plan, total, r.reason)


def parse_algorithm(spec: str):
    """``bfs`` | ``iw:k`` | ``iws`` | ``iws:k`` -> callable(init, goal, actions, limits)."""
    spec = spec.strip().lower()
    if spec == "bfs":
        return lambda i, g, a, lim: bfs(i, g, a, lim)
    if spec.startswith("iws"):
        w = int(spec.split(":", 1)[1]) if ":" in spec else 2
        return lambda i, g, a, lim: iws(i, g, a, w, lim)
    if spec.startswith("iw:"):
        k = int(spec.split(":", 1)[1])
        return lambda i, g, a, lim: iw(k, i, g, a, lim)
    raise ValueError(f"unknown algorithm {spec!r}")
