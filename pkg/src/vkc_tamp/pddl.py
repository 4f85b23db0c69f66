"""A small STRIPS subset of PDDL: parsing, printing, grounding, semantics.

Supported: ``:requirements`` (ignored), ``:types``, ``:constants``,
``:predicates``, ``:action`` with ``:parameters``, ``:precondition`` and
``:effect`` made of conjunctions of (possibly negated) atoms, and problems
with ``:objects``, ``:init`` and a conjunctive ``:goal``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Union

from .sexpr import Atom, ParseError, SExpr, SList, lst, parse_one, to_string

GroundAtom = tuple  # (predicate, arg1, ...)
State = frozenset


class PDDLError(ParseError):
    """Semantic error in a PDDL file, carrying the offending span."""


class ContractViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class Literal:
    predicate: str
    args: tuple
    positive: bool = True
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)

    def __str__(self):
        a = "(" + " ".join((self.predicate,) + self.args) + ")"
        return a if self.positive else f"(not {a})"


@dataclass(frozen=True)
class PredicateSchema:
    name: str
    params: tuple  # ((var, type), ...)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple  # ((var, type), ...)
    precondition: tuple  # Literal, ...
    effect: tuple


@dataclass(frozen=True)
class DomainDef:
    name: str
    types: dict = field(default_factory=dict)  # type -> parent
    predicates: dict = field(default_factory=dict)  # name -> PredicateSchema
    actions: tuple = ()
    constants: dict = field(default_factory=dict)  # name -> type
    requirements: tuple = ()

    def action(self, name: str) -> ActionSchema:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)

    def is_subtype(self, t: str, of: str) -> bool:
        seen = set()
        while t not in seen:
            if t == of:
                return True
            seen.add(t)
            t = self.types.get(t, "object")
        return of == "object"


@dataclass(frozen=True)
class ProblemDef:
    name: str
    domain_name: str
    objects: dict = field(default_factory=dict)  # name -> type
    init: frozenset = frozenset()
    goal: tuple = ()


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: tuple
    pre_pos: frozenset
    pre_neg: frozenset
    add: frozenset
    delete: frozenset

    def __str__(self):
        return "(" + " ".join((self.name,) + self.args) + ")"

    @property
    def key(self) -> tuple:
        return (self.name,) + self.args


# ---------------------------------------------------------------------------
# parsing


def _atom_text(node: SExpr, what: str) -> str:
    if not isinstance(node, Atom):
        raise PDDLError(f"expected {what}", node.line, node.column)
    return node.text.lower()


def _typed_list(nodes, variables: bool) -> list[tuple[str, str, SExpr]]:
    """Parse ``a b - t c`` into [(name, type, node)]; untyped items get ``object``."""
    out, pending = [], []
    i = 0
    nodes = list(nodes)
    while i < len(nodes):
        node = nodes[i]
        text = _atom_text(node, "a name")
        if text == "-":
            if i + 1 >= len(nodes):
                raise PDDLError("dangling '-' in typed list", node.line, node.column)
            tnode = nodes[i + 1]
            if isinstance(tnode, SList):
                raise PDDLError("'either' types are not supported", tnode.line, tnode.column)
            t = _atom_text(tnode, "a type")
            out.extend((n, t, nd) for n, nd in pending)
            pending = []
            i += 2
            continue
        if variables and not text.startswith("?"):
            raise PDDLError(f"expected a variable, got {text!r}", node.line, node.column)
        pending.append((text, node))
        i += 1
    out.extend((n, "object", nd) for n, nd in pending)
    return out


def _formula(node: SExpr, allow_negation: bool = True) -> list[Literal]:
    if not isinstance(node, SList):
        raise PDDLError("expected a formula", node.line, node.column)
    if len(node) == 0:
        return []
    head = _atom_text(node[0], "a predicate or connective")
    if head == "and":
        lits = []
        for c in node.children[1:]:
            lits.extend(_formula(c, allow_negation))
        return lits
    if head == "not":
        if len(node) != 2:
            raise PDDLError("'not' takes one argument", node.line, node.column)
        inner = _formula(node[1], allow_negation)
        if len(inner) != 1 or not inner[0].positive:
            raise PDDLError("only negated atoms are supported", node.line, node.column)
        a = inner[0]
        return [Literal(a.predicate, a.args, False, node.line, node.column)]
    if head in ("or", "imply", "exists", "forall", "when", "increase", "decrease", "="):
        raise PDDLError(f"unsupported construct {head!r}", node.line, node.column)
    args = tuple(_atom_text(c, "an argument") for c in node.children[1:])
    return [Literal(head, args, True, node.line, node.column)]


def _check_literals(lits, predicates, bound: dict | None, where: str, constants=None):
    for lit in lits:
        if lit.predicate not in predicates:
            raise PDDLError(f"undeclared predicate {lit.predicate!r} in {where}", lit.line, lit.column)
        arity = len(predicates[lit.predicate].params)
        if arity != len(lit.args):
            raise PDDLError(
                f"predicate {lit.predicate!r} expects {arity} arguments, got {len(lit.args)}",
                lit.line, lit.column)
        if bound is not None:
            for a in lit.args:
                if a.startswith("?") and a not in bound:
                    raise PDDLError(f"unbound variable {a} in {where}", lit.line, lit.column)
                if not a.startswith("?") and constants is not None and a not in constants:
                    raise PDDLError(f"unknown constant {a!r} in {where}", lit.line, lit.column)


def _parse_domain(root: SList) -> DomainDef:
    header = root[1]
    if not isinstance(header, SList) or len(header) != 2 or _atom_text(header[0], "domain") != "domain":
        raise PDDLError("expected (domain <name>)", header.line, header.column)
    name = _atom_text(header[1], "a domain name")
    types, predicates, actions, constants, reqs = {}, {}, [], {}, ()
    pred_types = []
    for section in root.children[2:]:
        if not isinstance(section, SList) or not section.children:
            raise PDDLError("expected a domain section", section.line, section.column)
        key = _atom_text(section[0], "a section keyword")
        body = section.children[1:]
        if key == ":requirements":
            reqs = tuple(_atom_text(b, "a requirement") for b in body)
            warnings.warn(f"PDDL requirements ignored: {' '.join(reqs)}", stacklevel=3)
        elif key == ":types":
            for t, parent, _ in _typed_list(body, variables=False):
                types[t] = parent
        elif key == ":constants":
            for c, t, _ in _typed_list(body, variables=False):
                constants[c] = t
        elif key == ":predicates":
            for p in body:
                if not isinstance(p, SList) or not p.children:
                    raise PDDLError("expected a predicate declaration", p.line, p.column)
                pname = _atom_text(p[0], "a predicate name")
                typed = _typed_list(p.children[1:], variables=True)
                predicates[pname] = PredicateSchema(pname, tuple((v, t) for v, t, _ in typed))
                pred_types += [(t, node) for _, t, node in typed]
        elif key == ":action":
            actions.append(_parse_action(section))
        else:
            raise PDDLError(f"unknown domain section {key!r}", section.line, section.column)
    for a in actions:
        bound = dict(a.params)
        _check_literals(a.precondition, predicates, bound, f"precondition of {a.name}", constants)
        _check_literals(a.effect, predicates, bound, f"effect of {a.name}", constants)
    known = set(types) | set(types.values()) | {"object"}
    for t, node in pred_types:
        if t not in known:
            raise PDDLError(f"unknown type {t!r} in predicate declaration", node.line, node.column)
    for a in actions:
        for v, t in a.params:
            if t not in known:
                raise PDDLError(f"unknown type {t!r} for {v} in {a.name}", 0, 0)
    return DomainDef(name, types, predicates, tuple(actions), constants, reqs)


def _parse_action(section: SList) -> ActionSchema:
    if len(section) < 2:
        raise PDDLError("action without a name", section.line, section.column)
    name = _atom_text(section[1], "an action name")
    params, pre, eff = (), [], []
    items = section.children[2:]
    if len(items) % 2:
        raise PDDLError(f"action {name}: keyword without a value", section.line, section.column)
    for k, v in zip(items[::2], items[1::2]):
        key = _atom_text(k, "an action keyword")
        if key == ":parameters":
            if not isinstance(v, SList):
                raise PDDLError("expected a parameter list", v.line, v.column)
            typed = _typed_list(v.children, variables=True)
            seen = set()
            for var, _, node in typed:
                if var in seen:
                    raise PDDLError(f"duplicate parameter {var}", node.line, node.column)
                seen.add(var)
            params = tuple((var, t) for var, t, _ in typed)
        elif key == ":precondition":
            pre = _formula(v)
        elif key == ":effect":
            eff = _formula(v)
        else:
            raise PDDLError(f"unknown action keyword {key!r}", k.line, k.column)
    return ActionSchema(name, params, tuple(pre), tuple(eff))


def _parse_problem(root: SList) -> ProblemDef:
    header = root[1]
    if not isinstance(header, SList) or len(header) != 2:
        raise PDDLError("expected (problem <name>)", header.line, header.column)
    name = _atom_text(header[1], "a problem name")
    domain_name, objects, init, goal = "", {}, set(), ()
    for section in root.children[2:]:
        if not isinstance(section, SList) or not section.children:
            raise PDDLError("expected a problem section", section.line, section.column)
        key = _atom_text(section[0], "a section keyword")
        body = section.children[1:]
        if key == ":domain":
            domain_name = _atom_text(body[0], "a domain name")
        elif key == ":objects":
            for o, t, node in _typed_list(body, variables=False):
                if o in objects:
                    raise PDDLError(f"duplicate object {o!r}", node.line, node.column)
                objects[o] = t
        elif key == ":init":
            for b in body:
                lits = _formula(b)
                if len(lits) != 1 or not lits[0].positive:
                    raise PDDLError("init must list positive atoms", b.line, b.column)
                init.add((lits[0].predicate,) + lits[0].args)
        elif key == ":goal":
            goal = tuple(_formula(body[0]))
        elif key == ":requirements":
            warnings.warn("PDDL requirements ignored", stacklevel=3)
        else:
            raise PDDLError(f"unknown problem section {key!r}", section.line, section.column)
    return ProblemDef(name, domain_name, objects, frozenset(init), goal)


def parse(text: str) -> Union[DomainDef, ProblemDef]:
    """Parse a domain or problem definition."""
    root = parse_one(text)
    if not isinstance(root, SList) or len(root) < 2 or _atom_text(root[0], "define") != "define":
        raise PDDLError("expected (define ...)", root.line, root.column)
    kind = root[1]
    if isinstance(kind, SList) and kind.children:
        k = _atom_text(kind[0], "domain or problem")
        if k == "domain":
            return _parse_domain(root)
        if k == "problem":
            return _parse_problem(root)
    raise PDDLError("expected (domain ...) or (problem ...)", kind.line, kind.column)


def validate_problem(domain: DomainDef, problem: ProblemDef) -> None:
    """Check typing and predicate use of a problem against its domain."""
    if problem.domain_name != domain.name:
        raise PDDLError(f"problem is for domain {problem.domain_name!r}, not {domain.name!r}", 0, 0)
    known = set(domain.types) | set(domain.types.values()) | {"object"}
    for o, t in problem.objects.items():
        if t not in known:
            raise PDDLError(f"object {o!r} has undeclared type {t!r}", 0, 0)
    consts = set(problem.objects) | set(domain.constants)
    for atom in problem.init:
        lit = Literal(atom[0], atom[1:])
        _check_literals([lit], domain.predicates, None, "init")
        for a in atom[1:]:
            if a not in consts:
                raise PDDLError(f"untyped constant {a!r} in init", 0, 0)
    _check_literals(problem.goal, domain.predicates, None, "goal")
    for lit in problem.goal:
        for a in lit.args:
            if a not in consts:
                raise PDDLError(f"untyped constant {a!r} in goal", lit.line, lit.column)


# ---------------------------------------------------------------------------
# printing


def _typed_nodes(pairs) -> list:
    out = []
    for name, t in pairs:
        out += [name, "-", t]
    return out


def _formula_node(lits) -> SList:
    nodes = []
    for l in lits:
        a = lst(l.predicate, *l.args)
        nodes.append(a if l.positive else lst("not", a))
    if len(nodes) == 1:
        return nodes[0]
    return lst("and", *nodes)


def domain_to_sexpr(d: DomainDef) -> SList:
    items = ["define", lst("domain", d.name)]
    if d.requirements:
        items.append(lst(":requirements", *d.requirements))
    if d.types:
        items.append(lst(":types", *_typed_nodes(d.types.items())))
    if d.constants:
        items.append(lst(":constants", *_typed_nodes(d.constants.items())))
    if d.predicates:
        items.append(lst(":predicates", *(lst(p.name, *_typed_nodes(p.params)) for p in d.predicates.values())))
    for a in d.actions:
        items.append(lst(":action", a.name,
                         ":parameters", lst(*_typed_nodes(a.params)),
                         ":precondition", _formula_node(a.precondition),
                         ":effect", _formula_node(a.effect)))
    return lst(*items)


def problem_to_sexpr(p: ProblemDef) -> SList:
    return lst(
        "define", lst("problem", p.name),
        lst(":domain", p.domain_name),
        lst(":objects", *_typed_nodes(p.objects.items())),
        lst(":init", *(lst(*a) for a in sorted(p.init))),
        lst(":goal", lst("and", *(_formula_node([l]) for l in p.goal))),
    )


def to_text(d: Union[DomainDef, ProblemDef]) -> str:
    node = domain_to_sexpr(d) if isinstance(d, DomainDef) else problem_to_sexpr(d)
    return to_string(node) + "\n"


# ---------------------------------------------------------------------------
# grounding and semantics


def _static_predicates(domain: DomainDef) -> set[str]:
    dynamic = {l.predicate for a in domain.actions for l in a.effect}
    return set(domain.predicates) - dynamic


def _subst(lit: Literal, binding: dict) -> GroundAtom:
    return (lit.predicate,) + tuple(binding.get(a, a) for a in lit.args)


def ground(domain: DomainDef, problem: ProblemDef) -> list[GroundAction]:
    """Instantiate every action over type-compatible constants.

    Actions whose static preconditions contradict the initial state are
    pruned.  The result is in canonical order (name, then arguments).
    """
    validate_problem(domain, problem)
    universe = dict(domain.constants)
    universe.update(problem.objects)
    static = _static_predicates(domain)
    init = problem.init
    out: list[GroundAction] = []
    for schema in domain.actions:
        vars_ = [v for v, _ in schema.params]
        candidates = [
            sorted(o for o, t in universe.items() if domain.is_subtype(t, ptype))
            for _, ptype in schema.params
        ]
        # static literals become checkable once their last variable is bound
        checks: list[list[Literal]] = [[] for _ in vars_]
        ground_checks: list[Literal] = []
        for lit in schema.precondition:
            if lit.predicate not in static:
                continue
            pos = [vars_.index(a) for a in lit.args if a in vars_]
            (checks[max(pos)] if pos else ground_checks).append(lit)
        if any(((_subst(l, {}) in init) != l.positive) for l in ground_checks):
            continue

        binding: dict[str, str] = {}

        def rec(i: int):
            if i == len(vars_):
                yield dict(binding)
                return
            for c in candidates[i]:
                binding[vars_[i]] = c
                if all((_subst(l, binding) in init) == l.positive for l in checks[i]):
                    yield from rec(i + 1)
            binding.pop(vars_[i], None)

        for b in rec(0):
            pre_pos = frozenset(_subst(l, b) for l in schema.precondition if l.positive)
            pre_neg = frozenset(_subst(l, b) for l in schema.precondition if not l.positive)
            if pre_pos & pre_neg:
                continue
            add = frozenset(_subst(l, b) for l in schema.effect if l.positive)
            delete = frozenset(_subst(l, b) for l in schema.effect if not l.positive) - add
            out.append(GroundAction(schema.name, tuple(b[v] for v in vars_),
                                    pre_pos, pre_neg, add, delete))
    out.sort(key=lambda a: a.key)
    return out


def applicable(s: State, a: GroundAction) -> bool:
    return a.pre_pos <= s and not (a.pre_neg & s)


def apply(s: State, a: GroundAction) -> State:
    if not applicable(s, a):
        raise ContractViolation(f"{a} is not applicable")
    return (s - a.delete) | a.add


def goal_atoms(goal: Iterable[Literal]) -> tuple[frozenset, frozenset]:
    pos = frozenset((l.predicate,) + l.args for l in goal if l.positive)
    neg = frozenset((l.predicate,) + l.args for l in goal if not l.positive)
    return pos, neg


def satisfies(s: State, goal: Iterable[Literal]) -> bool:
    pos, neg = goal_atoms(goal)
    return pos <= s and not (neg & s)


def atom_universe(actions: Iterable[GroundAction], init: Iterable[GroundAtom]) -> frozenset:
    u = set(init)
    for a in actions:
        u |= a.pre_pos | a.pre_neg | a.add | a.delete
    return frozenset(u)


def replay(init: State, plan: Iterable[GroundAction]) -> State:
    s = frozenset(init)
    for a in plan:
        s = apply(s, a)
    return s


def find_action(actions: Iterable[GroundAction], text: str) -> GroundAction:
    """Look up a ground action by its printed form, e.g. ``(pick-vkc o1 t1 vkc)``."""
    key = tuple(text.strip().strip("()").lower().split())
    for a in actions:
        if a.key == key:
            return a
    raise KeyError(text)
