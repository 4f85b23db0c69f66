"""S-expression reader/printer with source spans.

One lexer serves both the PDDL front end and the ``.scene`` format.
Comments run from ``;`` to end of line.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Atom:
    text: str
    line: int = 0
    column: int = 0

    def __eq__(self, other):
        return isinstance(other, Atom) and other.text == self.text

    def __hash__(self):
        return hash(self.text)


@dataclass(frozen=True)
class SList:
    children: tuple
    line: int = 0
    column: int = 0
    end_line: int = 0
    end_column: int = 0

    def __eq__(self, other):
        return isinstance(other, SList) and other.children == self.children

    def __hash__(self):
        return hash(self.children)

    def __iter__(self):
        return iter(self.children)

    def __len__(self):
        return len(self.children)

    def __getitem__(self, i):
        return self.children[i]

    def head(self) -> str | None:
        if self.children and isinstance(self.children[0], Atom):
            return self.children[0].text
        return None


SExpr = Union[Atom, SList]


def tokenize(text: str) -> Iterator[tuple[str, int, int]]:
    """Yield (token, line, column); columns and lines are 1-based."""
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch.isspace():
            i += 1
            col += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield ch, line, col
            i += 1
            col += 1
        else:
            start, scol = i, col
            while i < n and not text[i].isspace() and text[i] not in "();":
                i += 1
                col += 1
            yield text[start:i], line, scol


def parse_all(text: str) -> list[SExpr]:
    """Parse every top-level form in ``text``."""
    stack: list[tuple[list, int, int]] = []
    forms: list[SExpr] = []
    last = (1, 1)
    for tok, line, col in tokenize(text):
        last = (line, col)
        if tok == "(":
            stack.append(([], line, col))
        elif tok == ")":
            if not stack:
                raise ParseError("unexpected ')'", line, col)
            items, l0, c0 = stack.pop()
            node = SList(tuple(items), l0, c0, line, col)
            (stack[-1][0] if stack else forms).append(node)
        else:
            node = Atom(tok, line, col)
            (stack[-1][0] if stack else forms).append(node)
    if stack:
        _, l0, c0 = stack[-1]
        raise ParseError(f"unbalanced '(' opened here; input ended at {last[0]}:{last[1]}", l0, c0)
    return forms


def parse_one(text: str) -> SExpr:
    forms = parse_all(text)
    if len(forms) != 1:
        line = forms[1].line if len(forms) > 1 else 1
        raise ParseError(f"expected exactly one form, found {len(forms)}", line, 1)
    return forms[0]


def to_string(node: SExpr, indent: int | None = 2, width: int = 72) -> str:
    """Print a node; lists that fit in ``width`` stay on one line."""
    if isinstance(node, Atom):
        return node.text
    flat = "(" + " ".join(to_string(c, None) for c in node.children) + ")"
    if indent is None or len(flat) <= width:
        return flat
    parts = [to_string(c, indent, width - indent) for c in node.children]
    pad = " " * indent
    lines: list[str] = []
    atom_line = False  # runs of atoms share lines
    for c, p in zip(node.children[1:], parts[1:]):
        if isinstance(c, Atom) and atom_line and len(lines[-1]) + 1 + len(p) <= width - indent:
            lines[-1] += " " + p
        else:
            lines.append(p)
        atom_line = isinstance(c, Atom)
    body = "\n".join(pad + p.replace("\n", "\n" + pad) for p in lines)
    return "(" + parts[0] + ("\n" + body if body else "") + ")"


def lst(*items) -> SList:
    """Build an SList from atoms, nested SLists or plain strings."""
    out = []
    for it in items:
        if isinstance(it, (Atom, SList)):
            out.append(it)
        else:
            out.append(Atom(str(it)))
    return SList(tuple(out))
