# Path: core/jtree.py
"""
Tree norm of J_{2,1}-type spaces on finite rooted trees:

    ||z||^2 = max over families of pairwise incomparable nonempty segments
              of sum_i (sum_{t in s_i} |z(t)|)^2

Two segments are incomparable when no node of one is an ancestor-or-equal
of a node of the other. Every node hanging below a segment is comparable
with its top, so the maximum decomposes as

    F(v) = max( sum_{c child of v} F(c),  max_{u below or at v} (sum_{[v, u]} |z|)^2 ).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from api.logger import get_logger
from core.errors import ParseError, PreconditionError
from core.rational import Enclosure, fmt, parse_rational

logger = get_logger(__name__)

BRUTEFORCE_CAP = 12


@dataclass
class TreeNode:
    value: Fraction
    children: List["TreeNode"] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"value": fmt(self.value), "children": [c.to_dict() for c in self.children]}

    def to_text(self) -> str:
        inner = " ".join([fmt(self.value)] + [c.to_text() for c in self.children])
        return f"({inner})"


@dataclass(frozen=True)
class Segment:
    """The chain {b : top <= b <= bottom}, nodes given by preorder index."""

    top: int
    bottom: int


class TreeVector:
    """A rational vector on the nodes of a finite rooted tree with ordered children."""

    def __init__(self, root: TreeNode):
        self.root = root
        self.values: List[Fraction] = []
        self.parent: List[Optional[int]] = []
        self.children: List[List[int]] = []
        stack: List[Tuple[TreeNode, Optional[int]]] = [(root, None)]
        while stack:
            node, parent = stack.pop()
            idx = len(self.values)
            self.values.append(parse_rational(node.value))
            self.parent.append(parent)
            self.children.append([])
            if parent is not None:
                self.children[parent].append(idx)
            stack.extend((c, idx) for c in reversed(node.children))

    def __len__(self) -> int:
        return len(self.values)

    def ancestors_or_self(self, v: int) -> List[int]:
        out = []
        while v is not None:
            out.append(v)
            v = self.parent[v]
        return out

    def segments(self) -> List[Segment]:
        return [Segment(top, bottom) for bottom in range(len(self)) for top in self.ancestors_or_self(bottom)]

    def segment_nodes(self, s: Segment) -> List[int]:
        out, v = [], s.bottom
        while True:
            out.append(v)
            if v == s.top:
                return out
            v = self.parent[v]

    def subtree(self, v: int) -> "TreeVector":
        def build(i: int) -> TreeNode:
            return TreeNode(self.values[i], [build(c) for c in self.children[i]])

        return TreeVector(build(v))

    def to_dict(self) -> dict:
        return self.root.to_dict()


# ----------------- parsing -----------------

_TOKEN = re.compile(r"\s*(\(|\)|[^\s()]+)")


def parse_tree_text(text: str) -> TreeVector:
    """'(1 (3) (4))': a node is '(' value child* ')'."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", f"offset {pos}")
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    cursor = 0

    def node() -> TreeNode:
        nonlocal cursor
        if cursor >= len(tokens) or tokens[cursor][0] != "(":
            where = tokens[cursor][1] if cursor < len(tokens) else len(text)
            raise ParseError("expected '('", f"offset {where}")
        cursor += 1
        if cursor >= len(tokens) or tokens[cursor][0] in "()":
            raise ParseError("expected a node value", f"offset {tokens[cursor - 1][1]}")
        tok, at = tokens[cursor]
        value = parse_rational(tok, f"offset {at}")
        cursor += 1
        children = []
        while cursor < len(tokens) and tokens[cursor][0] == "(":
            children.append(node())
        if cursor >= len(tokens) or tokens[cursor][0] != ")":
            raise ParseError("expected ')'", f"offset {tokens[cursor][1] if cursor < len(tokens) else len(text)}")
        cursor += 1
        return TreeNode(value, children)

    root = node()
    if cursor != len(tokens):
        raise ParseError("trailing input after the root", f"offset {tokens[cursor][1]}")
    return TreeVector(root)


def _node_from_json(obj: Any, where: str) -> TreeNode:
    if isinstance(obj, (int, str)) and not isinstance(obj, bool):
        return TreeNode(parse_rational(obj, where))
    if isinstance(obj, list):
        if not obj:
            raise ParseError("empty list is not a node", where)
        return TreeNode(parse_rational(obj[0], f"{where}[0]"),
                        [_node_from_json(c, f"{where}[{i}]") for i, c in enumerate(obj[1:], start=1)])
    if not isinstance(obj, dict):
        raise ParseError("expected an object with 'value' and 'children'", where)
    unknown = set(obj) - {"value", "children"}
    if unknown:
        raise ParseError(f"unknown keys {sorted(unknown)}", where)
    if "value" not in obj:
        raise ParseError("missing 'value'", where)
    children = obj.get("children", [])
    if not isinstance(children, list):
        raise ParseError("'children' must be a list", f"{where}.children")
    return TreeNode(
        parse_rational(obj["value"], f"{where}.value"),
        [_node_from_json(c, f"{where}.children[{i}]") for i, c in enumerate(children)],
    )


def parse_tree(data: Union[str, Dict[str, Any], list]) -> TreeVector:
    """Nested JSON ({"value", "children"} or [value, child...]) or parenthesised text."""
    if isinstance(data, str):
        text = data.strip()
        if text.startswith("("):
            return parse_tree_text(text)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", f"line {e.lineno} column {e.colno}")
    return TreeVector(_node_from_json(data, "$"))


# ----------------- norms -----------------

def jtree_norm_squared(tv: TreeVector) -> Fraction:
    n = len(tv)
    F: List[Fraction] = [Fraction(0)] * n
    down: List[Fraction] = [Fraction(0)] * n
    # preorder indices: children always come after their parent
    for v in range(n - 1, -1, -1):
        kids = tv.children[v]
        down[v] = abs(tv.values[v]) + max((down[c] for c in kids), default=Fraction(0))
        F[v] = max(sum((F[c] for c in kids), Fraction(0)), down[v] ** 2)
    return F[0]


def jtree_norm(tv: TreeVector, bits: int = 64) -> Enclosure:
    return Enclosure.sqrt(jtree_norm_squared(tv), bits)


def jtree_norm_bruteforce(tv: TreeVector) -> Fraction:
    """Exhaustive max over families of pairwise incomparable segments (squared)."""
    n = len(tv)
    if n > BRUTEFORCE_CAP:
        raise PreconditionError(f"jtree_norm_bruteforce: {n} nodes exceed the cap of {BRUTEFORCE_CAP}")
    below = [0] * n
    for v in range(n - 1, -1, -1):
        below[v] = (1 << v) | sum(below[c] for c in tv.children[v])
    segs = []
    for s in tv.segments():
        nodes = tv.segment_nodes(s)
        mask = sum(1 << v for v in nodes)
        cone = below[s.top] | sum(1 << v for v in tv.ancestors_or_self(s.bottom))
        weight = sum((abs(tv.values[v]) for v in nodes), Fraction(0)) ** 2
        segs.append((mask, cone, weight))

    best = Fraction(0)

    def extend(start: int, blocked: int, total: Fraction):
        nonlocal best
        for i in range(start, len(segs)):
            mask, cone, weight = segs[i]
            if mask & blocked:
                continue
            value = total + weight
            if value > best:
                best = value
            extend(i + 1, blocked | cone, value)

    extend(0, 0, Fraction(0))
    return best


def random_tree_vector(rng: np.random.Generator, size: int, low: int = -5, high: int = 5,
                       denominator: int = 1) -> TreeVector:
    """Random recursive tree: node i hangs below a uniform earlier node."""
    if size < 1:
        raise PreconditionError(f"random_tree_vector: size must be >= 1, got {size}")
    nodes = [TreeNode(Fraction(int(rng.integers(low, high + 1)), denominator))]
    for i in range(1, size):
        parent = nodes[int(rng.integers(0, i))]
        child = TreeNode(Fraction(int(rng.integers(low, high + 1)), denominator))
        parent.children.append(child)
        nodes.append(child)
    return TreeVector(nodes[0])


def tree_from_values(values: Sequence, parents: Sequence[Optional[int]]) -> TreeVector:
    """Build from a parent array (parents[0] is None, parents[i] < i)."""
    if not values or parents[0] is not None:
        raise PreconditionError("tree_from_values: node 0 must be the root")
    nodes = [TreeNode(parse_rational(v)) for v in values]
    for i, p in enumerate(parents[1:], start=1):
        if p is None or not 0 <= p < i:
            raise PreconditionError(f"tree_from_values: node {i} has parent {p}")
        nodes[p].children.append(nodes[i])
    return TreeVector(nodes[0])
