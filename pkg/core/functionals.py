# Path: core/functionals.py
"""
Norming functionals as trees.

    GroundLeaf(g)                 g a ground functional
    Weighted(j, (f_1, ..., f_d))  (1/m_j) * sum f_k,  d <= n_j, f_1 < ... < f_d
    Convex(((lam_j, W_j), ...))   sum lam_j W_j, W_j of weight index j, sum lam^2 <= 1

Children of a Weighted node are GroundLeaf or Convex nodes; terms of a
Convex node are Weighted nodes. Nodes compare by identity, so the engine can
share subtrees; every traversal here memoizes on id().

Addresses: the root is (); the term of weight index j of a Convex node at
gamma is gamma + (j,); the k-th child of a Weighted node is gamma + (k,).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, FrozenSet, Iterator, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from api.logger import get_logger
from core.config import TailRule, WeightConfig
from core.errors import (
    ConfigError,
    DimensionError,
    GroundSpaceError,
    NotWeightedError,
    ParseError,
    PreconditionError,
    TreeValidationError,
    UnsupportedError,
)
from core.ground import FiniteVector, GroundFunctional, GroundSpace, vector_sum
from core.rational import Enclosure, fmt, parse_rational

logger = get_logger(__name__)

Address = Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class GroundLeaf:
    functional: GroundFunctional


@dataclass(frozen=True, eq=False)
class Weighted:
    j: int
    children: Tuple["Node", ...]


@dataclass(frozen=True, eq=False)
class ConvexTerm:
    lam: Fraction
    child: Weighted


@dataclass(frozen=True, eq=False)
class Convex:
    terms: Tuple[ConvexTerm, ...] = ()

    def indices(self) -> List[int]:
        return [t.child.j for t in self.terms]


Node = Union[GroundLeaf, Weighted, Convex]

ZERO = Convex(())


def convex(*pairs: Tuple[Any, Weighted]) -> Convex:
    return Convex(tuple(ConvexTerm(parse_rational(lam), child) for lam, child in pairs))


def leaf(E: Tuple[int, int], coeffs: Sequence) -> GroundLeaf:
    return GroundLeaf(GroundFunctional(E, tuple(coeffs)))


# -------------------------------------------------------------------------
# validation
# -------------------------------------------------------------------------

class _Validator:
    def __init__(self, cfg: WeightConfig, space: GroundSpace):
        self.cfg = cfg
        self.space = space
        self.done: Set[int] = set()
        self.spans: Dict[int, Optional[Tuple[int, int]]] = {}

    def span(self, node: Node) -> Optional[Tuple[int, int]]:
        key = id(node)
        if key in self.spans:
            return self.spans[key]
        if isinstance(node, GroundLeaf):
            s = node.functional.span(self.space)
        elif isinstance(node, Weighted):
            parts = [p for p in (self.span(c) for c in node.children) if p is not None]
            s = (parts[0][0], parts[-1][1]) if parts else None
        else:
            parts = [p for p in (self.span(t.child) for t in node.terms if t.lam != 0) if p is not None]
            s = (min(p[0] for p in parts), max(p[1] for p in parts)) if parts else None
        self.spans[key] = s
        return s

    def check(self, node: Node, address: Address = ()):
        if id(node) in self.done:
            return
        if isinstance(node, GroundLeaf):
            try:
                node.functional.validate(self.space)
            except (DimensionError, GroundSpaceError) as e:
                raise TreeValidationError("ground functional", address, str(e))
        elif isinstance(node, Weighted):
            self._check_weighted(node, address)
        elif isinstance(node, Convex):
            self._check_convex(node, address)
        else:
            raise TreeValidationError("node kind", address, f"unknown node {type(node).__name__}")
        self.done.add(id(node))

    def _check_weighted(self, node: Weighted, address: Address):
        try:
            cap = self.cfg.max_children(node.j)
        except (ConfigError, UnsupportedError) as e:
            raise TreeValidationError("weight index", address, str(e))
        if not node.children:
            raise TreeValidationError("weighted children", address, "at least one child is required")
        if len(node.children) > cap:
            raise TreeValidationError(
                "weighted children", address, f"{len(node.children)} children exceed n_{node.j} = {cap}"
            )
        last = None
        for k, child in enumerate(node.children, start=1):
            if not isinstance(child, (GroundLeaf, Convex)):
                raise TreeValidationError("nesting", address + (k,), "children of a weighted node are ground or convex")
            self.check(child, address + (k,))
            s = self.span(child)
            if s is None:
                continue
            if last is not None and s[0] <= last:
                raise TreeValidationError(
                    "successive children", address + (k,), f"starts at {s[0]} but a previous child ends at {last}"
                )
            last = s[1]

    def _check_convex(self, node: Convex, address: Address):
        seen = set()
        total = Fraction(0)
        for term in node.terms:
            if not isinstance(term.child, Weighted):
                raise TreeValidationError("nesting", address, "terms of a convex node are weighted")
            j = term.child.j
            if j in seen:
                raise TreeValidationError("one term per weight", address + (j,), f"index {j} repeated")
            seen.add(j)
            if term.lam < 0:
                raise TreeValidationError("nonnegative coefficient", address + (j,), f"lambda = {fmt(term.lam)}")
            total += term.lam * term.lam
            self.check(term.child, address + (j,))
        if total > 1:
            raise TreeValidationError("l2 coefficients", address, f"sum lambda^2 = {fmt(total)} > 1")


def validate(cfg: WeightConfig, space: GroundSpace, f: Node, require_member: bool = False) -> Node:
    """Raise TreeValidationError naming the clause and node address; return f."""
    if require_member and isinstance(f, Weighted):
        raise TreeValidationError("norming set membership", (), "a bare weighted node is not in D; wrap it in a convex node")
    _Validator(cfg, space).check(f)
    return f


def span(space: GroundSpace, f: Node) -> Optional[Tuple[int, int]]:
    return _Validator(None, space).span(f)  # type: ignore[arg-type]


# -------------------------------------------------------------------------
# evaluation and coefficients
# -------------------------------------------------------------------------

def evaluate(cfg: WeightConfig, space: GroundSpace, f: Node, x: FiniteVector, check: bool = True) -> Fraction:
    if check:
        validate(cfg, space, f)
    memo: Dict[int, Fraction] = {}

    def ev(node: Node) -> Fraction:
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, GroundLeaf):
            value = node.functional.evaluate(space, x)
        elif isinstance(node, Weighted):
            value = sum((ev(c) for c in node.children), Fraction(0)) / cfg.weight(node.j)
        else:
            value = sum((t.lam * ev(t.child) for t in node.terms if t.lam), Fraction(0))
        memo[key] = value
        return value

    return ev(f)


def coefficients(cfg: WeightConfig, space: GroundSpace, f: Node) -> Dict[int, Fraction]:
    """k -> f(e_k) over the coordinates where it is nonzero."""
    memo: Dict[int, Dict[int, Fraction]] = {}

    def co(node: Node) -> Dict[int, Fraction]:
        key = id(node)
        if key in memo:
            return memo[key]
        out: Dict[int, Fraction] = {}
        if isinstance(node, GroundLeaf):
            a, b = node.functional.E
            for k in range(a, b + 1):
                c = node.functional.coefficient(space, k)
                if c:
                    out[k] = c
        elif isinstance(node, Weighted):
            m = cfg.weight(node.j)
            for child in node.children:
                for k, c in co(child).items():
                    out[k] = out.get(k, Fraction(0)) + c / m
        else:
            for t in node.terms:
                if t.lam:
                    for k, c in co(t.child).items():
                        out[k] = out.get(k, Fraction(0)) + t.lam * c
        memo[key] = {k: c for k, c in out.items() if c}
        return memo[key]

    return co(f)


def sup_norm(cfg: WeightConfig, space: GroundSpace, f: Node) -> Fraction:
    return max((abs(c) for c in coefficients(cfg, space, f).values()), default=Fraction(0))


def masked_coefficients(cfg: WeightConfig, space: GroundSpace, f: Node, keep: Set[Address]) -> Dict[int, Fraction]:
    """Coefficients of the functional obtained by keeping only the terminal nodes in keep."""
    out: Dict[int, Fraction] = {}

    def walk(node: Node, address: Address, mult: Fraction):
        if isinstance(node, GroundLeaf):
            if address in keep:
                a, b = node.functional.E
                for k in range(a, b + 1):
                    c = node.functional.coefficient(space, k)
                    if c:
                        out[k] = out.get(k, Fraction(0)) + mult * c
        elif isinstance(node, Weighted):
            m = cfg.weight(node.j)
            for k, child in enumerate(node.children, start=1):
                walk(child, address + (k,), mult / m)
        else:
            for t in node.terms:
                if t.lam:
                    walk(t.child, address + (t.child.j,), mult * t.lam)

    walk(f, (), Fraction(1))
    return {k: c for k, c in out.items() if c}


def apply_coefficients(coeffs: Dict[int, Fraction], x: FiniteVector) -> Fraction:
    return sum((coeffs.get(k, Fraction(0)) * v for k, v in x.entries), Fraction(0))


# -------------------------------------------------------------------------
# structure
# -------------------------------------------------------------------------

def children_with_addresses(node: Node, address: Address) -> List[Tuple[Address, Node]]:
    if isinstance(node, Weighted):
        return [(address + (k,), c) for k, c in enumerate(node.children, start=1)]
    if isinstance(node, Convex):
        return [(address + (t.child.j,), t.child) for t in node.terms]
    return []


def terminal_nodes(f: Node) -> List[Tuple[Address, GroundLeaf]]:
    """The set M_f of terminal nodes, in depth-first order."""
    out: List[Tuple[Address, GroundLeaf]] = []
    stack: List[Tuple[Address, Node]] = [((), f)]
    while stack:
        address, node = stack.pop()
        if isinstance(node, GroundLeaf):
            out.append((address, node))
        else:
            stack.extend(reversed(children_with_addresses(node, address)))
    return out


def node_at(f: Node, address: Address) -> Node:
    node = f
    for depth, step in enumerate(address):
        match = [c for a, c in children_with_addresses(node, address[:depth]) if a[-1] == step]
        if not match:
            raise TreeValidationError("address", address[: depth + 1], "does not resolve to a node")
        node = match[0]
    return node


def weighted_ancestors(f: Node, address: Address) -> List[Tuple[Address, int]]:
    """Strict ancestors of the node at address that are weighted, with their index."""
    out = []
    for depth in range(len(address)):
        node = node_at(f, address[:depth])
        if isinstance(node, Weighted):
            out.append((address[:depth], node.j))
    return out


def expanded_size(f: Node) -> int:
    memo: Dict[int, int] = {}

    def size(node: Node) -> int:
        key = id(node)
        if key not in memo:
            memo[key] = 1 + sum(size(c) for _, c in children_with_addresses(node, ()))
        return memo[key]

    return size(f)


# -------------------------------------------------------------------------
# weights, splitting, combination
# -------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightDescriptor:
    indices: FrozenSet[int]
    weights: Tuple[int, ...]

    @property
    def is_weighted(self) -> bool:
        return len(self.indices) == 1

    def to_dict(self) -> dict:
        return {
            "indices": sorted(self.indices),
            "weights": list(self.weights),
            "weighted": self.is_weighted,
            "note": "weights annotate the tree; the functional may admit other representations",
        }


def weight_of(cfg: WeightConfig, f: Node) -> WeightDescriptor:
    if isinstance(f, Weighted):
        indices = frozenset({f.j})
    elif isinstance(f, Convex):
        indices = frozenset(t.child.j for t in f.terms if t.lam != 0)
    else:
        raise NotWeightedError("a ground functional carries no weight")
    return WeightDescriptor(indices, tuple(cfg.weight(j) for j in sorted(indices)))


def split_at(f: Node, i0: int) -> Tuple[Convex, Convex]:
    """(f_{<=i0}, f_{>i0})."""
    if not isinstance(f, Convex):
        raise TreeValidationError("split root", (), "splitting needs a convex root")
    low = tuple(t for t in f.terms if t.child.j <= i0)
    high = tuple(t for t in f.terms if t.child.j > i0)
    return Convex(low), Convex(high)


def combine_orthogonal(cfg: WeightConfig, space: GroundSpace, psi: Node, phi: Node, lam) -> Convex:
    """lam * (psi + phi) as one convex node; psi and phi must use disjoint weight indices."""
    lam = parse_rational(lam)
    if lam < 0 or 2 * lam * lam > 1:
        raise PreconditionError(f"combine_orthogonal: need 2 lam^2 <= 1, got lam = {fmt(lam)}")
    terms: List[ConvexTerm] = []
    for name, g in (("psi", psi), ("phi", phi)):
        if isinstance(g, Weighted):
            terms.append(ConvexTerm(Fraction(1), g))
        elif isinstance(g, Convex):
            terms.extend(g.terms)
        else:
            raise PreconditionError(f"combine_orthogonal: {name} must be weighted or convex")
    indices = [t.child.j for t in terms]
    if len(set(indices)) != len(indices):
        raise PreconditionError(f"combine_orthogonal: weight indices overlap: {sorted(indices)}")
    out = Convex(tuple(sorted((ConvexTerm(t.lam * lam, t.child) for t in terms), key=lambda t: t.child.j)))
    validate(cfg, space, out)
    return out


# -------------------------------------------------------------------------
# lemma checkers
# -------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "details": _jsonable(self.details)}


def _jsonable(value):
    if isinstance(value, Fraction):
        return fmt(value)
    if isinstance(value, Enclosure):
        return value.to_dict()
    if isinstance(value, FiniteVector):
        return value.to_dict()
    if isinstance(value, (GroundLeaf, Weighted, Convex)):
        return tree_to_json(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def lemma_finitesupport_index(cfg: WeightConfig, y: FiniteVector, eps: Fraction) -> Tuple[int, Fraction]:
    """Smallest i >= 1 with mass(y) * sum_{j>i} 1/m_j < eps."""
    if cfg.tail_rule is not TailRule.DOUBLING:
        raise UnsupportedError("the index needs sum_{j>i} 1/m_j, undefined without tail_rule = doubling")
    eps = parse_rational(eps)
    if eps <= 0:
        raise PreconditionError(f"eps must be positive, got {fmt(eps)}")
    mass = len(y.support) * max(Fraction(1), y.sup())
    i = 1
    while mass * cfg.inverse_sum_after(i) >= eps:
        i += 1
    return i, mass * cfg.inverse_sum_after(i)


def check_lemma_finitesupport(cfg: WeightConfig, space: GroundSpace, f: Node, y: FiniteVector, eps) -> CheckResult:
    if not isinstance(f, Convex):
        raise PreconditionError("the finite-support tail check needs a convex root")
    eps = parse_rational(eps)
    i0, bound = lemma_finitesupport_index(cfg, y, eps)
    _, high = split_at(f, i0)
    value = evaluate(cfg, space, high, y)
    return CheckResult(
        "finite_support_tail",
        abs(value) < eps,
        {"i0": i0, "tail_value": value, "analytic_bound": bound, "eps": eps},
    )


def check_lemma_smallweight(
    cfg: WeightConfig,
    space: GroundSpace,
    f: Node,
    blocks: Sequence[FiniteVector],
    j: int,
    block_norms: Optional[Sequence[Enclosure]] = None,
) -> CheckResult:
    desc = weight_of(cfg, f)
    if not desc.is_weighted:
        raise PreconditionError(f"functional must carry a single weight, has indices {sorted(desc.indices)}")
    (j0,) = desc.indices
    if j <= j0:
        raise PreconditionError(f"need j > j0, got j={j}, j0={j0}")
    count = cfg.max_children(j)
    if len(blocks) != count:
        raise PreconditionError(f"need n_{j} = {count} blocks, got {len(blocks)}")
    for k, block in enumerate(blocks):
        if block.is_zero():
            raise PreconditionError(f"block {k + 1} is zero")
        if k and blocks[k - 1].support[-1] >= block.support[0]:
            raise PreconditionError(f"blocks {k} and {k + 1} are not successive")
    if block_norms is None:
        from core.norm_engine import norm

        block_norms = [norm(cfg, space, b, target_width=Fraction(1, 2**20)).enclosure for b in blocks]
    for k, e in enumerate(block_norms):
        if not e.contains(1):
            raise PreconditionError(f"block {k + 1} is not normalized: enclosure [{fmt(e.lo)}, {fmt(e.hi)}]")
    average = vector_sum(blocks).scale(Fraction(1, count))
    value = evaluate(cfg, space, f, average)
    bound = Fraction(3, cfg.weight(j0))
    return CheckResult("small_weight_average", value < bound, {"j0": j0, "j": j, "value": value, "bound": bound, "margin": bound - value})


# -------------------------------------------------------------------------
# random generation
# -------------------------------------------------------------------------

@dataclass(frozen=True)
class TreeShape:
    kind: str = "free"  # free | min_terminal_depth | weight_floor
    value: int = 0


class _TreeSampler:
    def __init__(self, cfg: WeightConfig, space: GroundSpace, shape: TreeShape, rng: np.random.Generator,
                 max_depth: int, leaf_probability: float = 0.5):
        self.cfg = cfg
        self.space = space
        self.shape = shape
        self.rng = rng
        self.max_depth = max_depth
        self.leaf_probability = leaf_probability
        self.F = sorted(set(space.norming_set))

    def _leaf(self, lo: int, hi: int) -> GroundLeaf:
        a = int(self.rng.integers(lo, hi + 1))
        b = int(self.rng.integers(a, hi + 1))
        return GroundLeaf(GroundFunctional((a, b), self.F[int(self.rng.integers(len(self.F)))]))

    def _lambdas(self, k: int) -> List[Fraction]:
        c = [int(v) for v in self.rng.integers(1, 9, size=k)]
        sq = sum(v * v for v in c)
        root = math.isqrt(sq)
        if root * root < sq:
            root += 1
        return [Fraction(v, root) for v in c]

    def convex(self, lo: int, hi: int, depth: int, floored: bool) -> Convex:
        J = self.cfg.J
        pool = list(range(1, J + 1))
        if self.shape.kind == "weight_floor" and not floored and depth + 4 > self.max_depth:
            pool = list(range(self.shape.value, J + 1))
        k = int(self.rng.integers(1, min(len(pool), 3) + 1))
        indices = sorted(int(v) for v in self.rng.choice(pool, size=k, replace=False))
        return Convex(tuple(
            ConvexTerm(lam, self.weighted(j, lo, hi, depth + 1, floored))
            for lam, j in zip(self._lambdas(k), indices)
        ))

    def weighted(self, j: int, lo: int, hi: int, depth: int, floored: bool) -> Weighted:
        floored = floored or (self.shape.kind == "weight_floor" and j >= self.shape.value)
        length = hi - lo + 1
        d = int(self.rng.integers(1, min(self.cfg.max_children(j), length, 4) + 1))
        cuts = sorted(int(v) for v in self.rng.choice(np.arange(lo, hi), size=d - 1, replace=False)) if d > 1 else []
        bounds = list(zip([lo] + [c + 1 for c in cuts], cuts + [hi]))
        children: List[Node] = []
        for a, b in bounds:
            child_depth = depth + 1
            if self.shape.kind == "min_terminal_depth":
                leaf_ok = child_depth >= self.shape.value
            elif self.shape.kind == "weight_floor":
                leaf_ok = floored
            else:
                leaf_ok = True
            convex_ok = child_depth + 2 <= self.max_depth
            if leaf_ok and (not convex_ok or self.rng.random() < self.leaf_probability):
                children.append(self._leaf(a, b))
            elif convex_ok:
                children.append(self.convex(a, b, child_depth, floored))
            else:
                raise PreconditionError(f"random_tree: shape {self.shape} unsatisfiable within depth {self.max_depth}")
        return Weighted(j, tuple(children))


def random_tree(
    cfg: WeightConfig,
    space: GroundSpace,
    shape: TreeShape = TreeShape(),
    seed: int = 0,
    width: int = 12,
    max_depth: Optional[int] = None,
    strict_alternation: bool = False,
) -> Node:
    """
    Seeded random tree on coordinates 1..width. With strict_alternation the
    root is convex, so convex nodes sit at even depths and weighted nodes at
    odd depths; otherwise a free tree may also have a weighted root.
    """
    if shape.kind not in ("free", "min_terminal_depth", "weight_floor"):
        raise PreconditionError(f"random_tree: unknown shape {shape.kind!r}")
    if shape.kind == "weight_floor" and not 1 <= shape.value <= cfg.J:
        raise PreconditionError(f"random_tree: weight floor {shape.value} outside 1..{cfg.J}")
    if max_depth is None:
        if shape.kind == "min_terminal_depth":
            max_depth = max(2, shape.value + (shape.value % 2)) + 2
        elif shape.kind == "weight_floor":
            max_depth = 6
        else:
            max_depth = 4
    rng = np.random.default_rng(seed)
    sampler = _TreeSampler(cfg, space, shape, rng, max_depth)
    if shape.kind == "free" and not strict_alternation and rng.random() < 0.25:
        j = int(rng.integers(1, cfg.J + 1))
        tree: Node = sampler.weighted(j, 1, width, 0, False)
    else:
        tree = sampler.convex(1, width, 0, False)
    return validate(cfg, space, tree)


def random_weighted_tree(cfg: WeightConfig, space: GroundSpace, j: int, seed: int = 0, width: int = 12,
                         max_depth: int = 4) -> Weighted:
    """Seeded random weighted functional of index j on coordinates 1..width."""
    if not 1 <= j <= cfg.J:
        raise PreconditionError(f"random_weighted_tree: index {j} outside 1..{cfg.J}")
    sampler = _TreeSampler(cfg, space, TreeShape(), np.random.default_rng(seed), max_depth)
    tree = sampler.weighted(j, 1, width, 0, False)
    validate(cfg, space, tree)
    return tree


# -------------------------------------------------------------------------
# serialization
# -------------------------------------------------------------------------

def tree_to_json(f: Node) -> Dict[str, Any]:
    memo: Dict[int, Dict[str, Any]] = {}

    def enc(node: Node) -> Dict[str, Any]:
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, GroundLeaf):
            out = {"kind": "ground", **node.functional.to_dict()}
        elif isinstance(node, Weighted):
            out = {"kind": "weighted", "j": node.j, "children": [enc(c) for c in node.children]}
        else:
            out = {"kind": "convex", "terms": [{"lambda": fmt(t.lam), "child": enc(t.child)} for t in node.terms]}
        memo[key] = out
        return out

    return enc(f)


def tree_to_shared_json(f: Node) -> Dict[str, Any]:
    """Node table with integer references; keeps shared subtrees shared."""
    ids: Dict[int, int] = {}
    table: List[Dict[str, Any]] = []

    def enc(node: Node) -> int:
        key = id(node)
        if key in ids:
            return ids[key]
        if isinstance(node, GroundLeaf):
            entry = {"kind": "ground", **node.functional.to_dict()}
        elif isinstance(node, Weighted):
            entry = {"kind": "weighted", "j": node.j, "children": [enc(c) for c in node.children]}
        else:
            entry = {"kind": "convex", "terms": [{"lambda": fmt(t.lam), "child": enc(t.child)} for t in node.terms]}
        ids[key] = len(table)
        table.append(entry)
        return ids[key]

    root = enc(f)
    return {"shared": True, "root": root, "nodes": table}


def tree_from_json(data: Union[str, Dict[str, Any]]) -> Node:
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", f"line {e.lineno} column {e.colno}")
    if isinstance(data, dict) and data.get("shared"):
        nodes = data.get("nodes", [])
        built: Dict[int, Node] = {}

        def ref(i: Any, where: str) -> Node:
            if not isinstance(i, int) or not 0 <= i < len(nodes):
                raise ParseError(f"bad node reference {i!r}", where)
            if i not in built:
                built[i] = _decode(nodes[i], f"nodes[{i}]", lambda c, w: ref(c, w))
            return built[i]

        return ref(data.get("root"), "root")
    return _decode(data, "$", lambda c, w: _decode(c, w, None))


def _decode(obj: Any, where: str, sub) -> Node:
    if sub is None:
        sub = lambda c, w: _decode(c, w, None)  # noqa: E731
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ParseError("expected an object with a 'kind' tag", where)
    kind = obj["kind"]
    try:
        if kind == "ground":
            E = obj["E"]
            return GroundLeaf(GroundFunctional((int(E[0]), int(E[1])), tuple(parse_rational(c, where) for c in obj["coeffs"])))
        if kind == "weighted":
            children = tuple(sub(c, f"{where}.children[{k}]") for k, c in enumerate(obj["children"]))
            return Weighted(int(obj["j"]), children)
        if kind == "convex":
            terms = []
            for k, t in enumerate(obj["terms"]):
                child = sub(t["child"], f"{where}.terms[{k}].child")
                if not isinstance(child, Weighted):
                    raise ParseError("convex terms must be weighted nodes", f"{where}.terms[{k}]")
                terms.append(ConvexTerm(parse_rational(t["lambda"], f"{where}.terms[{k}].lambda"), child))
            return Convex(tuple(terms))
    except (KeyError, IndexError, TypeError) as e:
        raise ParseError(f"malformed {kind} node ({e})", where)
    raise ParseError(f"unknown node kind {kind!r}", where)


def iter_nodes(f: Node) -> Iterator[Tuple[Address, Node]]:
    stack: List[Tuple[Address, Node]] = [((), f)]
    while stack:
        address, node = stack.pop()
        yield address, node
        stack.extend(reversed(children_with_addresses(node, address)))
