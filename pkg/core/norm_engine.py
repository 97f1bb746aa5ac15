# Path: core/norm_engine.py
"""
Certified enclosures of ||x|| = sup_{f in D} f(x).

Work happens on the support positions p = 0..s-1 of x; an interval [a, b]
of positions stands for the coordinate interval [supp[a], supp[b]].

    g(E)   = max over sub-intervals E' of ||Q(x|E')||_Z          (exact)
    W_j(E) = (1/m_j) max over partitions E_1 < ... < E_c, c <= n_j, of sum N(E_k)
    C(E)   = sqrt(sum_j W_j(E)^2 + tail(E))
    N(E)   = max(g(E), C(E))

Upper side: Jacobi sweeps from N^0 = ||x|E||_1, self reference (c = 1)
included; the gap after k sweeps is at most rho^k ||x|E||_1.
Lower side: one pass over intervals by length with c >= 2 only (the norm is
subadditive over splits, so c = 1 never wins); every value is attained by
an explicit tree. Values are dyadic integers scaled by 2^bits, rounded
outward: floor on the lower side, ceil on the upper side.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, product
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from api.logger import get_logger
from core.config import TailRule, WeightConfig
from core.errors import ContractionError, EnumerationCapError, UnsupportedError
from core.functionals import (
    ZERO,
    Convex,
    ConvexTerm,
    GroundLeaf,
    Node,
    Weighted,
    evaluate,
    expanded_size,
    tree_to_json,
    tree_to_shared_json,
)
from core.ground import FiniteVector, GroundFunctional, GroundSpace, _dot, dual_certificate
from core.rational import Enclosure, fmt, parse_rational

logger = get_logger(__name__)

DEFAULT_TARGET_WIDTH = parse_rational(os.getenv("TSIRELSON_TARGET_WIDTH", "1/1000000000"))
MAX_SWEEPS = int(os.getenv("TSIRELSON_MAX_SWEEPS", "200"))
TAIL_TERMS = int(os.getenv("TSIRELSON_TAIL_TERMS", "6"))
ENUM_CAP = int(os.getenv("TSIRELSON_ENUM_CAP", "200000"))
GUARD_BITS = 16
MIN_BITS = 48

MODES = ("truncated", "extended")


def precision_for(target_width: Fraction) -> int:
    """Bits so that one rounding step stays below target_width / 4."""
    if target_width <= 0:
        return 128
    quarter = Fraction(target_width) / 4
    needed = (quarter.denominator // quarter.numerator + 1).bit_length()
    return max(MIN_BITS, needed + GUARD_BITS)


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def _ceil_isqrt(n: int) -> int:
    r = math.isqrt(n)
    return r if r * r == n else r + 1


# -------------------------------------------------------------------------
# problem setup
# -------------------------------------------------------------------------

@dataclass(frozen=True)
class _Weight:
    j: int
    m: int
    cap: int


class _Problem:
    def __init__(self, cfg: WeightConfig, space: GroundSpace, x: FiniteVector, extended: bool, bits: int):
        self.cfg = cfg
        self.space = space
        self.x = x
        self.extended = extended
        self.bits = bits
        self.scale = 1 << bits
        self.coords = [k for k, _ in x.entries]
        self.values = [v for _, v in x.entries]
        self.s = len(self.coords)

        self.upper_weights = [_Weight(j, cfg.weight(j), cfg.max_children(j)) for j in range(1, cfg.J + 1)]
        self.lower_weights = list(self.upper_weights)
        if extended:
            for k in range(1, TAIL_TERMS + 1):
                j = cfg.J + k
                self.lower_weights.append(_Weight(j, cfg.weight(j), cfg.max_children(j)))
        self.M = 1
        for w in self.lower_weights:
            self.M = self.M * w.m // math.gcd(self.M, w.m)
        self.C = min(self.s, max(w.cap for w in self.lower_weights))

        self._ground_tables()

    def _ground_tables(self):
        s, space = self.s, self.space
        h = [[Fraction(0)] * s for _ in range(s)]
        hf: List[List[Optional[tuple]]] = [[None] * s for _ in range(s)]
        self.l1 = [[Fraction(0)] * s for _ in range(s)]
        for a in range(s):
            q = [Fraction(0)] * space.dim
            mass = Fraction(0)
            for b in range(a, s):
                q[space.class_of(self.coords[b]) - 1] += self.values[b]
                mass += abs(self.values[b])
                f = dual_certificate(space, q)
                h[a][b] = _dot(f, q)
                hf[a][b] = f
                self.l1[a][b] = mass
        # g[a][b] = max over sub-intervals, with the attaining (a', b', f)
        self.g = [[Fraction(0)] * s for _ in range(s)]
        self.g_arg: List[List[Optional[tuple]]] = [[None] * s for _ in range(s)]
        for length in range(1, s + 1):
            for a in range(s - length + 1):
                b = a + length - 1
                best, arg = h[a][b], (a, b, hf[a][b])
                if length > 1:
                    for cand in ((a + 1, b), (a, b - 1)):
                        if self.g[cand[0]][cand[1]] > best:
                            best, arg = self.g[cand[0]][cand[1]], self.g_arg[cand[0]][cand[1]]
                self.g[a][b] = best
                self.g_arg[a][b] = arg
        sc = self.scale
        self.g_lo = [[math.floor(v * sc) for v in row] for row in self.g]
        self.g_hi = [[math.ceil(v * sc) for v in row] for row in self.g]
        self.l1_hi = [[math.ceil(v * sc) for v in row] for row in self.l1]

    # ----------------- convex combination bounds -----------------
    def convex_upper(self, sums: Sequence[int], weights: Sequence[_Weight], extra: int = 0) -> int:
        M = self.M
        Q = sum((S * (M // w.m)) ** 2 for S, w in zip(sums, weights)) + extra
        return _ceil_isqrt(_ceil_div(Q, M * M))

    def tail_upper(self, a: int, b: int) -> int:
        """sum_{j>J} (||x|E||_1 / m_j)^2 in the (M * scale)^2 units of convex_upper."""
        if not self.extended:
            return 0
        r = self.M // self.cfg.m[-1]
        return _ceil_div(self.l1_hi[a][b] ** 2 * r * r, 3)

    def convex_lower(self, sums: Sequence[int], weights: Sequence[_Weight]) -> Tuple[int, List[int]]:
        """(value, lambda numerators over 2^bits) with sum lambda^2 <= 1."""
        if not any(sums):
            return 0, [0] * len(sums)
        M, sc = self.M, self.scale
        Q = sum((S * (M // w.m)) ** 2 for S, w in zip(sums, weights))
        norm_up = _ceil_isqrt(_ceil_div(Q, M * M))
        lams = [(S * sc) // (w.m * norm_up) for S, w in zip(sums, weights)]
        total = sum(lam * S * (M // w.m) for lam, S, w in zip(lams, sums, weights))
        return total // (M * sc), lams

    # ----------------- partitions -----------------
    def partition_table(self, N: List[List[int]], with_back: bool = False):
        """P[c][a][b] = best sum of N over partitions of [a, b] into exactly c parts."""
        s, C = self.s, self.C
        NEG = None
        P = [None, N]
        back = [None, None]
        for c in range(2, C + 1):
            prev = P[c - 1]
            cur = [[NEG] * s for _ in range(s)]
            bk = [[None] * s for _ in range(s)] if with_back else None
            for a in range(s):
                for b in range(a + c - 1, s):
                    best, arg = None, None
                    for t in range(a + c - 2, b):
                        left = prev[a][t]
                        if left is None:
                            continue
                        val = left + N[t + 1][b]
                        if best is None or val > best:
                            best, arg = val, t
                    cur[a][b] = best
                    if with_back:
                        bk[a][b] = arg
            P.append(cur)
            back.append(bk)
        return P, back

    def parts(self, back, a: int, b: int, c: int) -> List[Tuple[int, int]]:
        out = []
        while c > 1:
            t = back[c][a][b]
            out.append((t + 1, b))
            b = t
            c -= 1
        out.append((a, b))
        out.reverse()
        return out


# -------------------------------------------------------------------------
# lower side with witnesses
# -------------------------------------------------------------------------

@dataclass
class _LowerPass:
    lo: List[List[int]]
    # (a, b) -> None for ground, or [(weight, lam_num, parts)]
    choice: Dict[Tuple[int, int], Optional[list]]
    child_pass: Optional["_LowerPass"] = None
    sums: Dict[Tuple[int, int], List[int]] = field(default_factory=dict)


def _lower_single_pass(prob: _Problem) -> _LowerPass:
    s = prob.s
    weights = prob.lower_weights
    lo = [[0] * s for _ in range(s)]
    P: List[Optional[List[List[Optional[int]]]]] = [None, lo]
    back: List[Optional[List[List[Optional[int]]]]] = [None, None]
    for c in range(2, prob.C + 1):
        P.append([[None] * s for _ in range(s)])
        back.append([[None] * s for _ in range(s)])
    out = _LowerPass(lo, {})
    out.child_pass = out
    for length in range(1, s + 1):
        for a in range(s - length + 1):
            b = a + length - 1
            for c in range(2, min(prob.C, length) + 1):
                best, arg = None, None
                for t in range(a + c - 2, b):
                    left = P[c - 1][a][t]
                    if left is None:
                        continue
                    val = left + lo[t + 1][b]
                    if best is None or val > best:
                        best, arg = val, t
                P[c][a][b] = best
                back[c][a][b] = arg
            ground = prob.g_lo[a][b]
            if length == 1:
                lo[a][b] = ground
                out.choice[(a, b)] = None
                continue
            sums, counts = [], []
            for w in weights:
                best, best_c = 0, 0
                for c in range(2, min(w.cap, length) + 1):
                    if P[c][a][b] is not None and P[c][a][b] > best:
                        best, best_c = P[c][a][b], c
                sums.append(best)
                counts.append(best_c)
            value, lams = prob.convex_lower(sums, weights)
            out.sums[(a, b)] = sums
            if value > ground:
                lo[a][b] = value
                out.choice[(a, b)] = [
                    (w, lam, prob.parts(back, a, b, c))
                    for w, lam, c in zip(weights, lams, counts) if lam > 0 and c > 0
                ]
            else:
                lo[a][b] = ground
                out.choice[(a, b)] = None
    return out


def _lower_stages(prob: _Problem, depth: int) -> _LowerPass:
    """Stage-limited lower bound: stage n uses children from stage n-1 only."""
    s = prob.s
    weights = prob.upper_weights
    current = _LowerPass([row[:] for row in prob.g_lo], {(a, b): None for a in range(s) for b in range(a, s)})
    for _ in range(depth):
        P, back = prob.partition_table(current.lo, with_back=True)
        nxt = _LowerPass([[0] * s for _ in range(s)], {}, child_pass=current)
        for a in range(s):
            for b in range(a, s):
                length = b - a + 1
                sums, counts = [], []
                for w in weights:
                    best, best_c = 0, 0
                    for c in range(1, min(w.cap, length, prob.C) + 1):
                        if P[c][a][b] is not None and P[c][a][b] > best:
                            best, best_c = P[c][a][b], c
                    sums.append(best)
                    counts.append(best_c)
                value, lams = prob.convex_lower(sums, weights)
                if value > current.lo[a][b]:
                    nxt.lo[a][b] = value
                    nxt.choice[(a, b)] = [
                        (w, lam, prob.parts(back, a, b, c))
                        for w, lam, c in zip(weights, lams, counts) if lam > 0 and c > 0
                    ]
                else:
                    nxt.lo[a][b] = current.lo[a][b]
                    nxt.choice[(a, b)] = ("inherit",)
        current = nxt
    return current


def _build_witness(prob: _Problem, top: _LowerPass) -> Node:
    memo: Dict[Tuple[int, int, int], Node] = {}

    def ground(a: int, b: int) -> Node:
        a2, b2, f = prob.g_arg[a][b]
        return GroundLeaf(GroundFunctional((prob.coords[a2], prob.coords[b2]), f))

    def build(p: _LowerPass, a: int, b: int) -> Node:
        key = (id(p), a, b)
        if key in memo:
            return memo[key]
        choice = p.choice[(a, b)]
        if choice is None:
            node = ground(a, b)
        elif choice == ("inherit",):
            node = build(p.child_pass, a, b)
        else:
            terms = []
            for w, lam, parts in choice:
                children = tuple(build(p.child_pass, pa, pb) for pa, pb in parts)
                terms.append(ConvexTerm(Fraction(lam, prob.scale), Weighted(w.j, children)))
            node = Convex(tuple(terms))
        memo[key] = node
        return node

    return build(top, 0, prob.s - 1)


# -------------------------------------------------------------------------
# upper side
# -------------------------------------------------------------------------

def _upper_sweep(prob: _Problem, H: List[List[int]]) -> Tuple[List[List[int]], Dict[Tuple[int, int], List[int]]]:
    s = prob.s
    P, _ = prob.partition_table(H)
    out = [[0] * s for _ in range(s)]
    sums_at: Dict[Tuple[int, int], List[int]] = {}
    for a in range(s):
        for b in range(a, s):
            length = b - a + 1
            sums = []
            for w in prob.upper_weights:
                best = 0
                for c in range(1, min(w.cap, length, prob.C) + 1):
                    v = P[c][a][b]
                    if v is not None and v > best:
                        best = v
                sums.append(best)
            C = prob.convex_upper(sums, prob.upper_weights, prob.tail_upper(a, b))
            out[a][b] = min(H[a][b], max(prob.g_hi[a][b], C))
            sums_at[(a, b)] = sums
    return out, sums_at


# -------------------------------------------------------------------------
# results
# -------------------------------------------------------------------------

@dataclass
class NormTable:
    coords: List[int]
    bits: int
    lo: List[List[int]]
    hi: List[List[int]]
    ground: List[List[Fraction]]
    l1: List[List[Fraction]]
    weights: List[int]
    lower_sums: Dict[Tuple[int, int], List[int]]
    upper_sums: Dict[Tuple[int, int], List[int]]
    m: List[int]
    sweeps: int

    def enclosure(self, a: int, b: int) -> Enclosure:
        """N([a, b]) over support positions."""
        sc = 1 << self.bits
        lo = max(Fraction(self.lo[a][b], sc), self.ground[a][b])
        hi = min(Fraction(self.hi[a][b], sc), self.l1[a][b])
        return Enclosure(lo, hi)

    def enclosure_for(self, E: Tuple[int, int]) -> Enclosure:
        """N(E) for a coordinate interval E."""
        inside = [p for p, k in enumerate(self.coords) if E[0] <= k <= E[1]]
        if not inside:
            return Enclosure.exact(0)
        return self.enclosure(inside[0], inside[-1])

    def weight_enclosure(self, j: int, a: int, b: int) -> Enclosure:
        """W_j([a, b]) for j <= J."""
        idx = self.weights.index(j)
        sc = 1 << self.bits
        m = self.m[idx]
        lo_sums = self.lower_sums.get((a, b))
        lo = Fraction(lo_sums[idx], sc * m) if lo_sums else Fraction(0)
        hi_sums = self.upper_sums.get((a, b))
        hi = Fraction(hi_sums[idx], sc * m) if hi_sums else self.l1[a][b] / m
        return Enclosure(min(lo, hi), hi)


@dataclass
class NormResult:
    enclosure: Enclosure
    witness: Node
    witness_value: Fraction
    sweeps: int
    converged: bool
    mode: str
    bits: int
    history: List[Fraction]
    table: Optional[NormTable] = None

    def __iter__(self):
        return iter((self.enclosure, self.witness))

    def to_dict(self, witness_limit: int = 20000) -> dict:
        size = expanded_size(self.witness)
        witness = tree_to_json(self.witness) if size <= witness_limit else tree_to_shared_json(self.witness)
        return {
            **self.enclosure.to_dict(),
            "sweeps": self.sweeps,
            "converged": self.converged,
            "mode": self.mode,
            "bits": self.bits,
            "witness_value": fmt(self.witness_value),
            "witness": witness,
        }


def _admit(cfg: WeightConfig, mode: str) -> bool:
    if mode not in MODES:
        raise ValueError(f"norm: unknown mode {mode!r}, expected one of {MODES}")
    extended = mode == "extended"
    if extended and cfg.tail_rule is not TailRule.DOUBLING:
        raise UnsupportedError("extended mode needs tail_rule = doubling")
    rho2 = cfg.rho_squared(extended)
    if rho2 >= 1:
        raise ContractionError(f"contraction fails: rho^2 = {fmt(rho2)} >= 1")
    return extended


def norm(
    cfg: WeightConfig,
    space: GroundSpace,
    x: FiniteVector,
    target_width: Optional[Fraction] = None,
    mode: str = "truncated",
    max_sweeps: Optional[int] = None,
    bits: Optional[int] = None,
) -> NormResult:
    target = DEFAULT_TARGET_WIDTH if target_width is None else parse_rational(target_width)
    extended = _admit(cfg, mode)
    max_sweeps = MAX_SWEEPS if max_sweeps is None else max_sweeps
    bits = precision_for(target) if bits is None else bits

    if x.is_zero():
        return NormResult(Enclosure.exact(0), ZERO, Fraction(0), 0, True, mode, bits, [Fraction(0)])

    prob = _Problem(cfg, space, x, extended, bits)
    s, sc = prob.s, prob.scale
    lower = _lower_single_pass(prob)
    witness = _build_witness(prob, lower)
    witness_value = evaluate(cfg, space, witness, x, check=False)
    if witness_value * sc < lower.lo[0][s - 1]:
        raise RuntimeError("norm: witness evaluates below its certified lower bound")
    lo = witness_value
    l1 = prob.l1[0][s - 1]

    H = [row[:] for row in prob.l1_hi]
    upper_sums: Dict[Tuple[int, int], List[int]] = {}

    def width_of(H) -> Fraction:
        return min(Fraction(H[0][s - 1], sc), l1) - lo

    history = [width_of(H)]
    sweeps = 0
    while history[-1] > target and sweeps < max_sweeps:
        H_next, upper_sums = _upper_sweep(prob, H)
        sweeps += 1
        if H_next == H:
            logger.debug(f"[ENGINE] fixpoint reached after {sweeps} sweeps")
            history.append(width_of(H_next))
            break
        H = H_next
        history.append(width_of(H))
        logger.debug(f"[ENGINE] sweep {sweeps}: width {float(history[-1]):.3e}")

    hi = min(Fraction(H[0][s - 1], sc), l1)
    if hi < lo:
        raise RuntimeError(f"norm: upper bound {hi} below witnessed value {lo}")
    enclosure = Enclosure(lo, hi)
    converged = enclosure.width <= target
    if not converged:
        logger.warning(f"[ENGINE] width {float(enclosure.width):.3e} above target after {sweeps} sweeps")
    logger.info(
        f"[ENGINE] support={s} mode={mode} sweeps={sweeps} width={float(enclosure.width):.3e} converged={converged}"
    )
    table = NormTable(
        coords=prob.coords,
        bits=bits,
        lo=lower.lo,
        hi=H,
        ground=prob.g,
        l1=prob.l1,
        weights=[w.j for w in prob.upper_weights],
        lower_sums=lower.sums,
        upper_sums=upper_sums,
        m=[w.m for w in prob.upper_weights],
        sweeps=sweeps,
    )
    return NormResult(enclosure, witness, witness_value, sweeps, converged, mode, bits, history, table)


def norm_lower_witness(cfg: WeightConfig, space: GroundSpace, x: FiniteVector, budget: int = 3,
                       bits: int = 64) -> Tuple[Fraction, Node]:
    """Best value over trees with at most `budget` convex levels; anytime lower bound."""
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    if x.is_zero():
        return Fraction(0), ZERO
    prob = _Problem(cfg, space, x, False, bits)
    top = _lower_stages(prob, budget)
    tree = _build_witness(prob, top)
    return evaluate(cfg, space, tree, x, check=False), tree


# -------------------------------------------------------------------------
# finite stages: oracle value and exhaustive stream
# -------------------------------------------------------------------------

def rational_grid(max_denominator: int) -> Tuple[Fraction, ...]:
    """All p/q in (0, 1] with q <= max_denominator."""
    return tuple(sorted({Fraction(p, q) for q in range(1, max_denominator + 1) for p in range(1, q + 1)}))


def _positive_grid(grid: Iterable) -> Tuple[Fraction, ...]:
    values = sorted({parse_rational(v) for v in grid})
    if any(v > 1 for v in values):
        raise ValueError("grid values must lie in [0, 1]")
    return tuple(v for v in values if v > 0)


@lru_cache(maxsize=64)
def _maximal_grid_vectors(grid: Tuple[Fraction, ...], J: int) -> Tuple[Tuple[int, ...], int]:
    """Nonincreasing grid vectors (as integers over a common denominator D)
    with sum of squares <= 1 that cannot be raised in any coordinate."""
    D = 1
    for v in grid:
        D = D * v.denominator // math.gcd(D, v.denominator)
    levels = [0] + [int(v * D) for v in grid]
    budget = D * D
    out: List[Tuple[int, ...]] = []

    def rec(prefix: List[int], used: int, cap_idx: int):
        if len(prefix) == J:
            for i, a in enumerate(prefix):
                idx = levels.index(a)
                if idx + 1 < len(levels):
                    up = levels[idx + 1]
                    if (i == 0 or up <= prefix[i - 1]) and used - a * a + up * up <= budget:
                        return
            out.append(tuple(prefix))
            return
        for idx in range(cap_idx, -1, -1):
            a = levels[idx]
            if used + a * a <= budget:
                prefix.append(a)
                rec(prefix, used + a * a, idx)
                prefix.pop()

    rec([], 0, len(levels) - 1)
    return tuple(out), D


@lru_cache(maxsize=64)
def _grid_matrix(grid: Tuple[Fraction, ...], J: int) -> np.ndarray:
    vectors, _ = _maximal_grid_vectors(grid, J)
    return np.array(vectors, dtype=np.float64).reshape(len(vectors), J)


@lru_cache(maxsize=1 << 16)
def _grid_max(values: Tuple[Fraction, ...], grid: Tuple[Fraction, ...]) -> Fraction:
    """max of sum lam_j v_j over grid vectors with sum lam^2 <= 1 (v >= 0)."""
    ordered = sorted(values, reverse=True)
    if not ordered or ordered[0] == 0:
        return Fraction(0)
    den = 1
    for v in ordered:
        den = den * v.denominator // math.gcd(den, v.denominator)
    ints = [int(v * den) for v in ordered]
    vectors, D = _maximal_grid_vectors(grid, len(values))
    # float screen, exact decision among the near-maximal rows
    scores = _grid_matrix(grid, len(values)) @ np.array([float(v) for v in ordered])
    top = scores.max()
    rows = np.nonzero(scores >= top - 1e-9 * max(1.0, abs(top)))[0]
    best = max(sum(a * w for a, w in zip(vectors[r], ints)) for r in rows)
    return Fraction(best, D * den)


def stage_oracle_value(cfg: WeightConfig, space: GroundSpace, x: FiniteVector, depth: int,
                       grid: Iterable = (Fraction(1),)) -> Fraction:
    """max f(x) over the stage-`depth` functionals that enumerate_functionals streams on supp(x)."""
    grid_t = _positive_grid(grid)
    if x.is_zero():
        return Fraction(0)
    prob = _Problem(cfg, space, x, False, MIN_BITS)
    s = prob.s
    best = [row[:] for row in prob.g]
    for _ in range(depth):
        nxt = [[Fraction(0)] * s for _ in range(s)]
        for a in range(s):
            for b in range(a, s):
                Ws = []
                for w in prob.upper_weights:
                    Ws.append(_best_partition_exact(best, a, b, min(w.cap, b - a + 1)) / w.m)
                nxt[a][b] = max(best[a][b], _grid_max(tuple(Ws), grid_t))
        best = nxt
    return best[0][s - 1]


def _best_partition_exact(N: List[List[Fraction]], a: int, b: int, cap: int) -> Fraction:
    # best[t] = max over partitions of [a, t] into <= c parts, iterated on c
    length = b - a + 1
    cur = [N[a][a + i] for i in range(length)]
    overall = cur[-1]
    for _ in range(2, cap + 1):
        nxt = [None] * length
        for i in range(length):
            for t in range(i):
                if cur[t] is None:
                    continue
                v = cur[t] + N[a + t + 1][a + i]
                if nxt[i] is None or v > nxt[i]:
                    nxt[i] = v
        cur = nxt
        if cur[-1] is not None and cur[-1] > overall:
            overall = cur[-1]
    return overall


def _tuple_counts(grid: Tuple[Fraction, ...], k: int) -> List[Tuple[Fraction, ...]]:
    """All k-tuples of positive grid values with sum of squares <= 1."""
    out: List[Tuple[Fraction, ...]] = []

    def rec(prefix, used):
        if len(prefix) == k:
            out.append(tuple(prefix))
            return
        for v in grid:
            if used + v * v <= 1:
                prefix.append(v)
                rec(prefix, used + v * v)
                prefix.pop()

    rec([], Fraction(0))
    return out


class _StageCounter:
    """Exact sizes of the stages, grouped by the position span of each functional."""

    def __init__(self, cfg: WeightConfig, s: int, n_ground: int, grid: Tuple[Fraction, ...]):
        self.cfg = cfg
        self.s = s
        self.grid = grid
        self.n_ground = n_ground
        self.mult = {k: self._count_tuples(k) for k in range(1, cfg.J + 1)}

    def _count_tuples(self, k: int) -> int:
        @lru_cache(maxsize=None)
        def rec(left: int, used: Fraction) -> int:
            if left == 0:
                return 1
            return sum(rec(left - 1, used + v * v) for v in self.grid if used + v * v <= 1)

        return rec(k, Fraction(0))

    def total(self, depth: int) -> int:
        s, J = self.s, self.cfg.J
        ground = {(a, b): self.n_ground for a in range(s) for b in range(a, s)}
        exact = dict(ground)
        for _ in range(depth):
            chains = self._chains(exact)
            within = {}
            for j in range(1, J + 1):
                cap = self.cfg.max_children(j)
                wexact = {k: sum(chains[d].get(k, 0) for d in range(1, min(cap, s) + 1)) for k in ground}
                within[j] = self._within(wexact)
            cw = {}
            for key in ground:
                total = 0
                for size in range(1, J + 1):
                    for S in combinations(range(1, J + 1), size):
                        prodv = 1
                        for j in S:
                            prodv *= within[j][key]
                        total += self.mult[size] * prodv
                cw[key] = total

            def get(a, b):
                return cw.get((a, b), 0) if a <= b else 0

            exact = {(a, b): ground[(a, b)] + get(a, b) - get(a + 1, b) - get(a, b - 1) + get(a + 1, b - 1)
                     for (a, b) in ground}
        return sum(exact.values())

    def _chains(self, exact: Dict[Tuple[int, int], int]) -> Dict[int, Dict[Tuple[int, int], int]]:
        s = self.s
        chains = {1: dict(exact)}
        for d in range(2, s + 1):
            cur = {}
            prev = chains[d - 1]
            for a in range(s):
                for b in range(a, s):
                    total = 0
                    for b1 in range(a, b):
                        first = exact.get((a, b1), 0)
                        if not first:
                            continue
                        total += first * sum(prev.get((a2, b), 0) for a2 in range(b1 + 1, b + 1))
                    if total:
                        cur[(a, b)] = total
            chains[d] = cur
        return chains

    def _within(self, wexact: Dict[Tuple[int, int], int]) -> Dict[Tuple[int, int], int]:
        return {(a, b): sum(v for (a2, b2), v in wexact.items() if a <= a2 and b2 <= b) for (a, b) in wexact}


def enumerate_functionals(
    cfg: WeightConfig,
    space: GroundSpace,
    support: Sequence[int],
    depth: int,
    grid: Iterable = (Fraction(1),),
    cap: Optional[int] = None,
) -> Iterator[Node]:
    """
    Every functional of stage `depth` whose ground leaves sit on intervals
    [support[a], support[b]] with coefficients from F, convex coefficients
    from the grid. Refuses when the exact stage size exceeds the cap.
    """
    coords = sorted(set(int(k) for k in support))
    if not coords:
        return iter(())
    grid_t = _positive_grid(grid)
    cap = ENUM_CAP if cap is None else cap
    F = sorted({f for f in space.norming_set if any(f)})
    s = len(coords)
    estimate = _StageCounter(cfg, s, len(F), grid_t).total(depth)
    if estimate > cap:
        raise EnumerationCapError(estimate, cap)
    logger.info(f"[ENGINE] enumerating {estimate} functionals (support={s}, depth={depth})")
    return _stream(cfg, coords, F, depth, grid_t)


def _stream(cfg: WeightConfig, coords: List[int], F, depth: int, grid: Tuple[Fraction, ...]) -> Iterator[Node]:
    s, J = len(coords), cfg.J
    ground: Dict[Tuple[int, int], List[Node]] = {
        (a, b): [GroundLeaf(GroundFunctional((coords[a], coords[b]), f)) for f in F]
        for a in range(s) for b in range(a, s)
    }
    tuples = {k: _tuple_counts(grid, k) for k in range(1, J + 1)}
    by_span: Dict[Tuple[int, int], List[Node]] = {k: list(v) for k, v in ground.items()}
    convex_nodes: List[Node] = []
    for _ in range(depth):
        chains: Dict[int, Dict[Tuple[int, int], List[tuple]]] = {1: {k: [(n,) for n in v] for k, v in by_span.items()}}
        for d in range(2, s + 1):
            cur: Dict[Tuple[int, int], List[tuple]] = {}
            for (a, b1), firsts in by_span.items():
                for (a2, b), rests in chains[d - 1].items():
                    if a2 > b1:
                        cur.setdefault((a, b), []).extend((f,) + r for f in firsts for r in rests)
            chains[d] = cur
        weighted: Dict[int, List[Tuple[Weighted, Tuple[int, int]]]] = {}
        for j in range(1, J + 1):
            cap = min(cfg.max_children(j), s)
            weighted[j] = [
                (Weighted(j, ch), span)
                for d in range(1, cap + 1)
                for span, lst in sorted(chains[d].items())
                for ch in lst
            ]
        new_by_span: Dict[Tuple[int, int], List[Node]] = {k: list(v) for k, v in ground.items()}
        convex_nodes = []
        for size in range(1, J + 1):
            for S in combinations(range(1, J + 1), size):
                for lams in tuples[size]:
                    for picks in product(*(weighted[j] for j in S)):
                        node = Convex(tuple(ConvexTerm(lam, w) for lam, (w, _) in zip(lams, picks)))
                        span = (min(p[1][0] for p in picks), max(p[1][1] for p in picks))
                        new_by_span[span].append(node)
                        convex_nodes.append(node)
        by_span = new_by_span
    for a in range(s):
        for b in range(a, s):
            yield from ground[(a, b)]
    yield from convex_nodes
