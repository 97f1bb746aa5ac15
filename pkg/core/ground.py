# Path: core/ground.py
"""
Base space Z, ground functionals, quotient map and isometric lift.

Z is R^d normed by a finite symmetric rational norming set F:
    ||z||_Z = max_{f in F} f(z).
Coordinates k = 1, 2, ... of c00 are split into classes Lambda_i by an
eventually periodic map pi, and Q(e_k) = z_{pi(k)}. A ground functional
is a pair (E, a) with E an interval and a in the dual ball absconv(F);
it acts by  sum_i a_i sum_{k in E, pi(k) = i} x_k.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import sympy

from api.logger import get_logger
from core.errors import DimensionError, GroundSpaceError, RepresentativeError
from core.rational import Enclosure, fmt, parse_rational

logger = get_logger(__name__)

Vec = Tuple[Fraction, ...]


def _vec(values: Iterable) -> Vec:
    return tuple(parse_rational(v) for v in values)


def _dot(a: Sequence[Fraction], b: Sequence[Fraction]) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def _solve_unit_rhs(rows: Sequence[Vec]) -> Optional[Vec]:
    """Solve rows . v = (1, ..., 1) exactly; None when rows are singular."""
    n = len(rows)
    A = [list(r) + [Fraction(1)] for r in rows]
    for col in range(n):
        pivot = next((r for r in range(col, n) if A[r][col] != 0), None)
        if pivot is None:
            return None
        A[col], A[pivot] = A[pivot], A[col]
        for r in range(n):
            if r != col and A[r][col] != 0:
                factor = A[r][col] / A[col][col]
                A[r] = [a - factor * b for a, b in zip(A[r], A[col])]
    return tuple(A[i][n] / A[i][i] for i in range(n))


# -------------------------------------------------------------------------
# finitely supported vectors
# -------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteVector:
    """Element of c00; entries sorted by coordinate, zeros dropped."""

    entries: Tuple[Tuple[int, Fraction], ...] = ()

    def __post_init__(self):
        cleaned: Dict[int, Fraction] = {}
        for k, v in self.entries:
            k = int(k)
            if k < 1:
                raise ValueError(f"FiniteVector: coordinates start at 1, got {k}")
            cleaned[k] = cleaned.get(k, Fraction(0)) + parse_rational(v)
        object.__setattr__(
            self, "entries", tuple(sorted((k, v) for k, v in cleaned.items() if v != 0))
        )

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, object]) -> "FiniteVector":
        return cls(tuple(mapping.items()))

    @classmethod
    def from_sequence(cls, values: Sequence, start: int = 1) -> "FiniteVector":
        return cls(tuple((start + i, v) for i, v in enumerate(values)))

    @classmethod
    def unit(cls, k: int, value=1) -> "FiniteVector":
        return cls(((k, value),))

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(k for k, _ in self.entries)

    def is_zero(self) -> bool:
        return not self.entries

    def get(self, k: int) -> Fraction:
        for key, v in self.entries:
            if key == k:
                return v
        return Fraction(0)

    def as_dict(self) -> Dict[int, Fraction]:
        return dict(self.entries)

    def l1(self) -> Fraction:
        return sum((abs(v) for _, v in self.entries), Fraction(0))

    def sup(self) -> Fraction:
        return max((abs(v) for _, v in self.entries), default=Fraction(0))

    def restrict(self, a: int, b: int) -> "FiniteVector":
        return FiniteVector(tuple((k, v) for k, v in self.entries if a <= k <= b))

    def scale(self, q) -> "FiniteVector":
        q = parse_rational(q)
        return FiniteVector(tuple((k, v * q) for k, v in self.entries))

    def __add__(self, other: "FiniteVector") -> "FiniteVector":
        return FiniteVector(self.entries + other.entries)

    def __neg__(self) -> "FiniteVector":
        return self.scale(-1)

    def __sub__(self, other: "FiniteVector") -> "FiniteVector":
        return self + (-other)

    def to_text(self) -> str:
        return " ".join(f"{k}:{fmt(v)}" for k, v in self.entries)

    def to_dict(self) -> Dict[str, str]:
        return {str(k): fmt(v) for k, v in self.entries}


def vector_sum(vectors: Iterable[FiniteVector]) -> FiniteVector:
    entries: List[Tuple[int, Fraction]] = []
    for v in vectors:
        entries.extend(v.entries)
    return FiniteVector(tuple(entries))


# -------------------------------------------------------------------------
# coordinate partition
# -------------------------------------------------------------------------

@dataclass(frozen=True)
class Partition:
    """pi(k) = prefix[k-1] for k <= len(prefix), then the period repeats."""

    period: Tuple[int, ...]
    prefix: Tuple[int, ...] = ()

    @classmethod
    def round_robin(cls, dim: int) -> "Partition":
        return cls(tuple(range(1, dim + 1)))

    def validate(self, dim: int):
        if not self.period:
            raise GroundSpaceError("partition: period must be nonempty")
        for c in self.prefix + self.period:
            if not 1 <= c <= dim:
                raise GroundSpaceError(f"partition: class {c} outside 1..{dim}")
        missing = set(range(1, dim + 1)) - set(self.period)
        if missing:
            raise GroundSpaceError(
                f"partition: classes {sorted(missing)} are finite (absent from the period)"
            )

    def class_of(self, k: int) -> int:
        if k < 1:
            raise ValueError(f"class_of: coordinate must be >= 1, got {k}")
        if k <= len(self.prefix):
            return self.prefix[k - 1]
        return self.period[(k - len(self.prefix) - 1) % len(self.period)]

    def next_in_class(self, i: int, after: int = 0) -> int:
        """Smallest k > after with pi(k) = i."""
        k = after + 1
        limit = after + len(self.prefix) + len(self.period) + 1
        while k <= limit:
            if self.class_of(k) == i:
                return k
            k += 1
        raise GroundSpaceError(f"partition: class {i} does not recur")

    def to_dict(self) -> dict:
        out: dict = {"period": list(self.period)}
        if self.prefix:
            out["prefix"] = list(self.prefix)
        return out


# -------------------------------------------------------------------------
# the base space
# -------------------------------------------------------------------------

@dataclass(frozen=True)
class GroundSpace:
    dim: int
    norming_set: Tuple[Vec, ...]
    partition: Optional[Partition] = None
    check_bimonotone: bool = True

    def __post_init__(self):
        if self.dim < 1:
            raise GroundSpaceError(f"dim must be >= 1, got {self.dim}")
        object.__setattr__(self, "norming_set", tuple(_vec(f) for f in self.norming_set))
        if self.partition is None:
            object.__setattr__(self, "partition", Partition.round_robin(self.dim))
        self.partition.validate(self.dim)
        self._validate()

    # ----------------- validation -----------------
    def _validate(self):
        F = self.norming_set
        if not F:
            raise GroundSpaceError("norming_set: empty")
        for f in F:
            if len(f) != self.dim:
                raise DimensionError(f"norming_set: functional {list(map(fmt, f))} has length {len(f)}, dim is {self.dim}")
        members = self._members
        for f in F:
            if tuple(-c for c in f) not in members:
                raise GroundSpaceError(f"symmetry: -f missing for f = {[fmt(c) for c in f]}")
        if sympy.Matrix([[sympy.Rational(c.numerator, c.denominator) for c in f] for f in F]).rank() != self.dim:
            raise GroundSpaceError("spanning: norming set does not span the dual space")
        for i in range(self.dim):
            top = max(f[i] for f in F)
            if top != 1:
                raise GroundSpaceError(f"normalization: ||z_{i + 1}||_Z = {fmt(top)}, expected 1")
        if self.check_bimonotone:
            for f in F:
                for a in range(self.dim):
                    for b in range(a, self.dim):
                        r = tuple(c if a <= i <= b else Fraction(0) for i, c in enumerate(f))
                        if not self.in_dual_ball(r):
                            raise GroundSpaceError(
                                f"bimonotonicity: restriction of {[fmt(c) for c in f]} to "
                                f"[{a + 1},{b + 1}] leaves the dual ball"
                            )

    @cached_property
    def _members(self) -> frozenset:
        return frozenset(self.norming_set)

    @cached_property
    def ball_vertices(self) -> Tuple[Vec, ...]:
        """Vertices of the unit ball {z : f(z) <= 1 for f in F}, exact."""
        F = sorted(set(self.norming_set))
        found = set()
        for rows in combinations(F, self.dim):
            v = _solve_unit_rhs(rows)
            if v is not None and all(_dot(f, v) <= 1 for f in F):
                found.add(v)
        logger.debug(f"[GROUND] {len(found)} ball vertices for dim={self.dim}, |F|={len(F)}")
        return tuple(sorted(found))

    def in_dual_ball(self, a: Sequence[Fraction]) -> bool:
        """a in absconv(F), decided exactly through the ball's vertices."""
        a = _vec(a)
        if len(a) != self.dim:
            raise DimensionError(f"in_dual_ball: length {len(a)} != dim {self.dim}")
        if all(c == 0 for c in a) or a in self._members:
            return True
        return max(_dot(a, v) for v in self.ball_vertices) <= 1

    def class_of(self, k: int) -> int:
        return self.partition.class_of(k)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "norming_set": [[fmt(c) for c in f] for f in self.norming_set],
            "partition": self.partition.to_dict(),
        }


def sup_norm_space(dim: int) -> GroundSpace:
    """Z = l_inf^d, normed by F = {+-e_i}."""
    F = []
    for i in range(dim):
        e = [Fraction(0)] * dim
        e[i] = Fraction(1)
        F.append(tuple(e))
        F.append(tuple(-c for c in e))
    return GroundSpace(dim, tuple(F))


def scalar_space() -> GroundSpace:
    return GroundSpace(1, ((Fraction(1),), (Fraction(-1),)))


# -------------------------------------------------------------------------
# ground functionals
# -------------------------------------------------------------------------

@dataclass(frozen=True)
class GroundFunctional:
    E: Tuple[int, int]
    coeffs: Vec

    def __post_init__(self):
        a, b = int(self.E[0]), int(self.E[1])
        if a < 1 or a > b:
            raise ValueError(f"GroundFunctional: bad interval [{a},{b}]")
        object.__setattr__(self, "E", (a, b))
        object.__setattr__(self, "coeffs", _vec(self.coeffs))

    def validate(self, space: GroundSpace):
        if len(self.coeffs) != space.dim:
            raise DimensionError(f"ground functional has {len(self.coeffs)} coefficients, dim is {space.dim}")
        if not space.in_dual_ball(self.coeffs):
            raise GroundSpaceError(f"dual ball: coefficients {[fmt(c) for c in self.coeffs]} outside absconv(F)")

    def evaluate(self, space: GroundSpace, x: FiniteVector) -> Fraction:
        a, b = self.E
        total = Fraction(0)
        for k, v in x.entries:
            if k < a:
                continue
            if k > b:
                break
            c = self.coeffs[space.class_of(k) - 1]
            if c:
                total += c * v
        return total

    def coefficient(self, space: GroundSpace, k: int) -> Fraction:
        if self.E[0] <= k <= self.E[1]:
            return self.coeffs[space.class_of(k) - 1]
        return Fraction(0)

    def span(self, space: GroundSpace) -> Optional[Tuple[int, int]]:
        """(min, max) of the coordinates with nonzero coefficient."""
        live = {i + 1 for i, c in enumerate(self.coeffs) if c != 0}
        if not live:
            return None
        a, b = self.E
        reach = len(space.partition.prefix) + len(space.partition.period)
        lo = next((k for k in range(a, min(b, a + reach) + 1) if space.class_of(k) in live), None)
        if lo is None:
            return None
        hi = next(k for k in range(b, max(lo, b - reach) - 1, -1) if space.class_of(k) in live)
        return lo, hi

    def to_dict(self) -> dict:
        return {"E": list(self.E), "coeffs": [fmt(c) for c in self.coeffs]}


# -------------------------------------------------------------------------
# norms, quotient and lift
# -------------------------------------------------------------------------

def _check_dim(space: GroundSpace, z: Sequence) -> Vec:
    z = _vec(z)
    if len(z) != space.dim:
        raise DimensionError(f"vector of length {len(z)} does not match dim {space.dim}")
    return z


def z_norm(space: GroundSpace, z: Sequence) -> Fraction:
    z = _check_dim(space, z)
    return max(_dot(f, z) for f in space.norming_set)


def dual_certificate(space: GroundSpace, z: Sequence) -> Vec:
    """The first f in F attaining ||z||_Z."""
    z = _check_dim(space, z)
    return max(space.norming_set, key=lambda f: _dot(f, z))


def quotient_apply(space: GroundSpace, x: FiniteVector) -> Vec:
    out = [Fraction(0)] * space.dim
    for k, v in x.entries:
        out[space.class_of(k) - 1] += v
    return tuple(out)


def ground_norm_witness(space: GroundSpace, x: FiniteVector) -> Tuple[Fraction, Optional[GroundFunctional]]:
    """max over intervals E of ||Q(P_E x)||_Z with an attaining ground functional."""
    entries = x.entries
    best, witness = Fraction(0), None
    for i in range(len(entries)):
        q = [Fraction(0)] * space.dim
        for t in range(i, len(entries)):
            k, v = entries[t]
            q[space.class_of(k) - 1] += v
            f = dual_certificate(space, q)
            value = _dot(f, q)
            if value > best:
                best = value
                witness = GroundFunctional((entries[i][0], k), f)
    return best, witness


def ground_norm(space: GroundSpace, x: FiniteVector) -> Fraction:
    return ground_norm_witness(space, x)[0]


def default_representatives(space: GroundSpace, after: int = 0) -> Tuple[int, ...]:
    """Smallest l_1 < l_2 < ... < l_d with l_i in Lambda_i."""
    reps = []
    last = after
    for i in range(1, space.dim + 1):
        last = space.partition.next_in_class(i, last)
        reps.append(last)
    return tuple(reps)


def lift_isometric(space: GroundSpace, z: Sequence, reps: Optional[Sequence[int]] = None) -> FiniteVector:
    z = _check_dim(space, z)
    reps = tuple(reps) if reps is not None else default_representatives(space)
    if len(reps) != space.dim:
        raise RepresentativeError(f"need {space.dim} representatives, got {len(reps)}")
    for i, k in enumerate(reps, start=1):
        if space.class_of(k) != i:
            raise RepresentativeError(f"representative {k} is in class {space.class_of(k)}, not {i}")
    if any(a >= b for a, b in zip(reps, reps[1:])):
        raise RepresentativeError(f"representatives must increase, got {list(reps)}")
    return FiniteVector(tuple(zip(reps, z)))


# -------------------------------------------------------------------------
# oracle-backed Z_X norm
# -------------------------------------------------------------------------

NormOracle = Callable[[Vec], object]


def _as_enclosure(value) -> Enclosure:
    if isinstance(value, Enclosure):
        return value
    return Enclosure.exact(value)


def zx_norm(oracle: NormOracle, dense_images: Sequence[Sequence], a: Sequence) -> Enclosure:
    """max over intervals E inside [min supp a, max supp a] of oracle(sum_{i in E} a_i x_i)."""
    a = _vec(a)
    images = [_vec(x) for x in dense_images]
    if len(a) > len(images):
        raise DimensionError(f"zx_norm: {len(a)} coefficients but only {len(images)} images")
    supp = [i for i, c in enumerate(a) if c != 0]
    if not supp:
        return Enclosure.exact(0)
    length = len(images[supp[0]])
    lo, hi = None, None
    for s in range(supp[0], supp[-1] + 1):
        acc = [Fraction(0)] * length
        for t in range(s, supp[-1] + 1):
            if a[t]:
                acc = [u + a[t] * v for u, v in zip(acc, images[t])]
            e = _as_enclosure(oracle(tuple(acc)))
            lo = e.lo if lo is None else max(lo, e.lo)
            hi = e.hi if hi is None else max(hi, e.hi)
    return Enclosure(lo, hi)


def sup_norm_oracle(v: Sequence) -> Enclosure:
    return Enclosure.exact(max((abs(c) for c in _vec(v)), default=Fraction(0)))


def norming_set_oracle(norming_set: Sequence[Sequence]) -> NormOracle:
    F = [_vec(f) for f in norming_set]

    def oracle(v: Sequence) -> Enclosure:
        v = _vec(v)
        return Enclosure.exact(max(_dot(f, v) for f in F))

    return oracle


# -------------------------------------------------------------------------
# random spaces
# -------------------------------------------------------------------------

def random_space(dim: int, rng: np.random.Generator, extra: int = 2, denominator: int = 4) -> GroundSpace:
    """
    F = {+-e_i} plus random functionals with entries in [-1, 1] and all
    their interval restrictions; bimonotone and normalized by construction.
    """
    F = set()
    for i in range(dim):
        e = [Fraction(0)] * dim
        e[i] = Fraction(1)
        F.add(tuple(e))
    for _ in range(extra):
        f = [Fraction(int(v), denominator) for v in rng.integers(-denominator, denominator + 1, size=dim)]
        for a in range(dim):
            for b in range(a, dim):
                r = tuple(c if a <= i <= b else Fraction(0) for i, c in enumerate(f))
                if any(r):
                    F.add(r)
    F |= {tuple(-c for c in f) for f in F}
    return GroundSpace(dim, tuple(sorted(F)))


def random_unit_vector(space: GroundSpace, rng: np.random.Generator, denominator: int = 6) -> Vec:
    """Random rational z with ||z||_Z = 1."""
    while True:
        z = tuple(Fraction(int(v), denominator) for v in rng.integers(-denominator, denominator + 1, size=space.dim))
        norm = z_norm(space, z)
        if norm > 0:
            return tuple(c / norm for c in z)
