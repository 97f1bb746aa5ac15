# Path: core/rational.py
"""
Exact rationals, dyadic rounding and certified enclosures.

Every quantity the engine reports is either an exact Fraction or an
Enclosure [lo, hi] with rational endpoints. Irrational constants (square
roots, logarithm ratios, real powers) are bracketed here: square roots by
integer isqrt, logarithms and powers by mpmath interval arithmetic.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Union

from mpmath import iv
from mpmath.libmp import to_rational

from core.errors import ParseError

RationalLike = Union[Fraction, int, str]


# ----------------- parsing / formatting -----------------

def parse_rational(text: RationalLike, location: Optional[str] = None) -> Fraction:
    """Parse "p/q", an integer or a terminating decimal into a Fraction."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, bool):
        raise ParseError(f"not a rational: {text!r}", location)
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        raise ParseError(f"floats are not accepted, write {text!r} as p/q", location)
    s = str(text).strip()
    if not s:
        raise ParseError("empty rational", location)
    try:
        return Fraction(s)
    except ZeroDivisionError:
        raise ParseError(f"zero denominator in {s!r}", location)
    except ValueError:
        raise ParseError(f"not a rational: {s!r}", location)


def fmt(q: Fraction) -> str:
    """Canonical "p/q" (or "p") string used in every JSON artifact."""
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def decimal_hint(q: Fraction, digits: int = 12) -> str:
    """Display-only decimal rendering; never parsed back."""
    return f"{float(q):.{digits}g}"


# ----------------- dyadic rounding -----------------

def sqrt_down(q: Fraction, bits: int) -> Fraction:
    """Largest dyadic k/2^bits with (k/2^bits)^2 <= q."""
    if q < 0:
        raise ValueError(f"sqrt_down: negative argument {q}")
    if q == 0:
        return Fraction(0)
    scaled = math.floor(q * (1 << (2 * bits)))
    return Fraction(math.isqrt(scaled), 1 << bits)


def sqrt_up(q: Fraction, bits: int) -> Fraction:
    """Smallest dyadic k/2^bits with (k/2^bits)^2 >= q."""
    if q < 0:
        raise ValueError(f"sqrt_up: negative argument {q}")
    if q == 0:
        return Fraction(0)
    scaled = math.ceil(q * (1 << (2 * bits)))
    r = math.isqrt(scaled)
    if r * r < scaled:
        r += 1
    return Fraction(r, 1 << bits)


def exact_sqrt(q: Fraction) -> Optional[Fraction]:
    """The rational square root of q when there is one."""
    if q < 0:
        return None
    p, d = q.numerator, q.denominator
    rp, rd = math.isqrt(p), math.isqrt(d)
    if rp * rp == p and rd * rd == d:
        return Fraction(rp, rd)
    return None


# ----------------- enclosures -----------------

@dataclass(frozen=True)
class Enclosure:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"Enclosure: lo {self.lo} exceeds hi {self.hi}")

    @classmethod
    def exact(cls, q: RationalLike) -> "Enclosure":
        q = parse_rational(q)
        return cls(q, q)

    @classmethod
    def sqrt(cls, q: Fraction, bits: int = 64) -> "Enclosure":
        root = exact_sqrt(q)
        if root is not None:
            return cls(root, root)
        return cls(sqrt_down(q, bits), sqrt_up(q, bits))

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def contains(self, q: RationalLike) -> bool:
        q = parse_rational(q)
        return self.lo <= q <= self.hi

    def overlaps(self, other: "Enclosure") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def scale(self, a: Fraction) -> "Enclosure":
        a = Fraction(a)
        if a >= 0:
            return Enclosure(self.lo * a, self.hi * a)
        return Enclosure(self.hi * a, self.lo * a)

    def __add__(self, other: "Enclosure") -> "Enclosure":
        return Enclosure(self.lo + other.lo, self.hi + other.hi)

    def to_dict(self) -> dict:
        return {
            "lo": fmt(self.lo),
            "hi": fmt(self.hi),
            "width": fmt(self.width),
            "approx": decimal_hint((self.lo + self.hi) / 2),
        }


def enclosure_max(items: Iterable[Enclosure]) -> Enclosure:
    items = list(items)
    if not items:
        raise ValueError("enclosure_max: empty")
    return Enclosure(max(e.lo for e in items), max(e.hi for e in items))


def enclosure_min(items: Iterable[Enclosure]) -> Enclosure:
    items = list(items)
    if not items:
        raise ValueError("enclosure_min: empty")
    return Enclosure(min(e.lo for e in items), min(e.hi for e in items))


# ----------------- three-valued comparisons -----------------

class Verdict(str, enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNDECIDABLE = "undecidable"

    @classmethod
    def of(cls, value: bool) -> "Verdict":
        return cls.TRUE if value else cls.FALSE


def less_than(e: Enclosure, bound: Fraction) -> Verdict:
    """Decide e < bound from the enclosure alone."""
    if e.hi < bound:
        return Verdict.TRUE
    if e.lo >= bound:
        return Verdict.FALSE
    return Verdict.UNDECIDABLE


# ----------------- interval logarithms and powers -----------------

def _iv_rational(q: Fraction):
    return iv.mpf(q.numerator) / iv.mpf(q.denominator)


def _to_enclosure(x) -> Enclosure:
    a, b = x._mpi_
    pa, qa = to_rational(a)
    pb, qb = to_rational(b)
    return Enclosure(Fraction(pa, qa), Fraction(pb, qb))


def _integer_log(base: Fraction, value: Fraction, limit: int = 64) -> Optional[int]:
    if base <= 1:
        return None
    power, k = Fraction(1), 0
    while power < value and k < limit:
        power *= base
        k += 1
    return k if power == value else None


def log_ratio(value: Fraction, base: Fraction, prec: int = 80) -> Enclosure:
    """Enclosure of log_base(value) for base > 1, value > 0; exact when it is an integer."""
    value, base = Fraction(value), Fraction(base)
    if base <= 1 or value <= 0:
        raise ValueError(f"log_ratio: need base > 1 and value > 0, got {base}, {value}")
    k = _integer_log(base, value)
    if k is not None:
        return Enclosure.exact(k)
    old = iv.prec
    iv.prec = prec
    try:
        return _to_enclosure(iv.ln(_iv_rational(value)) / iv.ln(_iv_rational(base)))
    finally:
        iv.prec = old


def real_power(base: Fraction, exponent: Enclosure, prec: int = 80) -> Enclosure:
    """Enclosure of base**s for every s in the exponent enclosure (0**s = 0 for s > 0)."""
    base = Fraction(base)
    if base < 0:
        raise ValueError(f"real_power: negative base {base}")
    if base == 0:
        if exponent.lo <= 0:
            raise ValueError("real_power: 0 to a non-positive power")
        return Enclosure.exact(0)
    if exponent.lo == exponent.hi and exponent.lo.denominator == 1:
        return Enclosure.exact(base ** int(exponent.lo))
    old = iv.prec
    iv.prec = prec
    try:
        s = iv.mpf([_iv_rational(exponent.lo).a, _iv_rational(exponent.hi).b])
        return _to_enclosure(iv.exp(s * iv.ln(_iv_rational(base))))
    finally:
        iv.prec = old


def decide_with_retry(compute, bound: Fraction, start_prec: int = 80, max_prec: int = 1280) -> Verdict:
    """Evaluate compute(prec) -> Enclosure < bound, doubling precision while undecidable."""
    prec = start_prec
    while True:
        verdict = less_than(compute(prec), bound)
        if verdict is not Verdict.UNDECIDABLE or prec >= max_prec:
            return verdict
        prec *= 2
