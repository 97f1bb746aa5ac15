# Path: core/config.py
"""
Weight parameters (m_j, n_j) of the mixed-Tsirelson construction.

Only a finite prefix j <= J is stored. A declared tail rule says how m_j
continues past J; it enters only through the tail sums
sum_{j>i} 1/m_j and sum_{j>J} 1/m_j^2, which are exact rationals under
doubling (m_{J+k} = m_J * 2^k).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from core.errors import ConfigError, UnsupportedError
from core.rational import (
    Enclosure,
    Verdict,
    decide_with_retry,
    fmt,
    log_ratio,
    real_power,
)


class TailRule(str, enum.Enum):
    NONE = "none"
    DOUBLING = "doubling"

    @classmethod
    def parse(cls, value) -> "TailRule":
        if isinstance(value, TailRule):
            return value
        if value is None:
            return cls.NONE
        key = str(value).strip().lower()
        for rule in cls:
            if rule.value == key:
                return rule
        raise ConfigError(f"tail_rule: unknown rule {value!r} (expected 'none' or 'doubling')")


class Evidence(str, enum.Enum):
    VERIFIED = "verified"
    FINITE_EVIDENCE = "finite_evidence"


@dataclass(frozen=True)
class WeightConfig:
    m: Tuple[int, ...]
    n: Tuple[int, ...]
    tail_rule: TailRule = TailRule.NONE

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(int(v) for v in self.m))
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "tail_rule", TailRule.parse(self.tail_rule))
        if not self.m:
            raise ConfigError("m: at least one weight is required")
        if len(self.m) != len(self.n):
            raise ConfigError(f"m and n must have equal length, got {len(self.m)} and {len(self.n)}")
        for name, seq in (("m", self.m), ("n", self.n)):
            if any(v < 2 for v in seq):
                raise ConfigError(f"{name}: every entry must be >= 2, got {list(seq)}")
            if any(a >= b for a, b in zip(seq, seq[1:])):
                raise ConfigError(f"{name}: must be strictly increasing, got {list(seq)}")
        if self.inverse_square_sum() >= 1:
            raise ConfigError(
                f"contraction: sum 1/m_j^2 = {fmt(self.inverse_square_sum())} must be < 1"
            )

    @property
    def J(self) -> int:
        return len(self.m)

    # ---------------------------------------------------------------------
    # per-index accessors
    # ---------------------------------------------------------------------
    def weight(self, j: int) -> int:
        """m_j; beyond J only under the doubling rule."""
        if j < 1:
            raise ConfigError(f"weight index must be >= 1, got {j}")
        if j <= self.J:
            return self.m[j - 1]
        if self.tail_rule is TailRule.DOUBLING:
            return self.m[-1] << (j - self.J)
        raise UnsupportedError(f"weight m_{j} is undefined past J={self.J} without a tail rule")

    def max_children(self, j: int) -> int:
        """n_j for j <= J; past J the smallest admissible continuation n_J is used."""
        if j < 1:
            raise ConfigError(f"weight index must be >= 1, got {j}")
        if j <= self.J:
            return self.n[j - 1]
        self.weight(j)
        return self.n[-1]

    def s(self, i: int, prec: int = 80) -> Enclosure:
        """s_i = log_{m_1}(m_i)."""
        return log_ratio(Fraction(self.weight(i)), Fraction(self.m[0]), prec)

    # ---------------------------------------------------------------------
    # exact tail sums
    # ---------------------------------------------------------------------
    def inverse_square_sum(self) -> Fraction:
        return sum((Fraction(1, v * v) for v in self.m), Fraction(0))

    def tail_square_sum(self) -> Fraction:
        """sum_{j>J} 1/m_j^2 under doubling: 1/(3 m_J^2)."""
        if self.tail_rule is not TailRule.DOUBLING:
            raise UnsupportedError("tail sums need tail_rule = doubling")
        return Fraction(1, 3 * self.m[-1] ** 2)

    def rho_squared(self, extended: bool = False) -> Fraction:
        rho2 = self.inverse_square_sum()
        if extended:
            rho2 += self.tail_square_sum()
        return rho2

    def inverse_sum_after(self, i: int) -> Fraction:
        """sum_{j>i} 1/m_j including the tail (requires doubling)."""
        if i < 0:
            raise ConfigError(f"index must be >= 0, got {i}")
        if self.tail_rule is not TailRule.DOUBLING:
            raise UnsupportedError("sum_{j>i} 1/m_j diverges or is unknown without a tail rule")
        if i >= self.J:
            return Fraction(1, self.m[-1] << (i - self.J))
        prefix = sum((Fraction(1, v) for v in self.m[i:]), Fraction(0))
        return prefix + Fraction(1, self.m[-1])

    def inverse_sum_from(self, j0: int) -> Fraction:
        return self.inverse_sum_after(j0 - 1)

    def prefix_inverse_sum(self, start: int = 1) -> Fraction:
        return sum((Fraction(1, v) for v in self.m[start - 1:]), Fraction(0))

    def to_dict(self) -> dict:
        return {"m": list(self.m), "n": list(self.n), "tail_rule": self.tail_rule.value}


# -------------------------------------------------------------------------
# condition reports
# -------------------------------------------------------------------------

@dataclass
class ConditionItem:
    name: str
    verdict: Verdict
    evidence: Evidence
    detail: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict.value,
            "evidence": self.evidence.value,
            "detail": _jsonable(self.detail),
        }


@dataclass
class ConditionReport:
    items: List[ConditionItem]

    def get(self, name: str) -> ConditionItem:
        for item in self.items:
            if item.name == name:
                return item
        raise KeyError(name)

    def all_true(self) -> bool:
        return all(item.verdict is Verdict.TRUE for item in self.items)

    def to_dict(self) -> dict:
        return {"conditions": [item.to_dict() for item in self.items], "all_true": self.all_true()}


def _jsonable(value):
    if isinstance(value, Fraction):
        return fmt(value)
    if isinstance(value, Enclosure):
        return value.to_dict()
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _condition_a(cfg: WeightConfig) -> ConditionItem:
    prefix = cfg.prefix_inverse_sum()
    bound = Fraction(1, 10)
    detail: Dict[str, object] = {"prefix_sum": prefix, "bound": bound}
    if cfg.tail_rule is TailRule.DOUBLING:
        tail = Fraction(1, cfg.m[-1])
        detail["tail_sum"] = tail
        detail["total"] = prefix + tail
        verdict = Verdict.of(prefix + tail < bound)
    elif prefix >= bound:
        verdict = Verdict.FALSE
    else:
        detail["tail_sum"] = None
        verdict = Verdict.UNDECIDABLE
    return ConditionItem("a", verdict, Evidence.VERIFIED, detail)


def check_paper_conditions(
    cfg: WeightConfig,
    alphas: Sequence[Fraction] = (Fraction(1, 2),),
    prec: int = 80,
) -> ConditionReport:
    """
    (a) exactly, (b) and (c) as finite tables. (b) and (c) are limits, so
    their rows are evidence only and their verdict stays undecidable.
    """
    items = [_condition_a(cfg)]

    rows_b = []
    for i in range(2, cfg.J + 1):
        base = Fraction((i - 1) * cfg.n[i - 2])
        value = real_power(base, cfg.s(i, prec), prec).scale(Fraction(1, cfg.n[i - 1]))
        rows_b.append({"i": i, "s_i": cfg.s(i, prec), "value": value})
    items.append(ConditionItem("b", Verdict.UNDECIDABLE, Evidence.FINITE_EVIDENCE, {"rows": rows_b}))

    rows_c = []
    for alpha in alphas:
        alpha = Fraction(alpha)
        for i in range(1, cfg.J + 1):
            value = real_power(Fraction(cfg.n[i - 1]), Enclosure.exact(alpha), prec)
            rows_c.append({"alpha": alpha, "i": i, "value": value.scale(Fraction(1, cfg.m[i - 1]))})
    items.append(ConditionItem("c", Verdict.UNDECIDABLE, Evidence.FINITE_EVIDENCE, {"rows": rows_c}))
    return ConditionReport(items)


def check_j0_conditions(cfg: WeightConfig, d: int, j0: int, prec: int = 80) -> ConditionReport:
    if not 1 <= j0 <= cfg.J:
        raise ConfigError(f"j0 must lie in [1, {cfg.J}], got {j0}")
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")

    # (1) sum_{j>=j0} 2d/m_j < 1/5
    bound1 = Fraction(1, 5)
    prefix = 2 * d * cfg.prefix_inverse_sum(j0)
    detail1: Dict[str, object] = {"prefix_sum": prefix, "bound": bound1}
    if cfg.tail_rule is TailRule.DOUBLING:
        total = 2 * d * cfg.inverse_sum_from(j0)
        detail1["total"] = total
        verdict1 = Verdict.of(total < bound1)
    else:
        verdict1 = Verdict.FALSE if prefix >= bound1 else Verdict.UNDECIDABLE
    item1 = ConditionItem("j0_1", verdict1, Evidence.VERIFIED, detail1)

    # (2) 2((j0-1) n_{j0-1})^{s_j0} / n_j0 < 1/(5d), with 0^s = 0
    bound2 = Fraction(1, 5 * d)
    if j0 == 1:
        item2 = ConditionItem("j0_2", Verdict.of(0 < bound2), Evidence.VERIFIED,
                              {"value": Enclosure.exact(0), "bound": bound2})
    else:
        base = Fraction((j0 - 1) * cfg.n[j0 - 2])

        def value2(p: int) -> Enclosure:
            return real_power(base, cfg.s(j0, p), p).scale(Fraction(2, cfg.n[j0 - 1]))

        item2 = ConditionItem("j0_2", decide_with_retry(value2, bound2, prec), Evidence.VERIFIED,
                              {"power": real_power(base, cfg.s(j0, prec), prec),
                               "value": value2(prec), "bound": bound2})

    # (3) d / 10^{s_j0} < 1/5
    bound3 = Fraction(1, 5)

    def value3(p: int) -> Enclosure:
        power = real_power(Fraction(10), cfg.s(j0, p), p)
        return Enclosure(Fraction(d) / power.hi, Fraction(d) / power.lo)

    item3 = ConditionItem("j0_3", decide_with_retry(value3, bound3, prec), Evidence.VERIFIED,
                          {"value": value3(prec), "bound": bound3})
    return ConditionReport([item1, item2, item3])


def parse_weight_config(m: Sequence, n: Sequence, tail_rule: Optional[str] = None) -> WeightConfig:
    try:
        return WeightConfig(tuple(int(v) for v in m), tuple(int(v) for v in n), TailRule.parse(tail_rule))
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"weights: {e}")
