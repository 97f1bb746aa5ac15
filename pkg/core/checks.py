# Path: core/checks.py
"""
Randomized check suites behind `cli.py check` and POST /api/check.

Every suite is seeded: instance i uses seed + i, so a reported failure can
be replayed on its own.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from api.logger import get_run_logger
from core.config import TailRule, WeightConfig, check_paper_conditions
from core.functionals import (
    TreeShape,
    _jsonable,
    check_lemma_finitesupport,
    check_lemma_smallweight,
    random_tree,
    random_weighted_tree,
    sup_norm,
    tree_to_json,
)
from core.ground import (
    FiniteVector,
    GroundSpace,
    default_representatives,
    ground_norm,
    lift_isometric,
    quotient_apply,
    random_space,
    random_unit_vector,
    z_norm,
)
from core.jtree import jtree_norm_bruteforce, jtree_norm_squared, random_tree_vector
from core.rational import Verdict, fmt

logger = get_run_logger(__name__)

SUITES = ("lemma33", "lemma34", "lemma41", "lemma42", "lift", "jtree")


@dataclass
class SuiteResult:
    suite: str
    status: str  # pass | fail | skipped
    count: int = 0
    failures: List[Dict[str, Any]] = field(default_factory=list)
    reason: Optional[str] = None
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "status": self.status,
            "count": self.count,
            "failures": _jsonable(self.failures),
            "reason": self.reason,
            "seconds": round(self.seconds, 3),
        }


class SuiteSkipped(Exception):
    pass


def _random_vector(rng: np.random.Generator, width: int, size: int) -> FiniteVector:
    coords = sorted(int(k) for k in rng.choice(np.arange(1, width + 1), size=size, replace=False))
    values = [Fraction(int(v), int(d)) for v, d in zip(rng.integers(-4, 5, size=size), rng.integers(1, 4, size=size))]
    return FiniteVector(tuple(zip(coords, values)))


# ----------------- suites -----------------

def _lemma33(cfg: WeightConfig, space: GroundSpace, i: int, seed: int, params: dict) -> Optional[dict]:
    if cfg.tail_rule is not TailRule.DOUBLING:
        raise SuiteSkipped("the finite-support index needs tail_rule = doubling")
    rng = np.random.default_rng(seed)
    width = params.get("width", 12)
    f = random_tree(cfg, space, TreeShape("free"), seed=seed, width=width, strict_alternation=True)
    y = _random_vector(rng, width, int(rng.integers(1, 5)))
    eps = Fraction(1, int(rng.integers(2, 50)))
    result = check_lemma_finitesupport(cfg, space, f, y, eps)
    if not result.passed:
        return {"tree": tree_to_json(f), "y": y.to_dict(), **result.details}
    return None


def normalized_blocks(space: GroundSpace, rng: np.random.Generator, count: int) -> List[FiniteVector]:
    """
    `count` successive blocks of norm exactly 1, with random gaps.

    A nonnegative block whose ground norm equals its l1 norm has norm equal
    to both, so scaling it by 1/l1 normalizes it exactly. Blocks where the two
    differ fall back to a signed unit vector.
    """
    blocks: List[FiniteVector] = []
    k = 0
    for _ in range(count):
        start = k + 1 + int(rng.integers(0, 2))
        sign = 1 if rng.random() < 0.5 else -1
        size = int(rng.integers(1, 4))
        coords = start + np.cumsum(np.concatenate(([0], rng.integers(1, 3, size=size - 1))))
        block = FiniteVector(tuple((int(c), Fraction(int(v))) for c, v in zip(coords, rng.integers(1, 4, size=size))))
        if ground_norm(space, block) == block.l1():
            block = block.scale(Fraction(sign) / block.l1())
        else:
            block = FiniteVector.unit(start, sign)
        blocks.append(block)
        k = block.support[-1]
    return blocks


def _lemma34(cfg: WeightConfig, space: GroundSpace, i: int, seed: int, params: dict) -> Optional[dict]:
    if cfg.J < 2:
        raise SuiteSkipped("needs two weight indices j0 < j")
    rng = np.random.default_rng(seed)
    j0 = int(rng.integers(1, cfg.J))
    j = int(rng.integers(j0 + 1, cfg.J + 1))
    blocks = normalized_blocks(space, rng, cfg.max_children(j))
    f = random_weighted_tree(cfg, space, j0, seed=seed, width=blocks[-1].support[-1])
    result = check_lemma_smallweight(cfg, space, f, blocks, j, block_norms=None)
    if not result.passed:
        return {"tree": tree_to_json(f), "blocks": [b.to_dict() for b in blocks], **result.details}
    return None


@lru_cache(maxsize=16)
def _condition_a(cfg: WeightConfig):
    return check_paper_conditions(cfg).get("a")


def _lemma41(cfg: WeightConfig, space: GroundSpace, i: int, seed: int, params: dict) -> Optional[dict]:
    condition = _condition_a(cfg)
    if condition.verdict is Verdict.FALSE:
        raise SuiteSkipped(f"condition (a) fails: sum 1/m_j = {fmt(condition.detail['prefix_sum'])} >= 1/10")
    if condition.verdict is not Verdict.TRUE:
        raise SuiteSkipped(
            f"condition (a) undecidable: prefix sum 1/m_j = {fmt(condition.detail['prefix_sum'])} < 1/10 "
            "but tail_rule = none leaves the tail unknown"
        )
    n = params.get("n") or 1 + i % 2
    f = random_tree(cfg, space, TreeShape("min_terminal_depth", 2 * n), seed=seed, width=params.get("width", 12))
    value = sup_norm(cfg, space, f)
    bound = Fraction(1, 10**n)
    if value > bound:
        return {"tree": tree_to_json(f), "n": n, "sup_norm": value, "bound": bound}
    return None


def _lemma42(cfg: WeightConfig, space: GroundSpace, i: int, seed: int, params: dict) -> Optional[dict]:
    choices = [j for j in (2, 3) if j <= cfg.J] or [1]
    j0 = params.get("j0") or choices[i % len(choices)]
    f = random_tree(cfg, space, TreeShape("weight_floor", j0), seed=seed, width=params.get("width", 12))
    if cfg.tail_rule is TailRule.DOUBLING:
        tail = cfg.inverse_sum_from(j0)
    else:
        # the sampled trees only use j <= J
        tail = cfg.prefix_inverse_sum(j0)
    bound = 2 * tail
    value = sup_norm(cfg, space, f)
    if value > bound:
        return {"tree": tree_to_json(f), "j0": j0, "sup_norm": value, "bound": bound}
    return None


def _lift(cfg: WeightConfig, space: GroundSpace, i: int, seed: int, params: dict) -> Optional[dict]:
    rng = np.random.default_rng(seed)
    dim = params.get("dim") or 2 + i % 2
    base = random_space(dim, rng)
    z = random_unit_vector(base, rng)
    reps = default_representatives(base, after=int(rng.integers(0, 20)))
    x = lift_isometric(base, z, reps)
    g = ground_norm(base, x)
    if g != z_norm(base, z) or quotient_apply(base, x) != z:
        return {"space": base.to_dict(), "z": [fmt(c) for c in z], "x": x.to_dict(), "ground_norm": g}
    return None


def _jtree(cfg: WeightConfig, space: GroundSpace, i: int, seed: int, params: dict) -> Optional[dict]:
    rng = np.random.default_rng(seed)
    tv = random_tree_vector(rng, int(rng.integers(1, params.get("max_nodes", 10) + 1)))
    dp, brute = jtree_norm_squared(tv), jtree_norm_bruteforce(tv)
    if dp != brute:
        return {"tree": tv.to_dict(), "dp": dp, "bruteforce": brute}
    return None


_RUNNERS: Dict[str, Callable[..., Optional[dict]]] = {
    "lemma33": _lemma33,
    "lemma34": _lemma34,
    "lemma41": _lemma41,
    "lemma42": _lemma42,
    "lift": _lift,
    "jtree": _jtree,
}


def run_suite(suite: str, cfg: WeightConfig, space: GroundSpace, count: int = 100, seed: int = 0,
              **params) -> SuiteResult:
    if suite not in _RUNNERS:
        raise ValueError(f"unknown suite {suite!r}, expected one of {SUITES}")
    runner = _RUNNERS[suite]
    started = time.perf_counter()
    result = SuiteResult(suite, "pass")
    try:
        for i in range(count):
            failure = runner(cfg, space, i, seed + i, params)
            result.count += 1
            if failure is not None:
                failure["seed"] = seed + i
                result.failures.append(failure)
    except SuiteSkipped as e:
        result.status = "skipped"
        result.reason = str(e)
        logger.warning(f"[CHECK] {suite} skipped: {e}")
    else:
        result.status = "fail" if result.failures else "pass"
    result.seconds = time.perf_counter() - started
    logger.info(f"[CHECK] {suite}: {result.status} ({result.count} instances, {len(result.failures)} failures)")
    return result
