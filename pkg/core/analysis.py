# Path: core/analysis.py
"""
Finite diagnostics on top of the norm engine: l1 spreading constants,
block growth, Cesaro averages, the quotient-map experiment and the node
partition bookkeeping of its proof.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Any, Dict, List, Optional, Sequence

from api.logger import get_logger
from core.config import ConditionReport, TailRule, WeightConfig, check_j0_conditions
from core.errors import PreconditionError
from core.functionals import (
    Address,
    CheckResult,
    Convex,
    ConvexTerm,
    Node,
    Weighted,
    _jsonable,
    apply_coefficients,
    combine_orthogonal,
    evaluate,
    lemma_finitesupport_index,
    masked_coefficients,
    split_at,
    terminal_nodes,
    tree_to_json,
    weighted_ancestors,
)
from core.ground import (
    FiniteVector,
    GroundFunctional,
    GroundSpace,
    default_representatives,
    dual_certificate,
    ground_norm,
    lift_isometric,
    quotient_apply,
    vector_sum,
    z_norm,
)
from core.norm_engine import norm
from core.rational import Enclosure, Verdict, enclosure_min, fmt, parse_rational, real_power

logger = get_logger(__name__)


def _check_successive(vectors: Sequence[FiniteVector], what: str = "blocks"):
    for k, v in enumerate(vectors):
        if v.is_zero():
            raise PreconditionError(f"{what}: entry {k + 1} is zero")
        if k and vectors[k - 1].support[-1] >= v.support[0]:
            raise PreconditionError(f"{what}: entries {k} and {k + 1} are not successive")


def _combine(family: Sequence[FiniteVector], coeffs: Sequence[Fraction]) -> FiniteVector:
    return vector_sum(v.scale(a) for v, a in zip(family, coeffs) if a)


# -------------------------------------------------------------------------
# spreading constants
# -------------------------------------------------------------------------

def ell1_constant(
    cfg: WeightConfig,
    space: GroundSpace,
    family: Sequence[FiniteVector],
    coeff_grid: Optional[Sequence[Sequence]] = None,
    target_width: Fraction = Fraction(1, 10**9),
) -> Enclosure:
    """
    min over tested coefficients a of ||sum a_i x_i|| / ||a||_1.

    The tested set is every sign pattern with a_1 = +1 (the norm is even)
    plus the optional grid. An upper bound on any l1 spreading constant the
    family can realize.
    """
    if not family:
        raise PreconditionError("ell1_constant: empty family")
    tested: List[tuple] = [(1,) + signs for signs in product((1, -1), repeat=len(family) - 1)]
    for row in coeff_grid or ():
        row = tuple(parse_rational(a) for a in row)
        if len(row) != len(family):
            raise PreconditionError(f"ell1_constant: grid row has {len(row)} entries, family has {len(family)}")
        tested.append(row)
    ratios = []
    for a in tested:
        mass = sum((abs(Fraction(c)) for c in a), Fraction(0))
        if mass == 0:
            continue
        y = _combine(family, [Fraction(c) for c in a])
        ratios.append(norm(cfg, space, y, target_width=target_width).enclosure.scale(1 / mass))
    return enclosure_min(ratios)


@dataclass
class BlockGrowthRow:
    j: int
    count: int
    norm: Enclosure
    reference: Fraction
    witness_value: Optional[Fraction]
    bound_holds: Optional[bool]
    power_columns: Dict[str, Enclosure] = field(default_factory=dict)
    ratios: Dict[str, Enclosure] = field(default_factory=dict)
    witness: Optional[Node] = None

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "n": self.count,
            "norm": self.norm.to_dict(),
            "reference": fmt(self.reference),
            "witness_value": None if self.witness_value is None else fmt(self.witness_value),
            "bound_holds": self.bound_holds,
            "powers": {p: e.to_dict() for p, e in self.power_columns.items()},
            "ratios": {p: e.to_dict() for p, e in self.ratios.items()},
        }


def _divide(a: Enclosure, b: Enclosure) -> Enclosure:
    return Enclosure(a.lo / b.hi, a.hi / b.lo)


def block_growth_table(
    cfg: WeightConfig,
    space: GroundSpace,
    blocks: Sequence[FiniteVector],
    p_list: Sequence = (2,),
    target_width: Fraction = Fraction(1, 10**9),
) -> List[BlockGrowthRow]:
    """One row per j with n_j <= len(blocks): ||sum_{k<=n_j} y_k|| against n_j/m_j and n_j^(1/p)."""
    _check_successive(blocks)
    block_results = [norm(cfg, space, b, target_width=target_width) for b in blocks]
    normalized = all(r.enclosure.lo >= 1 for r in block_results)
    rows: List[BlockGrowthRow] = []
    for j in range(1, cfg.J + 1):
        count = cfg.max_children(j)
        if count > len(blocks):
            break
        total = vector_sum(blocks[:count])
        enc = norm(cfg, space, total, target_width=target_width).enclosure
        row = BlockGrowthRow(j, count, enc, Fraction(count, cfg.weight(j)), None, None)
        for p in p_list:
            p = parse_rational(p)
            col = real_power(Fraction(count), Enclosure.exact(1 / p))
            row.power_columns[fmt(p)] = col
            row.ratios[fmt(p)] = _divide(enc, col)
        if normalized:
            # (1/m_j) sum of the block witnesses, one convex term with lambda = 1
            tree = Convex((ConvexTerm(Fraction(1), Weighted(j, tuple(r.witness for r in block_results[:count]))),))
            row.witness = tree
            row.witness_value = evaluate(cfg, space, tree, total)
            row.bound_holds = row.witness_value >= row.reference and enc.lo >= row.reference
        rows.append(row)
        logger.info(f"[ANALYSIS] block growth j={j} n={count} lo={float(enc.lo):.6f} ref={fmt(row.reference)}")
    return rows


def cesaro_profile(
    cfg: WeightConfig,
    space: GroundSpace,
    sequence: Sequence[FiniteVector],
    counts: Sequence[int],
    target_width: Fraction = Fraction(1, 10**9),
) -> List[Enclosure]:
    out = []
    for n in counts:
        if not 1 <= n <= len(sequence):
            raise PreconditionError(f"cesaro_profile: count {n} outside 1..{len(sequence)}")
        average = vector_sum(sequence[:n]).scale(Fraction(1, n))
        out.append(norm(cfg, space, average, target_width=target_width).enclosure)
    return out


@dataclass
class SpreadingReport:
    family: List[FiniteVector]
    ell1_lower_constant: Enclosure
    block_growth: List[BlockGrowthRow]
    cesaro: List[Enclosure]

    def to_dict(self) -> dict:
        return {
            "family": [v.to_dict() for v in self.family],
            "ell1_constant": self.ell1_lower_constant.to_dict(),
            "ell1_note": "minimum over tested coefficients; an upper bound on the spreading constant",
            "block_growth": [r.to_dict() for r in self.block_growth],
            "cesaro": [e.to_dict() for e in self.cesaro],
        }


def spreading_report(cfg: WeightConfig, space: GroundSpace, family: Sequence[FiniteVector],
                     p_list: Sequence = (2,), counts: Optional[Sequence[int]] = None) -> SpreadingReport:
    counts = list(counts) if counts else list(range(1, len(family) + 1))
    try:
        growth = block_growth_table(cfg, space, family, p_list)
    except PreconditionError as e:
        logger.warning(f"[ANALYSIS] block growth skipped: {e}")
        growth = []
    return SpreadingReport(
        list(family),
        ell1_constant(cfg, space, family),
        growth,
        cesaro_profile(cfg, space, family, counts),
    )


# -------------------------------------------------------------------------
# quotient experiment
# -------------------------------------------------------------------------

@dataclass
class QuotientReport:
    z: tuple
    j0: int
    x: FiniteVector
    blocks: List[FiniteVector]
    representatives: List[tuple]
    quotient_ok: bool
    certificate: GroundFunctional
    certificate_value: Fraction
    engine: Enclosure
    enclosure: Enclosure
    converged: bool
    conditions: ConditionReport
    block_l1: List[Fraction]
    block_ground: List[Fraction]

    @property
    def conditions_ok(self) -> bool:
        return self.conditions.all_true()

    @property
    def d(self) -> int:
        return len(self.z)

    def to_dict(self) -> dict:
        return {
            "z": [fmt(c) for c in self.z],
            "j0": self.j0,
            "n": len(self.blocks),
            "x": self.x.to_dict(),
            "representatives": [list(r) for r in self.representatives],
            "quotient_ok": self.quotient_ok,
            "certificate": {**self.certificate.to_dict(), "value": fmt(self.certificate_value)},
            "engine": self.engine.to_dict(),
            "enclosure": self.enclosure.to_dict(),
            "converged": self.converged,
            "conditions": self.conditions.to_dict(),
            "warning": None if self.conditions_ok else "j0 conditions not all verified",
            "blocks": [
                {"t": t, "l1": fmt(l1), "l1_le_d": l1 <= self.d, "ground": fmt(g), "ground_le_1": g <= 1}
                for t, (l1, g) in enumerate(zip(self.block_l1, self.block_ground), start=1)
            ],
        }


def quotient_experiment(
    cfg: WeightConfig,
    space: GroundSpace,
    z: Sequence,
    j0: int,
    target_width: Fraction = Fraction(1, 10**9),
) -> QuotientReport:
    """
    x = (1/n_{j0}) sum_t y_t with y_t the lift of z on the t-th interlaced
    representative tuple l_t^1 < ... < l_t^d < l_{t+1}^1.
    """
    z = tuple(parse_rational(c) for c in z)
    zn = z_norm(space, z)
    if zn != 1:
        raise PreconditionError(f"quotient_experiment: ||z||_Z = {fmt(zn)}, expected 1")
    conditions = check_j0_conditions(cfg, space.dim, j0)
    if not conditions.all_true():
        logger.warning(f"[ANALYSIS] j0={j0}: conditions not all verified, continuing")
    n = cfg.max_children(j0)
    reps, blocks = [], []
    last = 0
    for _ in range(n):
        r = default_representatives(space, after=last)
        reps.append(r)
        blocks.append(lift_isometric(space, z, r))
        last = r[-1]
    x = vector_sum(blocks).scale(Fraction(1, n))
    quotient_ok = quotient_apply(space, x) == z

    f = dual_certificate(space, z)
    certificate = GroundFunctional((reps[0][0], reps[-1][-1]), f)
    certificate_value = certificate.evaluate(space, x)

    result = norm(cfg, space, x, target_width=target_width)
    lo = max(result.enclosure.lo, certificate_value)
    enclosure = Enclosure(lo, max(lo, result.enclosure.hi))
    logger.info(
        f"[ANALYSIS] quotient experiment d={space.dim} j0={j0}: Qx=z {quotient_ok}, "
        f"enclosure [{float(enclosure.lo):.9f}, {float(enclosure.hi):.9f}]"
    )
    return QuotientReport(
        z=z,
        j0=j0,
        x=x,
        blocks=blocks,
        representatives=reps,
        quotient_ok=quotient_ok,
        certificate=certificate,
        certificate_value=certificate_value,
        engine=result.enclosure,
        enclosure=enclosure,
        converged=result.converged,
        conditions=conditions,
        block_l1=[b.l1() for b in blocks],
        block_ground=[ground_norm(space, b) for b in blocks],
    )


# -------------------------------------------------------------------------
# node partition audit
# -------------------------------------------------------------------------

@dataclass
class AuditReport:
    A1: List[Address]
    A2: List[Address]
    A3: List[Address]
    values: Dict[str, Fraction]
    total: Fraction
    bounds: Dict[str, Any]
    E1: List[int]
    E2: List[int]

    @property
    def additive(self) -> bool:
        return self.values["f1"] + self.values["f2"] + self.values["f3"] == self.total

    @property
    def counting_ok(self) -> bool:
        return len(self.E2) <= 2 * len(self.A3)

    def to_dict(self) -> dict:
        return {
            "A1": [list(a) for a in self.A1],
            "A2": [list(a) for a in self.A2],
            "A3": [list(a) for a in self.A3],
            "values": _jsonable(self.values),
            "total": fmt(self.total),
            "additive": self.additive,
            "bounds": _jsonable(self.bounds),
            "E1": self.E1,
            "E2": self.E2,
            "counting_ok": self.counting_ok,
        }


def node_partition_audit(
    cfg: WeightConfig,
    space: GroundSpace,
    f: Node,
    x: FiniteVector,
    j0: int,
    s_j0_bound: Optional[Fraction] = None,
    blocks: Optional[Sequence[FiniteVector]] = None,
) -> AuditReport:
    """
    Split the terminal nodes of f into
        A1: depth >= 2 s_{j0}
        A2: not in A1, below a weighted node of index >= j0
        A3: the rest
    and evaluate the three restricted functionals on x.
    """
    if not blocks:
        raise PreconditionError("node_partition_audit: block structure metadata missing")
    if s_j0_bound is None:
        s_j0_bound = cfg.s(j0).hi
    s_j0_bound = parse_rational(s_j0_bound)
    A1, A2, A3 = [], [], []
    ranges: Dict[Address, tuple] = {}
    for address, node in terminal_nodes(f):
        ranges[address] = node.functional.E
        if len(address) >= 2 * s_j0_bound:
            A1.append(address)
        elif any(j >= j0 for _, j in weighted_ancestors(f, address)):
            A2.append(address)
        else:
            A3.append(address)

    parts: Dict[str, Dict[int, Fraction]] = {}
    for name, keep in (("f1", A1), ("f2", A2), ("f3", A3)):
        parts[name] = masked_coefficients(cfg, space, f, set(keep))
    values = {name: apply_coefficients(co, x) for name, co in parts.items()}
    total = evaluate(cfg, space, f, x)

    l1 = x.l1()
    bounds: Dict[str, Any] = {
        "f1_sup": max((abs(c) for c in parts["f1"].values()), default=Fraction(0)),
    }
    bounds["f1_bound"] = bounds["f1_sup"] * l1
    bounds["f1_ok"] = abs(values["f1"]) <= bounds["f1_bound"]
    if cfg.tail_rule is TailRule.DOUBLING:
        bounds["f2_bound"] = 2 * cfg.inverse_sum_from(j0) * l1
        bounds["f2_ok"] = abs(values["f2"]) <= bounds["f2_bound"]
    else:
        bounds["f2_bound"] = None
        bounds["f2_ok"] = None

    E1, E2 = [], []
    for t, y in enumerate(blocks, start=1):
        lo_t, hi_t = y.support[0], y.support[-1]
        split = False
        for address in A3:
            a, b = ranges[address]
            meets = any(a <= k <= b for k in y.support)
            inside = a <= lo_t and hi_t <= b
            if meets and not inside:
                split = True
                break
        (E2 if split else E1).append(t)

    n = len(blocks)
    d = space.dim
    if j0 == 1:
        a3_cap = Enclosure.exact(0)
    else:
        a3_cap = real_power(Fraction((j0 - 1) * cfg.max_children(j0 - 1)), cfg.s(j0))
    bounds["A3_size"] = len(A3)
    bounds["A3_cap"] = a3_cap
    if len(A3) <= a3_cap.lo:
        bounds["A3_within_cap"] = Verdict.TRUE
    elif len(A3) > a3_cap.hi:
        bounds["A3_within_cap"] = Verdict.FALSE
    else:
        bounds["A3_within_cap"] = Verdict.UNDECIDABLE
    if E2:
        f3_e2 = apply_coefficients(parts["f3"], vector_sum(blocks[t - 1] for t in E2).scale(Fraction(1, n)))
    else:
        f3_e2 = Fraction(0)
    bounds["f3_on_E2"] = f3_e2
    bounds["f3_on_E2_bound"] = Fraction(d * len(E2), n)
    logger.debug(f"[ANALYSIS] audit |A1|={len(A1)} |A2|={len(A2)} |A3|={len(A3)} |E2|={len(E2)}")
    return AuditReport(A1, A2, A3, values, total, bounds, E1, E2)


# -------------------------------------------------------------------------
# almost norming functionals
# -------------------------------------------------------------------------

def almost_norming_truncation(cfg: WeightConfig, space: GroundSpace, phi: Node, x: FiniteVector, eps) -> CheckResult:
    """psi = phi restricted to weights <= i0 still almost norms x, and w(psi) <= m_{i0}."""
    if not isinstance(phi, Convex):
        raise PreconditionError("almost_norming_truncation: phi must have a convex root")
    eps = parse_rational(eps)
    i0, bound = lemma_finitesupport_index(cfg, x, eps)
    psi, _ = split_at(phi, i0)
    full = evaluate(cfg, space, phi, x)
    kept = evaluate(cfg, space, psi, x)
    weights = [cfg.weight(j) for j in psi.indices()]
    return CheckResult(
        "almost_norming_truncation",
        kept > full - eps and all(w <= cfg.weight(i0) for w in weights),
        {"i0": i0, "phi": full, "psi": kept, "eps": eps, "psi_weights": weights, "analytic_bound": bound,
         "psi_tree": tree_to_json(psi)},
    )


def check_large_weight(cfg: WeightConfig, space: GroundSpace, psi: Node, phi: Node, x: FiniteVector,
                       lam, hi) -> CheckResult:
    """
    f = lam (psi + phi) lies in the norming set, so phi(x) = f(x)/lam - psi(x)
    <= ||x||/lam - psi(x) for any certified upper bound hi >= ||x||.
    """
    lam, hi = parse_rational(lam), parse_rational(hi)
    if lam <= 0:
        raise PreconditionError(f"check_large_weight: lam must be positive, got {fmt(lam)}")
    f = combine_orthogonal(cfg, space, psi, phi, lam)
    fx = evaluate(cfg, space, f, x)
    psi_x = evaluate(cfg, space, psi, x)
    phi_x = evaluate(cfg, space, phi, x)
    derived = hi / lam - psi_x
    return CheckResult(
        "large_weight",
        phi_x == fx / lam - psi_x and phi_x <= derived and fx <= hi,
        {"f": fx, "psi": psi_x, "phi": phi_x, "lam": lam, "hi": hi, "derived_bound": derived,
         "below_half": derived < Fraction(1, 2)},
    )

