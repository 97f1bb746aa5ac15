from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.analysis import (
    almost_norming_truncation,
    block_growth_table,
    cesaro_profile,
    check_large_weight,
    ell1_constant,
    node_partition_audit,
    quotient_experiment,
    spreading_report,
)
from core.config import TailRule, WeightConfig
from core.errors import PreconditionError
from core.functionals import Weighted, convex, evaluate, leaf
from core.ground import FiniteVector, scalar_space, sup_norm_space
from core.norm_engine import norm
from core.rational import Verdict

CFG_A = WeightConfig((2, 4, 8, 16), (4, 8, 16, 32))
CFG_Q = WeightConfig((60, 120, 240, 480), (8, 16, 32, 64), TailRule.DOUBLING)
SCALAR = scalar_space()
UNITS = [FiniteVector.unit(k) for k in range(1, 5)]
ALTERNATING = [FiniteVector.unit(k, (-1) ** (k + 1)) for k in range(1, 5)]


def contains_root(enclosure, square):
    return enclosure.lo ** 2 <= square <= enclosure.hi ** 2


# ----------------- spreading constants -----------------

def test_ell1_constant_of_unit_vectors():
    e = ell1_constant(CFG_A, SCALAR, UNITS)
    assert contains_root(e, Fraction(85, 256))


def test_ell1_constant_with_grid_row():
    e = ell1_constant(CFG_A, SCALAR, UNITS, coeff_grid=[["1", "1/2", "1/2", "1"]])
    assert e.hi <= 1


@settings(max_examples=20, deadline=None)
@given(st.lists(st.lists(st.integers(-2, 2), min_size=3, max_size=3), min_size=1, max_size=4))
def test_ell1_constant_shrinks_as_grid_grows(rows):
    family = UNITS[:3]
    constants = [ell1_constant(CFG_A, SCALAR, family, coeff_grid=rows[:k]) for k in range(len(rows) + 1)]
    for before, after in zip(constants, constants[1:]):
        assert after.lo <= before.lo
        assert after.hi <= before.hi


def test_ell1_constant_preconditions():
    with pytest.raises(PreconditionError):
        ell1_constant(CFG_A, SCALAR, [])
    with pytest.raises(PreconditionError):
        ell1_constant(CFG_A, SCALAR, UNITS, coeff_grid=[[1, 1]])


def test_block_growth_first_row():
    rows = block_growth_table(CFG_A, SCALAR, UNITS, p_list=(2, 1))
    assert len(rows) == 1
    row = rows[0]
    assert (row.j, row.count) == (1, 4)
    assert row.norm.lo == row.norm.hi == 4
    assert row.reference == 2
    assert row.witness_value == 2
    assert row.bound_holds is True
    assert row.ratios["2"].contains(2)
    assert row.ratios["1"].contains(1)
    doc = row.to_dict()
    assert doc["n"] == 4 and doc["reference"] == "2"


def test_block_growth_needs_successive_blocks():
    with pytest.raises(PreconditionError):
        block_growth_table(CFG_A, SCALAR, [FiniteVector.unit(2), FiniteVector.unit(1)])
    with pytest.raises(PreconditionError):
        block_growth_table(CFG_A, SCALAR, [FiniteVector.unit(1), FiniteVector()])


def test_block_growth_without_normalized_blocks_has_no_witness():
    halves = [b.scale(Fraction(1, 2)) for b in UNITS]
    row = block_growth_table(CFG_A, SCALAR, halves)[0]
    assert row.witness is None
    assert row.bound_holds is None


def test_cesaro_profile_units():
    for e in cesaro_profile(CFG_A, SCALAR, UNITS, [1, 2, 3, 4]):
        assert e.lo == e.hi == 1


def test_cesaro_profile_alternating():
    for e in cesaro_profile(CFG_A, SCALAR, ALTERNATING, [2, 4]):
        assert contains_root(e, Fraction(85, 256))


def test_cesaro_count_out_of_range():
    with pytest.raises(PreconditionError):
        cesaro_profile(CFG_A, SCALAR, UNITS, [0])
    with pytest.raises(PreconditionError):
        cesaro_profile(CFG_A, SCALAR, UNITS, [5])


def test_spreading_report_skips_growth_for_overlapping_family():
    family = [FiniteVector.from_sequence([1, 1]), FiniteVector.from_sequence([0, 1, 1])]
    report = spreading_report(CFG_A, SCALAR, family)
    assert report.block_growth == []
    doc = report.to_dict()
    assert len(doc["cesaro"]) == 2
    assert "ell1_note" in doc


# ----------------- quotient experiment -----------------

def test_quotient_experiment_scalar():
    report = quotient_experiment(CFG_Q, SCALAR, ["1"], j0=1)
    assert report.quotient_ok
    assert report.conditions_ok
    assert report.enclosure.lo == report.enclosure.hi == 1
    assert report.certificate_value == 1
    assert len(report.blocks) == 8
    assert all(l1 <= 1 for l1 in report.block_l1)
    doc = report.to_dict()
    assert doc["warning"] is None
    assert doc["n"] == 8


def test_quotient_experiment_negative_z():
    report = quotient_experiment(CFG_Q, SCALAR, ["-1"], j0=1)
    assert report.quotient_ok
    assert report.enclosure.contains(1)


def test_quotient_experiment_two_dimensional():
    space = sup_norm_space(2)
    report = quotient_experiment(CFG_Q, space, ["1", "-1"], j0=1)
    assert report.quotient_ok
    assert report.certificate.E == (1, 16)
    assert report.certificate.coeffs == (1, 0)
    assert report.certificate_value == 1
    assert report.enclosure.lo >= 1
    assert all(g <= 1 for g in report.block_ground)
    assert all(l1 <= 2 for l1 in report.block_l1)


def test_quotient_experiment_warns_on_failed_conditions():
    report = quotient_experiment(CFG_A, SCALAR, ["1"], j0=1)
    assert not report.conditions_ok
    assert report.to_dict()["warning"]
    assert report.quotient_ok


def test_quotient_experiment_needs_unit_z():
    with pytest.raises(PreconditionError):
        quotient_experiment(CFG_Q, SCALAR, ["2"], j0=1)


# ----------------- node partition audit -----------------

def _audit_tree():
    inner = convex((1, Weighted(2, (leaf((3, 3), (1,)), leaf((4, 4), (1,))))))
    return convex(
        ("1/2", Weighted(1, (leaf((1, 2), (1,)), inner))),
        ("1/2", Weighted(2, (leaf((5, 8), (1,)),))),
    )


def test_node_partition_audit():
    quotient = quotient_experiment(CFG_Q, SCALAR, ["1"], j0=1)
    f = _audit_tree()
    audit = node_partition_audit(CFG_Q, SCALAR, f, quotient.x, j0=2, blocks=quotient.blocks)
    assert audit.A1 == [(1, 2, 2, 1), (1, 2, 2, 2)]
    assert audit.A2 == [(2, 1)]
    assert audit.A3 == [(1, 1)]
    assert audit.values["f1"] == Fraction(1, 57600)
    assert audit.values["f2"] == Fraction(1, 480)
    assert audit.values["f3"] == Fraction(1, 480)
    assert audit.additive
    assert audit.total == evaluate(CFG_Q, SCALAR, f, quotient.x)
    assert audit.counting_ok
    assert audit.E2 == []
    assert audit.bounds["f1_ok"] and audit.bounds["f2_ok"]
    assert audit.bounds["A3_within_cap"] is Verdict.TRUE
    assert audit.to_dict()["additive"] is True


def test_node_partition_audit_on_engine_witness():
    quotient = quotient_experiment(CFG_Q, SCALAR, ["1"], j0=1)
    x = quotient.x + FiniteVector.unit(2, Fraction(-1, 8))
    witness = norm(CFG_Q, SCALAR, x).witness
    audit = node_partition_audit(CFG_Q, SCALAR, witness, x, j0=2, blocks=quotient.blocks)
    assert audit.additive
    assert audit.counting_ok


def test_node_partition_audit_without_tail_skips_f2_bound():
    f = _audit_tree()
    x = FiniteVector.from_sequence([1] * 8)
    audit = node_partition_audit(CFG_A, SCALAR, f, x, j0=2, blocks=[FiniteVector.unit(k) for k in range(1, 9)])
    assert audit.bounds["f2_ok"] is None
    assert audit.additive


def test_node_partition_audit_requires_blocks():
    with pytest.raises(PreconditionError):
        node_partition_audit(CFG_Q, SCALAR, _audit_tree(), FiniteVector.unit(1), j0=2)


# ----------------- almost norming and large weight -----------------

def test_almost_norming_truncation():
    x = FiniteVector.from_sequence([1, -1])
    phi = convex(
        ("1/2", Weighted(1, (leaf((1, 1), (1,)), leaf((2, 2), (-1,))))),
        ("1/2", Weighted(2, (leaf((1, 1), (1,)), leaf((2, 2), (-1,))))),
    )
    result = almost_norming_truncation(CFG_Q, SCALAR, phi, x, "1/10")
    assert result.passed
    assert result.details["i0"] == 1
    assert result.details["psi"] == Fraction(1, 60)
    assert result.details["psi_weights"] == [60]


def test_almost_norming_truncation_needs_convex_root():
    with pytest.raises(PreconditionError):
        almost_norming_truncation(CFG_Q, SCALAR, leaf((1, 1), (1,)), FiniteVector.unit(1), "1/10")


def test_check_large_weight():
    x = FiniteVector.from_sequence([1, -1])
    psi = convex((1, Weighted(1, (leaf((1, 1), (1,)),))))
    phi = convex((1, Weighted(3, (leaf((2, 2), (-1,)),))))
    hi = norm(CFG_A, SCALAR, x).enclosure.hi
    result = check_large_weight(CFG_A, SCALAR, psi, phi, x, "7/10", hi)
    assert result.passed
    assert result.details["f"] == Fraction(7, 16)
    assert result.details["psi"] == Fraction(1, 2)
    assert result.details["phi"] == Fraction(1, 8)
    assert result.details["below_half"] is False


def test_check_large_weight_rejects_bad_lambda():
    x = FiniteVector.unit(1)
    psi = convex((1, Weighted(1, (leaf((1, 1), (1,)),))))
    phi = convex((1, Weighted(2, (leaf((2, 2), (1,)),))))
    with pytest.raises(PreconditionError):
        check_large_weight(CFG_A, SCALAR, psi, phi, x, 0, 1)
    with pytest.raises(PreconditionError):
        check_large_weight(CFG_A, SCALAR, psi, phi, x, "3/4", 1)
