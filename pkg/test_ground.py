from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.errors import DimensionError, GroundSpaceError, RepresentativeError
from core.ground import (
    FiniteVector,
    GroundFunctional,
    GroundSpace,
    Partition,
    default_representatives,
    dual_certificate,
    ground_norm,
    ground_norm_witness,
    lift_isometric,
    norming_set_oracle,
    quotient_apply,
    random_space,
    random_unit_vector,
    scalar_space,
    sup_norm_oracle,
    sup_norm_space,
    vector_sum,
    z_norm,
    zx_norm,
)

SCALAR = scalar_space()
SUP2 = sup_norm_space(2)
L1_2 = GroundSpace(2, ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)))


def vec(*values):
    return FiniteVector.from_sequence(values)


# ----------------- vectors and partitions -----------------

def test_finite_vector_drops_zeros_and_merges():
    v = FiniteVector(((3, 1), (1, 2), (3, -1), (2, "1/2")))
    assert v.entries == ((1, Fraction(2)), (2, Fraction(1, 2)))
    assert v.support == (1, 2)
    assert (v - v).is_zero()
    assert vec(1, -2, 3).l1() == 6
    assert vec(1, -2, 3).sup() == 3


def test_finite_vector_rejects_coordinate_zero():
    with pytest.raises(ValueError):
        FiniteVector(((0, 1),))


def test_partition_prefix_then_period():
    p = Partition(period=(1, 2), prefix=(2, 2))
    assert [p.class_of(k) for k in range(1, 7)] == [2, 2, 1, 2, 1, 2]
    assert p.next_in_class(1) == 3
    assert p.next_in_class(2, after=3) == 4


def test_partition_needs_every_class_in_period():
    with pytest.raises(GroundSpaceError):
        GroundSpace(2, SUP2.norming_set, Partition(period=(1,), prefix=(2,)))


# ----------------- base space validation -----------------

@pytest.mark.parametrize(
    "dim, F, fragment",
    [
        (1, ((1,),), "symmetry"),
        (1, ((2,), (-2,)), "normalization"),
        (2, ((1, 0), (-1, 0)), "spanning"),
        (2, ((1, 1), (-1, -1), (0, 1), (0, -1)), "bimonotonicity"),
        (1, (), "empty"),
    ],
)
def test_invalid_ground_space(dim, F, fragment):
    with pytest.raises(GroundSpaceError) as exc:
        GroundSpace(dim, F)
    assert fragment in str(exc.value)


def test_bimonotone_check_can_be_disabled():
    space = GroundSpace(2, ((1, 1), (-1, -1), (0, 1), (0, -1)), check_bimonotone=False)
    assert space.dim == 2


def test_functional_length_must_match_dim():
    with pytest.raises(DimensionError):
        GroundSpace(2, ((1,), (-1,)))


def test_dual_ball_membership():
    assert SUP2.in_dual_ball((Fraction(1, 2), Fraction(1, 2)))
    assert not SUP2.in_dual_ball((1, 1))
    assert L1_2.in_dual_ball((1, 1))


# ----------------- Z norm, quotient, ground norm -----------------

@pytest.mark.parametrize(
    "space, z, expected",
    [(SUP2, (1, -1), 1), (L1_2, (1, -1), 2), (SCALAR, (Fraction(-3, 4),), Fraction(3, 4))],
)
def test_z_norm(space, z, expected):
    assert z_norm(space, z) == expected


def test_dual_certificate_attains():
    f = dual_certificate(SUP2, (1, -1))
    assert f == (Fraction(1), Fraction(0))


def test_z_norm_dimension_mismatch():
    with pytest.raises(DimensionError):
        z_norm(SUP2, (1,))


@pytest.mark.parametrize(
    "x, expected",
    [(FiniteVector.from_mapping({1: 1, 3: 1}), (2, 0)), (FiniteVector(), (0, 0)), (vec(1, -1), (1, -1))],
)
def test_quotient_apply(x, expected):
    assert quotient_apply(SUP2, x) == tuple(Fraction(c) for c in expected)


@pytest.mark.parametrize(
    "space, x, expected",
    [(SCALAR, FiniteVector.unit(1), 1), (SCALAR, vec(1, 1, -1), 2), (SUP2, vec(1, -1), 1), (SCALAR, vec(1, 1, -3), 3)],
)
def test_ground_norm(space, x, expected):
    assert ground_norm(space, x) == expected


def test_ground_norm_witness_evaluates_to_norm():
    x = vec(1, 1, -1)
    value, witness = ground_norm_witness(SCALAR, x)
    assert witness.E == (1, 2)
    assert witness.evaluate(SCALAR, x) == value == 2


def test_ground_functional_evaluate_by_class():
    g = GroundFunctional((1, 4), (1, -1))
    assert g.evaluate(SUP2, vec(1, 2, 3, 4)) == -2
    assert GroundFunctional((2, 3), (1, -1)).evaluate(SUP2, vec(1, 2, 3, 4)) == 1
    assert GroundFunctional((1, 4), (1,)).evaluate(SCALAR, vec(1, -1, 1, -1)) == 0
    assert g.span(SUP2) == (1, 4)
    assert GroundFunctional((1, 4), (0, 1)).span(SUP2) == (2, 4)


def test_ground_functional_rejects_bad_interval():
    with pytest.raises(ValueError):
        GroundFunctional((3, 2), (1,))


# ----------------- lift -----------------

def test_lift_example():
    y = lift_isometric(SUP2, (1, -1), (1, 2))
    assert y == vec(1, -1)
    assert ground_norm(SUP2, y) == 1


def test_lift_zero_and_scaled():
    assert ground_norm(SUP2, lift_isometric(SUP2, (0, 0))) == 0
    y = lift_isometric(SUP2, (2, 0), (3, 6))
    assert ground_norm(SUP2, y) == 2 == z_norm(SUP2, (2, 0))


@pytest.mark.parametrize("reps", [(2, 1), (1,), (3, 2)])
def test_lift_rejects_bad_representatives(reps):
    with pytest.raises(RepresentativeError):
        lift_isometric(SUP2, (1, -1), reps)


def test_default_representatives_are_interlaced():
    assert default_representatives(SUP2) == (1, 2)
    assert default_representatives(SUP2, after=2) == (3, 4)
    assert default_representatives(SUP2, after=3) == (5, 6)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10**6), st.sampled_from([2, 3]))
def test_lift_is_isometric_on_random_spaces(seed, dim):
    rng = np.random.default_rng(seed)
    space = random_space(dim, rng)
    z = random_unit_vector(space, rng)
    x = lift_isometric(space, z, default_representatives(space, after=int(rng.integers(0, 10))))
    assert ground_norm(space, x) == z_norm(space, z) == 1
    assert quotient_apply(space, x) == z


# ----------------- Z_X oracle norm -----------------

def test_zx_norm_single_index():
    assert zx_norm(sup_norm_oracle, [(3, -4)], (1,)) == sup_norm_oracle((3, -4))


def test_zx_norm_equal_images():
    u = (1, 0)
    assert zx_norm(sup_norm_oracle, [u, u], (1, -1)) == sup_norm_oracle(u)


def test_zx_norm_sup3_basis():
    basis = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    assert zx_norm(sup_norm_oracle, basis, (1, 1, 1)).hi == 1


def test_zx_norm_with_norming_set_oracle():
    oracle = norming_set_oracle(L1_2.norming_set)
    e = zx_norm(oracle, [(1, 0), (0, 1)], (1, -1))
    assert e.lo == e.hi == 2


def test_zx_norm_zero_and_mismatch():
    assert zx_norm(sup_norm_oracle, [(1,)], (0,)).hi == 0
    with pytest.raises(DimensionError):
        zx_norm(sup_norm_oracle, [(1,)], (1, 1))


def test_vector_sum():
    assert vector_sum([FiniteVector.unit(1), FiniteVector.unit(1), FiniteVector.unit(2, -1)]) == vec(2, -1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3), st.lists(st.integers(-4, 4), min_size=1, max_size=8))
def test_ground_functional_bounded_by_ground_norm(seed, dim, values):
    rng = np.random.default_rng(seed)
    space = random_space(dim, rng)
    x = FiniteVector.from_sequence(values)
    F = space.norming_set
    f1, f2 = F[int(rng.integers(0, len(F)))], F[int(rng.integers(0, len(F)))]
    t = Fraction(int(rng.integers(0, 5)), 4)
    coeffs = tuple(t * a + (1 - t) * b for a, b in zip(f1, f2))
    a = int(rng.integers(1, len(values) + 1))
    g = GroundFunctional((a, int(rng.integers(a, len(values) + 1))), coeffs)
    g.validate(space)
    assert abs(g.evaluate(space, x)) <= ground_norm(space, x) <= x.l1()
