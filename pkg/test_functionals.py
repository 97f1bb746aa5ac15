from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.config import TailRule, WeightConfig
from core.errors import NotWeightedError, ParseError, PreconditionError, TreeValidationError, UnsupportedError
from core.functionals import (
    ZERO,
    Convex,
    ConvexTerm,
    GroundLeaf,
    TreeShape,
    Weighted,
    apply_coefficients,
    check_lemma_finitesupport,
    check_lemma_smallweight,
    coefficients,
    combine_orthogonal,
    convex,
    evaluate,
    expanded_size,
    iter_nodes,
    leaf,
    lemma_finitesupport_index,
    masked_coefficients,
    node_at,
    random_tree,
    random_weighted_tree,
    split_at,
    sup_norm,
    terminal_nodes,
    tree_from_json,
    tree_to_json,
    tree_to_shared_json,
    validate,
    weight_of,
    weighted_ancestors,
)
from core.ground import FiniteVector, scalar_space, sup_norm_space

CFG_A = WeightConfig((2, 4, 8, 16), (4, 8, 16, 32))
CFG_Q = WeightConfig((60, 120, 240, 480), (8, 16, 32, 64), TailRule.DOUBLING)
SCALAR = scalar_space()


def singletons(*ks, coeff=1):
    return tuple(leaf((k, k), (coeff,)) for k in ks)


def ones(n):
    return FiniteVector.from_sequence([1] * n)


# ----------------- evaluation -----------------

def test_weighted_over_singletons():
    w = Weighted(1, singletons(1, 2, 3, 4))
    assert evaluate(CFG_A, SCALAR, w, ones(4)) == 2
    assert evaluate(CFG_A, SCALAR, convex((1, w)), ones(4)) == 2


def test_ground_leaf_telescopes():
    g = leaf((1, 4), (1,))
    assert evaluate(CFG_A, SCALAR, g, FiniteVector.from_sequence([1, -1, 1, -1])) == 0


def test_zero_functional():
    assert evaluate(CFG_A, SCALAR, ZERO, ones(3)) == 0
    assert coefficients(CFG_A, SCALAR, ZERO) == {}


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**6), st.lists(st.integers(-3, 3), min_size=10, max_size=10),
       st.lists(st.integers(-3, 3), min_size=10, max_size=10))
def test_evaluate_is_linear_and_matches_coefficients(seed, a, b):
    f = random_tree(CFG_A, SCALAR, seed=seed, width=10)
    x, y = FiniteVector.from_sequence(a), FiniteVector.from_sequence(b)
    assert evaluate(CFG_A, SCALAR, f, x + y) == evaluate(CFG_A, SCALAR, f, x) + evaluate(CFG_A, SCALAR, f, y)
    assert apply_coefficients(coefficients(CFG_A, SCALAR, f), x) == evaluate(CFG_A, SCALAR, f, x)


# ----------------- validation -----------------

def test_too_many_children():
    with pytest.raises(TreeValidationError) as exc:
        validate(CFG_A, SCALAR, Weighted(1, singletons(1, 2, 3, 4, 5)))
    assert exc.value.clause == "weighted children"
    assert exc.value.address == ()


def test_children_must_be_successive():
    w = Weighted(2, (leaf((1, 2), (1,)), leaf((2, 3), (1,))))
    with pytest.raises(TreeValidationError) as exc:
        validate(CFG_A, SCALAR, w)
    assert exc.value.clause == "successive children"
    assert exc.value.address == (2,)


def test_nested_error_address():
    bad = Weighted(1, singletons(1, 2, 3, 4, 5))
    f = convex((Fraction(1, 2), Weighted(2, (convex((1, bad)),))))
    with pytest.raises(TreeValidationError) as exc:
        validate(CFG_A, SCALAR, f)
    assert exc.value.address == (2, 1, 1)
    assert "2.1.1" in str(exc.value)


@pytest.mark.parametrize(
    "f, clause",
    [
        (convex((1, Weighted(1, singletons(1))), (1, Weighted(2, singletons(2)))), "l2 coefficients"),
        (Convex((ConvexTerm(Fraction(1, 2), Weighted(1, singletons(1))),
                 ConvexTerm(Fraction(1, 2), Weighted(1, singletons(2))))), "one term per weight"),
        (convex((-1, Weighted(1, singletons(1)))), "nonnegative coefficient"),
        (Weighted(1, (Weighted(2, singletons(1)),)), "nesting"),
        (Weighted(5, singletons(1)), "weight index"),
        (Weighted(1, ()), "weighted children"),
        (leaf((1, 1), (2,)), "ground functional"),
    ],
)
def test_validation_clauses(f, clause):
    with pytest.raises(TreeValidationError) as exc:
        validate(CFG_A, SCALAR, f)
    assert exc.value.clause == clause


def test_bare_weighted_is_not_a_member():
    with pytest.raises(TreeValidationError):
        validate(CFG_A, SCALAR, Weighted(1, singletons(1)), require_member=True)


def test_child_span_uses_live_classes():
    # a sup-norm leaf that only sees class 2 spans [2, 2]
    space = sup_norm_space(2)
    w = Weighted(1, (leaf((1, 2), (0, 1)), leaf((3, 3), (1, 0))))
    assert validate(CFG_A, space, w) is w


# ----------------- structure -----------------

def test_addresses():
    w1 = Weighted(1, singletons(1, 2))
    w3 = Weighted(3, singletons(3))
    f = convex((Fraction(3, 5), w1), (Fraction(4, 5), w3))
    addresses = [a for a, _ in terminal_nodes(f)]
    assert addresses == [(1, 1), (1, 2), (3, 1)]
    assert node_at(f, (3,)) is w3
    assert weighted_ancestors(f, (1, 2)) == [((1,), 1)]
    with pytest.raises(TreeValidationError):
        node_at(f, (2,))
    assert [a for a, _ in iter_nodes(f)][:2] == [(), (1,)]


def test_weight_of():
    w3 = Weighted(3, singletons(1))
    assert weight_of(CFG_A, w3).weights == (8,)
    f = convex((Fraction(1, 2), Weighted(1, singletons(1))), (Fraction(1, 2), Weighted(2, singletons(2))))
    desc = weight_of(CFG_A, f)
    assert desc.weights == (2, 4)
    assert not desc.is_weighted
    assert desc.to_dict()["weighted"] is False
    assert weight_of(CFG_Q, convex((1, Weighted(5, singletons(1))))).weights == (960,)
    with pytest.raises(NotWeightedError):
        weight_of(CFG_A, leaf((1, 1), (1,)))


def test_split_at():
    f = convex(
        (Fraction(1, 2), Weighted(1, singletons(1))),
        (Fraction(1, 2), Weighted(2, singletons(2))),
        (Fraction(1, 2), Weighted(5, singletons(3))),
    )
    low, high = split_at(f, 2)
    assert low.indices() == [1, 2]
    assert high.indices() == [5]
    low0, high0 = split_at(f, 0)
    assert low0.indices() == []
    assert high0.indices() == [1, 2, 5]


def test_sup_norm_examples():
    assert sup_norm(CFG_A, SCALAR, leaf((1, 7), (1,))) == 1
    assert sup_norm(CFG_A, SCALAR, Weighted(3, singletons(1, 2))) == Fraction(1, 8)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_sup_norm_matches_unit_vectors(seed):
    f = random_tree(CFG_A, SCALAR, seed=seed, width=8)
    brute = max(abs(evaluate(CFG_A, SCALAR, f, FiniteVector.unit(k))) for k in range(1, 9))
    assert sup_norm(CFG_A, SCALAR, f) == brute


def test_masked_coefficients_partition_sum():
    f = random_tree(CFG_A, SCALAR, seed=7, width=10)
    leaves = [a for a, _ in terminal_nodes(f)]
    half = set(leaves[::2])
    rest = set(leaves) - half
    x = FiniteVector.from_sequence([1, -2, 3, -1, 2, 1, -3, 1, 1, 2])
    total = apply_coefficients(masked_coefficients(CFG_A, SCALAR, f, half), x) + apply_coefficients(
        masked_coefficients(CFG_A, SCALAR, f, rest), x
    )
    assert total == evaluate(CFG_A, SCALAR, f, x)


# ----------------- combination -----------------

def test_combine_orthogonal():
    psi = Weighted(1, singletons(1))
    phi = Weighted(2, singletons(2))
    f = combine_orthogonal(CFG_A, SCALAR, psi, phi, Fraction(7, 10))
    assert [t.lam for t in f.terms] == [Fraction(7, 10), Fraction(7, 10)]
    assert sum(t.lam ** 2 for t in f.terms) == Fraction(98, 100)


def test_combine_orthogonal_rejects():
    psi = Weighted(1, singletons(1))
    with pytest.raises(PreconditionError):
        combine_orthogonal(CFG_A, SCALAR, psi, Weighted(2, singletons(2)), Fraction(3, 4))
    with pytest.raises(PreconditionError):
        combine_orthogonal(CFG_A, SCALAR, psi, Weighted(1, singletons(2)), Fraction(1, 2))
    with pytest.raises(PreconditionError):
        combine_orthogonal(CFG_A, SCALAR, psi, leaf((2, 2), (1,)), Fraction(1, 2))


# ----------------- lemma checkers -----------------

def test_finitesupport_index_example():
    y = ones(4)
    i0, bound = lemma_finitesupport_index(CFG_Q, y, Fraction(1, 2))
    assert i0 == 1
    assert bound == 4 * CFG_Q.inverse_sum_after(1) == Fraction(1, 15)


def test_finitesupport_index_needs_tail_rule():
    with pytest.raises(UnsupportedError):
        lemma_finitesupport_index(CFG_A, ones(2), Fraction(1, 2))


def test_finitesupport_check_passes():
    f = random_tree(CFG_Q, SCALAR, seed=3, width=12, strict_alternation=True)
    result = check_lemma_finitesupport(CFG_Q, SCALAR, f, ones(4), Fraction(1, 2))
    assert result.passed
    assert result.details["i0"] == 1


def test_finitesupport_no_high_terms():
    f = convex((1, Weighted(1, singletons(1, 2))))
    result = check_lemma_finitesupport(CFG_Q, SCALAR, f, ones(2), Fraction(1, 100))
    assert result.passed
    assert result.details["tail_value"] == 0


def test_smallweight_example():
    f = convex((1, Weighted(1, (leaf((9, 16), (1,)),))))
    blocks = [FiniteVector.unit(k) for k in range(9, 17)]
    result = check_lemma_smallweight(CFG_A, SCALAR, f, blocks, j=2)
    assert result.passed
    assert result.details["value"] == Fraction(1, 2)
    assert result.details["bound"] == Fraction(3, 2)


def test_smallweight_preconditions():
    f = convex((1, Weighted(2, singletons(1))))
    blocks = [FiniteVector.unit(k) for k in range(1, 5)]
    with pytest.raises(PreconditionError):
        check_lemma_smallweight(CFG_A, SCALAR, f, blocks, j=1)
    with pytest.raises(PreconditionError):
        check_lemma_smallweight(CFG_A, SCALAR, f, blocks, j=3)
    doubled = [FiniteVector.unit(k, 2) for k in range(1, 17)]
    with pytest.raises(PreconditionError):
        check_lemma_smallweight(CFG_A, SCALAR, f, doubled, j=3)


# ----------------- random trees -----------------

def test_random_tree_is_reproducible():
    a = random_tree(CFG_A, SCALAR, seed=11)
    b = random_tree(CFG_A, SCALAR, seed=11)
    assert tree_to_json(a) == tree_to_json(b)


@pytest.mark.parametrize("seed", range(10))
def test_min_terminal_depth_shape(seed):
    f = random_tree(CFG_Q, SCALAR, TreeShape("min_terminal_depth", 2), seed=seed)
    assert all(len(a) >= 2 for a, _ in terminal_nodes(f))


@pytest.mark.parametrize("seed", range(10))
def test_weight_floor_shape(seed):
    f = random_tree(CFG_Q, SCALAR, TreeShape("weight_floor", 2), seed=seed)
    for address, _ in terminal_nodes(f):
        assert any(j >= 2 for _, j in weighted_ancestors(f, address))


def test_strict_alternation_root_is_convex():
    for seed in range(10):
        assert isinstance(random_tree(CFG_A, SCALAR, seed=seed, strict_alternation=True), Convex)


def test_random_weighted_tree():
    w = random_weighted_tree(CFG_A, SCALAR, 2, seed=5, width=20)
    assert isinstance(w, Weighted) and w.j == 2
    with pytest.raises(PreconditionError):
        random_weighted_tree(CFG_A, SCALAR, 9)


def test_random_tree_rejects_unknown_shape():
    with pytest.raises(PreconditionError):
        random_tree(CFG_A, SCALAR, TreeShape("spiral"))


# ----------------- serialization -----------------

def test_json_round_trip_preserves_values():
    f = random_tree(CFG_A, SCALAR, seed=21, width=10)
    x = FiniteVector.from_sequence([1, -1, 2, 0, 1, 3, -2, 1, 1, -1])
    g = tree_from_json(tree_to_json(f))
    assert evaluate(CFG_A, SCALAR, g, x) == evaluate(CFG_A, SCALAR, f, x)


def test_shared_json_keeps_sharing():
    shared = leaf((1, 1), (1,))
    f = convex((Fraction(1, 2), Weighted(1, (shared,))), (Fraction(1, 2), Weighted(2, (shared,))))
    doc = tree_to_shared_json(f)
    assert len(doc["nodes"]) == 4
    assert expanded_size(f) == 5
    g = tree_from_json(doc)
    assert g.terms[0].child.children[0] is g.terms[1].child.children[0]
    assert evaluate(CFG_A, SCALAR, g, ones(1)) == evaluate(CFG_A, SCALAR, f, ones(1))


@pytest.mark.parametrize(
    "doc",
    ["{not json", {"kind": "ground"}, {"kind": "triangle"}, {"kind": "convex", "terms": [{"lambda": "1", "child": {"kind": "ground", "E": [1, 1], "coeffs": ["1"]}}]}],
)
def test_tree_from_json_errors(doc):
    with pytest.raises(ParseError):
        tree_from_json(doc)


def test_ground_leaf_json_shape():
    assert tree_to_json(leaf((2, 5), ("1/2",))) == {"kind": "ground", "E": [2, 5], "coeffs": ["1/2"]}
    assert isinstance(tree_from_json({"kind": "ground", "E": [2, 5], "coeffs": ["1/2"]}), GroundLeaf)
