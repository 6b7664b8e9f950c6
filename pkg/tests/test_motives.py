"""Classes in Z[L], their closed forms, and the finite-field counts."""

import pytest
from hypothesis import given, settings, strategies as st

from bianchix.exprs import AlgebraError
from bianchix.motives import (
    CLASS_TABLE,
    CountSpec,
    L,
    LOCI,
    LPoly,
    affine_cone,
    c2n_closed,
    c2n_rec,
    complement_c2,
    complement_c2_h,
    count_points,
    proj_cone,
    proj_space,
    quadric_class,
    split_form_check,
    sqrt_minus_one,
    union_class,
)


# ---------------------------------------------------------------------------
# polynomial ring
# ---------------------------------------------------------------------------

def test_lpoly_arithmetic():
    assert (L - 1) * (L + 1) == L * L - 1
    assert (L + 1) ** 2 == L * L + 2 * L + 1
    assert L ** 0 == LPoly.one()
    assert 2 - L == -(L - 2)
    assert (L - L).is_zero()
    assert LPoly.zero().degree() == -1
    assert ((L + 1) ** 3).degree() == 3


def test_lpoly_eval_and_coeffs():
    p = LPoly.L(3) - 2 * L + 1
    assert p.eval_at(5) == 125 - 10 + 1
    assert p.coeffs() == {3: 1, 1: -2, 0: 1}


def test_lpoly_render():
    assert (LPoly.L(2) - 1).render() == "L^2 - 1"
    assert LPoly.one().render() == "1"
    assert LPoly.zero().render() == "0"
    assert L.render() == "L"
    assert (2 * LPoly.L(4) + 3 * L).render() == "2*L^4 + 3*L"


def test_lpoly_validation():
    with pytest.raises(AlgebraError):
        LPoly({-1: 1})
    with pytest.raises(AlgebraError):
        LPoly({0: 1.5})
    with pytest.raises(AlgebraError):
        L ** -1
    with pytest.raises(TypeError):
        L + 0.5


@given(st.integers(2, 200), st.integers(1, 32))
@settings(max_examples=40, deadline=None)
def test_lpoly_evaluation_is_a_ring_map(q, n):
    a = proj_space(n)
    b = c2n_closed((n % 8) + 1)
    assert (a * b).eval_at(q) == a.eval_at(q) * b.eval_at(q)
    assert (a + b).eval_at(q) == a.eval_at(q) + b.eval_at(q)


# ---------------------------------------------------------------------------
# class formulas
# ---------------------------------------------------------------------------

def test_projective_space_and_cones():
    assert proj_space(2) == 1 + L + L * L
    assert quadric_class(1) == 1 + 2 * L + L * L
    assert affine_cone(quadric_class(1)) == LPoly.L(3) + LPoly.L(2) - L
    assert proj_cone(quadric_class(1)) == \
        LPoly.L(3) + 2 * LPoly.L(2) + L + 1
    with pytest.raises(AlgebraError):
        proj_space(-1)
    with pytest.raises(AlgebraError):
        quadric_class(0)


def test_affine_quadric_complement_base_case():
    assert c2n_closed(1) == LPoly.L(4) - LPoly.L(3) - LPoly.L(2) + L


def test_recursion_matches_closed_form():
    for n in range(1, 65):
        assert c2n_rec(n) == c2n_closed(n)


def test_closed_form_factors():
    for n in range(1, 33):
        assert c2n_closed(n) == \
            LPoly.L(n) * (L - 1) * (LPoly.L(n + 1) - 1)


def test_complement_classes_factor():
    for n in range(1, 33):
        z = quadric_class(n)
        assert complement_c2(z, n) == LPoly.L(2) * c2n_closed(n)
        assert complement_c2(z, n) == \
            LPoly.L(n + 2) * (L - 1) * (LPoly.L(n + 1) - 1)
        assert complement_c2_h(z, n) == \
            LPoly.L(n + 1) * (L - 1) * (L - 2) * (LPoly.L(n + 1) - 1)


def test_union_and_complement_close_up():
    for n in range(1, 33):
        z = quadric_class(n)
        assert complement_c2_h(z, n) + union_class(z, n) == LPoly.L(2 * n + 4)


def test_class_table_matches_factored_strings():
    for name, poly, factored in CLASS_TABLE:
        assert name in LOCI
        assert isinstance(poly(2), LPoly)
        assert isinstance(factored(2), str)


# ---------------------------------------------------------------------------
# finite-field counts
# ---------------------------------------------------------------------------

def test_count_spec_validation():
    CountSpec(1, 5, (1, 2, 1, 3), "quadric-complement-affine")
    with pytest.raises(AlgebraError, match=">= 1"):
        CountSpec(0, 5, (1, 1, 1, 1), "quadric-complement-affine")
    with pytest.raises(AlgebraError, match="prime"):
        CountSpec(1, 9, (1, 1, 1, 1), "quadric-complement-affine")
    with pytest.raises(AlgebraError, match="1 mod 4"):
        CountSpec(1, 7, (1, 1, 1, 1), "quadric-complement-affine")
    with pytest.raises(AlgebraError, match="nonzero"):
        CountSpec(1, 5, (5, 1, 1, 1), "quadric-complement-affine")
    with pytest.raises(AlgebraError, match="four entries"):
        CountSpec(1, 5, (1, 1, 1), "quadric-complement-affine")
    with pytest.raises(AlgebraError, match="locus"):
        CountSpec(1, 5, (1, 1, 1, 1), "quadric")
    with pytest.raises(AlgebraError, match="exceeds"):
        CountSpec(3, 13, (1, 1, 1, 1), "quadric-complement-affine")


def test_frozen_count_values():
    spec = CountSpec(1, 5, (1, 2, 1, 3), "quadric-complement-affine")
    assert count_points(spec) == 480
    spec13 = CountSpec(1, 13, (1, 1, 1, 1), "quadric-complement-affine")
    assert count_points(spec13) == 26208
    hyp = CountSpec(1, 5, (1, 1, 1, 1), "cone2-complement-minus-hyperplanes")
    assert count_points(hyp) == 7200


@pytest.mark.parametrize("q", [5, 13])
@pytest.mark.parametrize("w", [(1, 1, 1, 1), (1, 2, 1, 3)])
@pytest.mark.parametrize("locus", LOCI)
def test_counts_match_class_polynomials(q, w, locus):
    spec = CountSpec(1, q, w, locus)
    assert count_points(spec) == spec.class_poly().eval_at(q)


def test_projective_count_example():
    spec = CountSpec(1, 5, (1, 1, 1, 1), "quadric-projective")
    assert count_points(spec) == 36
    assert quadric_class(1).eval_at(5) == 36


def test_counts_are_weight_independent():
    """The count realizes the class, which does not depend on the nonzero
    weights; spot-check a third weight vector."""
    for locus in LOCI:
        a = count_points(CountSpec(1, 5, (2, 3, 4, 1), locus))
        b = count_points(CountSpec(1, 5, (1, 1, 1, 1), locus))
        assert a == b


# ---------------------------------------------------------------------------
# split form
# ---------------------------------------------------------------------------

def test_sqrt_minus_one():
    for q in (5, 13, 17, 29):
        r = sqrt_minus_one(q)
        assert 0 < r < q
        assert (r * r) % q == q - 1
    with pytest.raises(AlgebraError):
        sqrt_minus_one(7)


def test_split_form_identity():
    assert split_form_check(5, (1, 2, 1, 3))
    assert split_form_check(13, (1, 1, 1, 1))
    assert split_form_check(29, (7, 11, 2, 28))


def test_split_form_validation():
    with pytest.raises(AlgebraError):
        split_form_check(7, (1, 1, 1, 1))
    with pytest.raises(AlgebraError):
        split_form_check(6, (1, 1, 1, 1))
    with pytest.raises(AlgebraError):
        split_form_check(5, (5, 1, 1, 1))
