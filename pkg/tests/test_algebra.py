import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzyplan.algebra import (
    TNorm,
    as_degree,
    lukasiewicz_closed_form,
    plan_membership,
    residuum,
    tnorm,
)

KINDS = [TNorm.LUKASIEWICZ, TNorm.GODEL, TNorm.PRODUCT]

# degrees drawn from the hundredths grid, matching the granularity the
# algebra is specified against
grid = st.integers(min_value=0, max_value=100).map(lambda i: i / 100.0)
kinds = st.sampled_from(KINDS)


class TestDegreeValidation:
    def test_accepts_bounds(self):
        assert as_degree(0.0) == 0.0
        assert as_degree(1.0) == 1.0
        assert as_degree(0.37) == 0.37

    @pytest.mark.parametrize("bad", [-0.01, 1.01, float("nan"), float("inf"), -math.inf])
    def test_rejects_out_of_range(self, bad):
        with pytest.raises(ValueError):
            as_degree(bad)

    def test_tnorm_rejects_invalid(self):
        with pytest.raises(ValueError):
            tnorm(TNorm.LUKASIEWICZ, 1.2, 0.5)
        with pytest.raises(ValueError):
            residuum(TNorm.LUKASIEWICZ, float("nan"), 0.5)


class TestTnormExamples:
    def test_lukasiewicz(self):
        assert tnorm(TNorm.LUKASIEWICZ, 0.8, 0.8) == 0.6

    def test_lukasiewicz_identity_any_x(self):
        for x in [0.0, 0.1, 0.123456789012345678, 0.5, 0.99, 1.0]:
            assert tnorm(TNorm.LUKASIEWICZ, 1.0, x) == x
            assert tnorm(TNorm.LUKASIEWICZ, x, 1.0) == x

    def test_godel_min(self):
        assert tnorm(TNorm.GODEL, 0.3, 0.9) == 0.3

    def test_product(self):
        assert tnorm(TNorm.PRODUCT, 0.5, 0.5) == 0.25


class TestResiduumExamples:
    def test_lukasiewicz_formula(self):
        assert residuum(TNorm.LUKASIEWICZ, 0.9, 0.8) == 0.9

    def test_top_absorbs(self):
        for a in [0.0, 0.3, 0.77, 1.0]:
            assert residuum(TNorm.LUKASIEWICZ, a, 1.0) == 1.0

    def test_a_below_b_gives_one(self):
        assert residuum(TNorm.LUKASIEWICZ, 0.3, 0.5) == 1.0
        assert residuum(TNorm.GODEL, 0.2, 0.2) == 1.0
        assert residuum(TNorm.PRODUCT, 0.4, 0.9) == 1.0

    def test_godel_product_forms(self):
        assert residuum(TNorm.GODEL, 0.9, 0.4) == 0.4
        assert residuum(TNorm.PRODUCT, 0.8, 0.4) == 0.5


class TestPlanMembership:
    def test_paper_worked_example_six_steps(self):
        assert plan_membership(TNorm.LUKASIEWICZ, [0.8] * 6) == 0.0

    def test_empty_composition_is_identity(self):
        for kind in KINDS:
            assert plan_membership(kind, []) == 1.0

    def test_godel_is_min(self):
        assert plan_membership(TNorm.GODEL, [0.9, 0.4, 0.7]) == 0.4

    def test_closed_form_examples(self):
        assert lukasiewicz_closed_form([0.8] * 6) == 0.0
        assert lukasiewicz_closed_form([1.0, 1.0, 1.0]) == 1.0
        assert lukasiewicz_closed_form([0.95, 0.9]) == 0.85
        assert lukasiewicz_closed_form([]) == 1.0


# --- algebraic laws -------------------------------------------------------


@given(kinds, grid, grid)
def test_commutativity(kind, a, b):
    assert tnorm(kind, a, b) == tnorm(kind, b, a)


@given(kinds, grid, grid, grid)
def test_associativity(kind, a, b, c):
    left = tnorm(kind, tnorm(kind, a, b), c)
    right = tnorm(kind, a, tnorm(kind, b, c))
    assert left == pytest.approx(right, abs=1e-12)


@given(kinds, grid)
def test_identity_and_annihilator(kind, a):
    assert tnorm(kind, 1.0, a) == a
    assert tnorm(kind, a, 1.0) == a
    assert tnorm(kind, 0.0, a) == 0.0
    assert tnorm(kind, a, 0.0) == 0.0


@given(kinds, grid, grid, grid)
def test_monotone_in_each_argument(kind, a, b, c):
    lo, hi = min(b, c), max(b, c)
    assert tnorm(kind, a, lo) <= tnorm(kind, a, hi)
    assert tnorm(kind, lo, a) <= tnorm(kind, hi, a)


@given(kinds, grid, grid, grid)
def test_galois_connection(kind, a, b, x):
    assert (tnorm(kind, a, x) <= b) == (x <= residuum(kind, a, b))


@given(grid, grid, grid)
def test_lukasiewicz_one_sided_sufficiency(a, b, x):
    if a > b and x >= residuum(TNorm.LUKASIEWICZ, a, b):
        assert tnorm(TNorm.LUKASIEWICZ, a, x) >= b


@given(grid)
def test_nilpotency(a):
    if a < 1.0:
        n = math.ceil(1.0 / (1.0 - a))
        assert plan_membership(TNorm.LUKASIEWICZ, [a] * n) == 0.0


@settings(max_examples=300)
@given(st.lists(st.floats(min_value=0.0, max_value=1.0, allow_nan=False), max_size=64))
def test_closed_form_matches_fold(degrees):
    fold = plan_membership(TNorm.LUKASIEWICZ, degrees)
    closed = lukasiewicz_closed_form(degrees)
    assert fold == pytest.approx(closed, abs=1e-12)


@given(kinds, st.lists(grid, max_size=10))
def test_membership_never_exceeds_min(kind, degrees):
    mu = plan_membership(kind, degrees)
    assert 0.0 <= mu <= 1.0
    if degrees:
        assert mu <= min(degrees)
