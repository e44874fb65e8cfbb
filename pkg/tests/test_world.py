import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuzzyplan.errors import DomainError
from fuzzyplan.world import (
    Action,
    Goal,
    LogicalConstraints,
    State,
    TimeBudget,
    ViolationKind,
    apply,
    crisp_applicable,
    goal_satisfied,
    violates_hard,
)


def make_state(resources=None, facts=(), logic=None, elapsed=0.0, budget=math.inf):
    return State(
        resources=dict(resources or {}),
        facts=frozenset(facts),
        logic=logic or LogicalConstraints(),
        time=TimeBudget(elapsed, budget),
    )


class TestApplicability:
    def test_resource_need_met(self):
        state = make_state({"flour": 2.0})
        action = Action(id="bake", resource_needs={"flour": 1.0})
        assert crisp_applicable(state, action)

    def test_resource_need_unmet(self):
        state = make_state({"flour": 0.5})
        action = Action(id="bake", resource_needs={"flour": 1.0})
        assert not crisp_applicable(state, action)

    def test_temporal_overrun(self):
        state = make_state({"flour": 1.0}, elapsed=55.0, budget=60.0)
        action = Action(id="bake", duration=10.0)
        assert not crisp_applicable(state, action)

    def test_required_and_forbidden_facts(self):
        state = make_state(facts={"dough"})
        assert crisp_applicable(state, Action(id="a", required_facts=frozenset({"dough"})))
        assert not crisp_applicable(state, Action(id="b", required_facts=frozenset({"oven"})))
        assert not crisp_applicable(state, Action(id="c", forbidden_facts=frozenset({"dough"})))

    def test_unknown_resource_is_domain_error(self):
        state = make_state({"flour": 1.0})
        with pytest.raises(DomainError):
            crisp_applicable(state, Action(id="a", resource_needs={"sugar": 1.0}))

    def test_post_state_violation_blocks(self):
        # enough flour for the need, but the delta would drive it negative
        state = make_state({"flour": 1.0})
        action = Action(id="a", resource_needs={"flour": 0.5}, resource_deltas={"flour": -2.0})
        assert not crisp_applicable(state, action)

    def test_post_state_forbidden_atom_blocks(self):
        logic = LogicalConstraints(forbidden=frozenset({"allergen"}))
        state = make_state(logic=logic)
        action = Action(id="a", add_facts=frozenset({"allergen"}))
        assert not crisp_applicable(state, action)


class TestApply:
    def test_resource_arithmetic(self):
        state = make_state({"flour": 2.0})
        nxt = apply(state, Action(id="a", resource_deltas={"flour": -1.0}))
        assert nxt.resources["flour"] == 1.0

    def test_delete_then_add(self):
        state = make_state(facts={"a"})
        nxt = apply(state, Action(id="x", required_facts=frozenset({"a"}),
                                  del_facts=frozenset({"a"}), add_facts=frozenset({"b"})))
        assert nxt.facts == frozenset({"b"})

    def test_elapsed_accumulates(self):
        state = make_state(elapsed=10.0, budget=100.0)
        nxt = apply(state, Action(id="a", duration=5.0))
        assert nxt.time.elapsed == 15.0

    def test_inapplicable_raises(self):
        state = make_state({"flour": 0.0})
        with pytest.raises(ValueError):
            apply(state, Action(id="a", resource_needs={"flour": 1.0}))

    def test_original_state_untouched(self):
        state = make_state({"flour": 2.0}, facts={"a"})
        apply(state, Action(id="x", resource_deltas={"flour": -1.0}, add_facts=frozenset({"b"})))
        assert state.resources["flour"] == 2.0
        assert state.facts == frozenset({"a"})


class TestViolations:
    def test_negative_resource(self):
        out = violates_hard(make_state({"flour": -0.1}))
        assert [v.kind for v in out] == [ViolationKind.RESOURCE]

    def test_forbidden_atom(self):
        logic = LogicalConstraints(forbidden=frozenset({"bad"}))
        out = violates_hard(make_state(facts={"bad"}, logic=logic))
        assert [v.kind for v in out] == [ViolationKind.LOGIC]

    def test_missing_invariant(self):
        logic = LogicalConstraints(required_invariant=frozenset({"safe"}))
        out = violates_hard(make_state(logic=logic))
        assert [v.kind for v in out] == [ViolationKind.LOGIC]

    def test_mutex(self):
        logic = LogicalConstraints(mutex=frozenset({("a", "b")}))
        out = violates_hard(make_state(facts={"a", "b"}, logic=logic))
        assert [v.kind for v in out] == [ViolationKind.LOGIC]

    def test_temporal(self):
        out = violates_hard(make_state(elapsed=61.0, budget=60.0))
        assert [v.kind for v in out] == [ViolationKind.TEMPORAL]

    def test_feasible_state_clean(self):
        assert violates_hard(make_state({"flour": 1.0}, facts={"x"})) == []


class TestGoal:
    def test_fact_goal(self):
        assert goal_satisfied(make_state(facts={"done"}), Goal(required_facts=frozenset({"done"})))

    def test_empty_goal_vacuous(self):
        assert goal_satisfied(make_state(), Goal())

    def test_deadline(self):
        goal = Goal(deadline=30.0)
        assert not goal_satisfied(make_state(elapsed=31.0), goal)
        assert goal_satisfied(make_state(elapsed=30.0), goal)

    def test_resource_min(self):
        goal = Goal(resource_mins={"flour": 1.0})
        assert not goal_satisfied(make_state({"flour": 0.5}), goal)
        assert goal_satisfied(make_state({"flour": 1.0}), goal)


class TestConstruction:
    def test_add_del_overlap_rejected(self):
        with pytest.raises(DomainError):
            Action(id="a", add_facts=frozenset({"x"}), del_facts=frozenset({"x"}))

    def test_negative_duration_rejected(self):
        with pytest.raises(DomainError):
            Action(id="a", duration=-1.0)

    def test_forbidden_invariant_overlap_rejected(self):
        with pytest.raises(DomainError):
            LogicalConstraints(forbidden=frozenset({"x"}), required_invariant=frozenset({"x"}))


# closure: any applicable action applied to a feasible state yields a
# feasible state

atoms = st.sampled_from(["a", "b", "c", "d", "e"])
fact_sets = st.frozensets(atoms, max_size=4)
quantities = st.floats(min_value=0.0, max_value=5.0, allow_nan=False)


@st.composite
def feasible_state(draw):
    resources = {"r1": draw(quantities), "r2": draw(quantities)}
    facts = draw(fact_sets)
    forbidden = draw(st.frozensets(atoms, max_size=2)) - facts
    logic = LogicalConstraints(forbidden=forbidden)
    budget = draw(st.floats(min_value=1.0, max_value=50.0))
    elapsed = draw(st.floats(min_value=0.0, max_value=budget))
    return State(resources=resources, facts=facts, logic=logic,
                 time=TimeBudget(elapsed, budget))


@st.composite
def random_action(draw):
    add = draw(fact_sets)
    delete = draw(fact_sets) - add
    return Action(
        id="act",
        resource_needs={"r1": draw(quantities)},
        resource_deltas={"r1": draw(st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)),
                         "r2": draw(st.floats(min_value=-5.0, max_value=5.0, allow_nan=False))},
        required_facts=draw(fact_sets),
        forbidden_facts=draw(fact_sets),
        add_facts=add,
        del_facts=delete,
        duration=draw(st.floats(min_value=0.0, max_value=10.0)),
    )


@given(feasible_state(), random_action())
def test_closure(state, action):
    if crisp_applicable(state, action):
        assert violates_hard(apply(state, action)) == []


@given(feasible_state(), random_action())
def test_apply_deterministic(state, action):
    if crisp_applicable(state, action):
        first = apply(state, action)
        second = apply(state, action)
        assert first == second
        assert first.digest() == second.digest()
