import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuzzyplan.algebra import TNorm
from fuzzyplan.errors import GroundingError
from fuzzyplan.grounding import (
    AggregationPolicy,
    CalibrationTable,
    Grounder,
    LlmConfig,
    LlmOracle,
    OracleRule,
    RuleCondition,
    RuleOracle,
    TableOracle,
    VaguePredicate,
    aggregate,
    calibrate,
    combine_predicates,
    parse_score,
    render_prompt,
    state_summary,
)
from fuzzyplan.world import Action, State

PRED = VaguePredicate(id="suitable", rubric="how suitable the substitute is")
ACTION = Action(id="swap", graded_predicates=("suitable",))
STATE = State(resources={"flour": 2.0}, facts=frozenset({"dietary_vegan"}))


def make_grounder(oracle, k=5, seed=0, **kwargs):
    return Grounder({PRED.id: PRED}, oracle, AggregationPolicy(k=k), seed=seed, **kwargs)


class TestAggregate:
    def test_median_of_three(self):
        assert aggregate([0.2, 0.9, 0.5]) == 0.5

    def test_singleton(self):
        assert aggregate([0.7]) == 0.7

    def test_outliers_do_not_move_median(self):
        assert aggregate([0.0, 0.6, 0.6, 0.6, 1.0]) == 0.6

    def test_even_length_midpoint(self):
        assert aggregate([0.2, 0.4]) == pytest.approx(0.3)

    def test_empty_is_error(self):
        with pytest.raises(GroundingError):
            aggregate([])

    @given(st.lists(st.floats(min_value=0, max_value=1, allow_nan=False), min_size=1, max_size=9))
    def test_permutation_invariant(self, samples):
        assert aggregate(samples) == aggregate(sorted(samples, reverse=True))

    @given(st.lists(st.floats(min_value=0, max_value=1, allow_nan=False), min_size=5, max_size=5),
           st.integers(min_value=0, max_value=4), st.sampled_from([0.0, 1.0]))
    def test_single_corruption_bounded_by_adjacent_order_stats(self, samples, idx, extreme):
        clean = aggregate(samples)
        corrupted = list(samples)
        corrupted[idx] = extreme
        moved = aggregate(corrupted)
        order = sorted(samples)
        # median can shift at most to a neighbouring order statistic
        lo, hi = order[1], order[3]
        assert lo <= moved <= hi or moved == clean


class TestCombinePredicates:
    def test_lukasiewicz_pair(self):
        assert combine_predicates(TNorm.LUKASIEWICZ, [0.9, 0.9]) == 0.8

    def test_empty_is_one(self):
        for kind in TNorm:
            assert combine_predicates(kind, []) == 1.0

    def test_godel(self):
        assert combine_predicates(TNorm.GODEL, [0.7, 0.5]) == 0.5


class TestTableOracle:
    def test_constant_lookup(self):
        oracle = TableOracle({("suitable", "swap"): 0.8})
        grounder = make_grounder(oracle, k=5)
        assert grounder.ground(PRED, STATE, ACTION) == 0.8

    def test_missing_key_default_with_warning(self, caplog):
        oracle = TableOracle({}, default=0.25)
        with caplog.at_level("WARNING"):
            value = oracle.sample(PRED, STATE, ACTION, seed=0)
        assert value == 0.25
        assert "missing entry" in caplog.text

    def test_missing_key_strict_mode(self):
        oracle = TableOracle({}, strict=True)
        with pytest.raises(GroundingError):
            oracle.sample(PRED, STATE, ACTION, seed=0)

    def test_same_seed_same_samples(self):
        oracle = TableOracle({("suitable", "swap"): 0.5}, noise_std=0.2, seed=7)
        a = [oracle.sample(PRED, STATE, ACTION, seed=i) for i in range(5)]
        b = [oracle.sample(PRED, STATE, ACTION, seed=i) for i in range(5)]
        assert a == b

    def test_noise_clamped_to_unit_interval(self):
        oracle = TableOracle({("suitable", "swap"): 0.95}, noise_std=3.0, seed=1)
        for i in range(50):
            assert 0.0 <= oracle.sample(PRED, STATE, ACTION, seed=i) <= 1.0

    def test_out_of_range_table_rejected(self):
        with pytest.raises(ValueError):
            TableOracle({("p", "a"): 1.5})


class TestGrounderBehavior:
    def test_noise_free_is_independent_of_k(self):
        oracle = TableOracle({("suitable", "swap"): 0.8})
        for k in (1, 3, 5, 9):
            assert make_grounder(oracle, k=k).ground(PRED, STATE, ACTION) == 0.8

    def test_k_one_equals_single_sample(self):
        oracle = TableOracle({("suitable", "swap"): 0.5}, noise_std=0.1, seed=3)
        grounder = make_grounder(oracle, k=1, seed=11)
        from fuzzyplan.grounding import derive_seed

        expected = oracle.sample(
            PRED, STATE, ACTION,
            derive_seed(11, 0, PRED.id, ACTION.id, STATE.digest()),
        )
        assert grounder.ground(PRED, STATE, ACTION) == expected

    def test_median_of_known_samples(self):
        class Scripted(TableOracle):
            def __init__(self):
                super().__init__({})
                self.values = iter([0.4, 0.9, 0.5, 0.5, 0.6])

            def sample(self, predicate, state, action, seed):
                return next(self.values)

        grounder = make_grounder(Scripted(), k=5)
        assert grounder.ground(PRED, STATE, ACTION) == 0.5

    def test_cache_hits_per_state_digest(self):
        calls = []

        class Counting(TableOracle):
            def __init__(self):
                super().__init__({("suitable", "swap"): 0.8})

            def sample(self, predicate, state, action, seed):
                calls.append(seed)
                return super().sample(predicate, state, action, seed)

        grounder = make_grounder(Counting(), k=5)
        grounder.ground(PRED, STATE, ACTION)
        grounder.ground(PRED, STATE, ACTION)
        assert len(calls) == 5

    def test_out_of_range_oracle_output_clamped(self, caplog):
        class Wild(TableOracle):
            def __init__(self):
                super().__init__({})

            def sample(self, predicate, state, action, seed):
                return 1.7

        grounder = make_grounder(Wild(), k=1)
        with caplog.at_level("WARNING"):
            assert grounder.ground(PRED, STATE, ACTION) == 1.0
        assert "out-of-range" in caplog.text

    def test_non_finite_oracle_output_clamped(self):
        class Wild(TableOracle):
            def __init__(self):
                super().__init__({})

            def sample(self, predicate, state, action, seed):
                return math.nan

        grounder = make_grounder(Wild(), k=1)
        assert grounder.ground(PRED, STATE, ACTION) == 0.5

    def test_action_mu_combines_predicates(self):
        other = VaguePredicate(id="fresh", rubric="")
        action = Action(id="swap", graded_predicates=("suitable", "fresh"))
        oracle = TableOracle({("suitable", "swap"): 0.9, ("fresh", "swap"): 0.9})
        grounder = Grounder(
            {"suitable": PRED, "fresh": other},
            oracle,
            AggregationPolicy(k=1),
            tnorm_kind=TNorm.LUKASIEWICZ,
        )
        assert grounder.action_mu(STATE, action) == 0.8

    def test_unknown_predicate_raises_with_context(self):
        grounder = Grounder({}, TableOracle({}), AggregationPolicy(k=1))
        with pytest.raises(GroundingError) as exc:
            grounder.ground_by_id("nope", STATE, ACTION)
        assert exc.value.predicate_id == "nope"

    def test_calibration_table_overrides_elicited(self):
        oracle = TableOracle({("suitable", "swap"): 0.9})
        table = CalibrationTable()
        calibrate(table, ("suitable", "swap"), 0.9, 0.3)
        grounder = make_grounder(oracle, k=1, calibration=table)
        assert grounder.ground(PRED, STATE, ACTION) == 0.75


class TestRuleOracle:
    def test_first_match_wins(self):
        rules = [
            OracleRule(RuleCondition(facts_present=frozenset({"dietary_vegan"}),
                                     action_adds=frozenset({"butter"})), 0.1),
            OracleRule(RuleCondition(), 0.9),
        ]
        oracle = RuleOracle(rules)
        adds_butter = Action(id="swap", add_facts=frozenset({"butter"}),
                             graded_predicates=("suitable",))
        assert oracle.sample(PRED, STATE, adds_butter, 0) == 0.1
        assert oracle.sample(PRED, STATE, ACTION, 0) == 0.9

    def test_no_match_default(self):
        oracle = RuleOracle([OracleRule(RuleCondition(action_is="other"), 0.2)])
        assert oracle.sample(PRED, STATE, ACTION, 0) == 0.5

    def test_predicate_filter(self):
        oracle = RuleOracle([OracleRule(RuleCondition(), 0.3, predicate="other")])
        assert oracle.sample(PRED, STATE, ACTION, 0) == 0.5

    def test_resource_condition(self):
        rule = OracleRule(RuleCondition(resource_at_least={"flour": 1.0}), 0.8)
        assert RuleOracle([rule]).sample(PRED, STATE, ACTION, 0) == 0.8
        broke = State(resources={"flour": 0.0}, facts=frozenset())
        assert RuleOracle([rule]).sample(PRED, broke, ACTION, 0) == 0.5


class TestCalibration:
    def test_pull_down_is_bounded(self):
        table = CalibrationTable()
        assert calibrate(table, ("p", "a"), 0.9, 0.3) == pytest.approx(0.75)

    def test_fixed_point(self):
        table = CalibrationTable()
        assert calibrate(table, ("p", "a"), 0.5, 0.5) == 0.5

    def test_small_step_within_bound(self):
        table = CalibrationTable()
        assert calibrate(table, ("p", "a"), 0.2, 0.3) == pytest.approx(0.23)

    def test_counts_accumulate(self):
        table = CalibrationTable()
        calibrate(table, ("p", "a"), 0.9, 0.3)
        calibrate(table, ("p", "a"), 0.75, 0.3)
        assert table.entries[("p", "a")].count == 2

    @given(st.floats(min_value=0, max_value=1, allow_nan=False),
           st.floats(min_value=0, max_value=1, allow_nan=False))
    def test_never_moves_more_than_delta_and_stays_in_unit(self, elicited, observed):
        table = CalibrationTable()
        new = calibrate(table, ("p", "a"), elicited, observed)
        assert abs(new - elicited) <= 0.15 + 1e-12
        assert 0.0 <= new <= 1.0


class _FakeResponse:
    def __init__(self, content, status=200):
        self._content = content
        self.status_code = status

    def raise_for_status(self):
        if self.status_code >= 400:
            raise RuntimeError(f"HTTP {self.status_code}")

    def json(self):
        return {"choices": [{"message": {"content": self._content}}]}


def _transport(replies):
    replies = iter(replies)

    def post(url, json=None, headers=None, timeout=None):
        item = next(replies)
        if isinstance(item, Exception):
            raise item
        return _FakeResponse(item)

    return post


class TestLlmOracle:
    CONFIG = LlmConfig(endpoint="http://oracle.test/v1/chat", model="m", backoff=0.0)

    def test_parse_and_normalize(self):
        oracle = LlmOracle(self.CONFIG, transport=_transport(["Score: 85"]))
        assert oracle.sample(PRED, STATE, ACTION, 0) == 0.85

    def test_clamps_out_of_scale_with_warning(self, caplog):
        oracle = LlmOracle(self.CONFIG, transport=_transport(["120"]))
        with caplog.at_level("WARNING"):
            assert oracle.sample(PRED, STATE, ACTION, 0) == 1.0

    def test_reask_then_error_on_unparseable(self):
        oracle = LlmOracle(self.CONFIG, transport=_transport(["unsuitable", "still no"]))
        with pytest.raises(GroundingError):
            oracle.sample(PRED, STATE, ACTION, 0)

    def test_reask_recovers(self):
        oracle = LlmOracle(self.CONFIG, transport=_transport(["no number here", "42"]))
        assert oracle.sample(PRED, STATE, ACTION, 0) == 0.42

    def test_retries_network_errors(self):
        replies = [ConnectionError("down"), ConnectionError("down"), "70"]
        oracle = LlmOracle(self.CONFIG, transport=_transport(replies))
        assert oracle.sample(PRED, STATE, ACTION, 0) == 0.70

    def test_exhausted_retries_raise(self):
        replies = [ConnectionError("down")] * 3
        oracle = LlmOracle(self.CONFIG, transport=_transport(replies))
        with pytest.raises(GroundingError):
            oracle.sample(PRED, STATE, ACTION, 0)

    def test_prompt_carries_rubric_anchors(self):
        prompt = render_prompt(PRED, STATE, ACTION)
        assert "0 = completely unsuitable" in prompt
        assert "50 = marginal" in prompt
        assert "100 = perfect" in prompt
        assert PRED.rubric in prompt

    def test_config_from_env(self):
        env = {
            "FCP_LLM_ENDPOINT": "http://x/v1",
            "FCP_LLM_API_KEY": "k",
            "FCP_LLM_MODEL": "m",
            "FCP_LLM_TEMPERATURE": "0.3",
        }
        config = LlmConfig.from_env(env)
        assert config.endpoint == "http://x/v1"
        assert config.temperature == 0.3

    def test_temperature_defaults(self):
        config = LlmConfig.from_env({"FCP_LLM_ENDPOINT": "http://x"})
        assert config.temperature == 0.7

    def test_missing_endpoint_errors(self):
        with pytest.raises(GroundingError):
            LlmConfig.from_env({})

    def test_parse_score_variants(self):
        assert parse_score("I'd say 73 out of 100") == 0.73
        assert parse_score("perfect") is None


def test_state_summary_is_canonical():
    text = state_summary(STATE)
    assert "flour=2" in text
    assert "dietary_vegan" in text
