"""Graded-applicability planning under crisp feasibility.

Plan quality is composed from per-step membership degrees via a t-norm
(Łukasiewicz by default) while resource, logical, and temporal constraints
stay hard; plans are accepted only above an explicit quality threshold.
"""

from .acceptance import (
    AlphaPolicy,
    FailureReason,
    PlanResult,
    Segment,
    accept,
    adaptive_alpha,
    validate,
)
from .algebra import (
    Degree,
    TNorm,
    as_degree,
    lukasiewicz_closed_form,
    plan_membership,
    residuum,
    tnorm,
)
from .chunking import MacroAction, build_macros, macro_membership
from .domain_io import (
    Domain,
    Problem,
    import_preference_subset,
    parse_domain,
    parse_plan,
    parse_problem,
    serialize_plan,
)
from .errors import (
    DomainError,
    FuzzyPlanError,
    GroundingError,
    PlanValidationError,
    ProblemError,
    SearchLimitError,
    UnsupportedConstructError,
)
from .grounding import (
    AggregationPolicy,
    CalibrationTable,
    Grounder,
    LlmConfig,
    LlmOracle,
    MembershipOracle,
    OracleRule,
    RuleCondition,
    RuleOracle,
    TableOracle,
    VaguePredicate,
    aggregate,
    calibrate,
    combine_predicates,
    make_llm_oracle,
    make_rule_oracle,
    make_table_oracle,
)
from .pullback import MergeResult, pullback_compatible
from .search import (
    BackwardNode,
    DistanceWeights,
    ForwardNode,
    SearchConfig,
    backward_requirement,
    bidirectional_plan,
    brute_force_plan,
    distance,
    find_meet_candidates,
)
from .world import (
    Action,
    Condition,
    Goal,
    LogicalConstraints,
    State,
    TimeBudget,
    Violation,
    ViolationKind,
    apply,
    condition_from_goal,
    crisp_applicable,
    goal_satisfied,
    violates_hard,
)

__version__ = "0.1.0"
