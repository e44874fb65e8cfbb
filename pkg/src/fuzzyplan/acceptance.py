"""Plan acceptance: threshold cuts, adaptive thresholds, and the validator.

A plan is accepted only when its composed membership reaches the quality
threshold (exact >= comparison, never tolerance-adjusted) and its replay
violates no hard constraint. ``validate`` is the single authority: it
replays the plan from the initial state, re-grounds every degree on the
concrete states, recomputes the plan membership, and checks the goal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

from .algebra import Degree, TNorm, plan_membership
from .chunking import MacroAction, macro_membership
from .errors import PlanValidationError
from .grounding import AggregationPolicy, Grounder, MembershipOracle
from .world import (
    State,
    Violation,
    ViolationKind,
    apply,
    crisp_applicable,
    goal_satisfied,
)


class FailureReason(str, Enum):
    FRONTIER_EXHAUSTED = "FrontierExhausted"
    DEPTH_BOUND = "DepthBound"
    BELOW_ALPHA = "BelowAlpha"
    HARD_VIOLATION = "HardViolation"


@dataclass(frozen=True)
class CriticalityPreset:
    name: str
    factor: float


CRITICALITY_PRESETS: Dict[str, CriticalityPreset] = {
    "casual": CriticalityPreset("casual", 0.8),
    "typical": CriticalityPreset("typical", 1.0),
    "important": CriticalityPreset("important", 1.15),
    "critical": CriticalityPreset("critical", 1.3),
}

ALPHA_MIN = 0.05
LENGTH_FREE = 4
LENGTH_SLOPE = 0.03
LENGTH_FLOOR = 0.5


def adaptive_alpha(
    alpha_base: Degree,
    criticality: Union[str, CriticalityPreset],
    plan_length: int,
    *,
    slope: float = LENGTH_SLOPE,
    free_length: int = LENGTH_FREE,
    floor: float = LENGTH_FLOOR,
    alpha_min: float = ALPHA_MIN,
) -> Degree:
    """alpha_base scaled by the criticality preset and a length discount.

    The length factor is 1 for plans of up to ``free_length`` steps, then
    decays linearly at ``slope`` per extra step down to ``floor``. The
    result is clamped to [alpha_min, 1]; a high-criticality threshold can
    therefore make every plan unacceptable by design.
    """
    if isinstance(criticality, str):
        preset = CRITICALITY_PRESETS[criticality]
    else:
        preset = criticality
    if plan_length <= free_length:
        f_length = 1.0
    else:
        f_length = max(floor, 1.0 - slope * (plan_length - free_length))
    raw = alpha_base * preset.factor * f_length
    return min(1.0, max(alpha_min, raw))


@dataclass(frozen=True)
class AlphaPolicy:
    """Fixed or adaptive acceptance threshold selection."""

    mode: str = "fixed"  # "fixed" | "adaptive"
    alpha: Degree = 0.7
    alpha_base: Degree = 0.7
    criticality: str = "typical"

    def alpha_for(self, plan_length: int) -> Degree:
        if self.mode == "fixed":
            return self.alpha
        return adaptive_alpha(self.alpha_base, self.criticality, plan_length)

    def gate_alpha(self) -> Degree:
        """The most permissive threshold this policy can produce, used to
        seed backward requirements (which are heuristic bounds only; the
        final acceptance check recomputes the length-specific threshold)."""
        if self.mode == "fixed":
            return self.alpha
        factor = CRITICALITY_PRESETS[self.criticality].factor
        return min(1.0, max(ALPHA_MIN, self.alpha_base * factor * LENGTH_FLOOR))


def accept(plan_mu: Degree, alpha: Degree, violations: Sequence[Violation]) -> bool:
    """Exact threshold comparison; any hard violation dominates."""
    return len(violations) == 0 and plan_mu >= alpha


@dataclass(frozen=True)
class Segment:
    """One composition step: a single action, or a macro's member run."""

    actions: Tuple[str, ...]
    macro: Optional[str] = None


@dataclass(frozen=True)
class PlanResult:
    actions: Tuple[str, ...]
    step_degrees: Tuple[Degree, ...]
    plan_mu: Degree
    alpha_used: Degree
    accepted: bool
    failure_reason: Optional[FailureReason] = None
    violations: Tuple[Violation, ...] = ()
    segments: Tuple[Segment, ...] = ()
    stats: Mapping = field(default_factory=dict)
    provenance: Mapping = field(default_factory=dict)


def failure_result(
    reason: FailureReason,
    alpha_used: Degree,
    stats: Optional[Mapping] = None,
    best: Optional["PlanResult"] = None,
) -> PlanResult:
    """A structured planning failure. When a complete-but-rejected plan was
    seen, its details ride along for diagnostics."""
    if best is not None:
        return PlanResult(
            actions=best.actions,
            step_degrees=best.step_degrees,
            plan_mu=best.plan_mu,
            alpha_used=best.alpha_used,
            accepted=False,
            failure_reason=reason,
            violations=best.violations,
            segments=best.segments,
            stats=dict(stats or {}),
        )
    return PlanResult(
        actions=(),
        step_degrees=(),
        plan_mu=0.0,
        alpha_used=alpha_used,
        accepted=False,
        failure_reason=reason,
        stats=dict(stats or {}),
    )


def _normalize_segments(plan, actions: Mapping[str, object]) -> Tuple[Segment, ...]:
    if isinstance(plan, PlanResult):
        if plan.segments:
            return tuple(plan.segments)
        return tuple(Segment(actions=(a,)) for a in plan.actions)
    segments = []
    for item in plan:
        if isinstance(item, Segment):
            segments.append(item)
        elif isinstance(item, str):
            segments.append(Segment(actions=(item,)))
        else:
            raise PlanValidationError(f"unrecognized plan step: {item!r}")
    return tuple(segments)


def replay_segments(
    initial: State,
    segments: Sequence[Segment],
    domain_actions: Mapping[str, object],
    grounder: Grounder,
    macros: Optional[Mapping[str, MacroAction]] = None,
) -> Tuple[State, Tuple[Degree, ...], Tuple[Violation, ...], Tuple[str, ...]]:
    """Replay composition segments from ``initial``.

    Returns (final state, per-segment degrees, violations, expanded action
    ids). Degrees are grounded on the concrete state at the start of each
    segment, before its actions run. Replay stops at the first hard
    violation.
    """
    macros = macros or {}
    state = initial
    degrees: list[Degree] = []
    violations: list[Violation] = []
    expanded: list[str] = []
    step_no = 0
    for segment in segments:
        if segment.macro is not None:
            macro = macros.get(segment.macro)
            if macro is None:
                raise PlanValidationError(f"unknown macro id {segment.macro!r}")
            if tuple(segment.actions) != macro.members:
                raise PlanValidationError(
                    f"segment members {segment.actions} do not match macro "
                    f"{segment.macro!r} ({macro.members})"
                )
            mu = macro_membership(macro, state, grounder)
        else:
            if len(segment.actions) != 1:
                raise PlanValidationError(
                    f"non-macro segment must hold exactly one action: {segment}"
                )
            action = domain_actions.get(segment.actions[0])
            if action is None:
                raise PlanValidationError(f"unknown action id {segment.actions[0]!r}")
            mu = grounder.action_mu(state, action)
        degrees.append(mu)
        for action_id in segment.actions:
            action = domain_actions.get(action_id)
            if action is None:
                raise PlanValidationError(f"unknown action id {action_id!r}")
            step_no += 1
            if not crisp_applicable(state, action):
                violations.append(
                    Violation(
                        ViolationKind.RESOURCE
                        if any(
                            state.resources.get(n, 0.0) < need
                            for n, need in action.resource_needs.items()
                        )
                        else ViolationKind.LOGIC
                        if (
                            not action.required_facts <= state.facts
                            or action.forbidden_facts & state.facts
                        )
                        else ViolationKind.TEMPORAL,
                        f"step {step_no} ({action_id}) is not applicable",
                    )
                )
                return state, tuple(degrees), tuple(violations), tuple(expanded)
            state = apply(state, action)
            expanded.append(action_id)
    return state, tuple(degrees), tuple(violations), tuple(expanded)


def validate(
    domain,
    problem,
    plan,
    tnorm_kind: TNorm,
    oracle: MembershipOracle,
    policy: AggregationPolicy = AggregationPolicy(),
    *,
    seed: int = 0,
    macros: Optional[Mapping[str, MacroAction]] = None,
    alpha_policy: Optional[AlphaPolicy] = None,
    grounder: Optional[Grounder] = None,
    record_samples: bool = False,
) -> PlanResult:
    """Replay ``plan`` against the domain and problem and decide acceptance.

    ``plan`` may be a PlanResult, a sequence of action ids, or a sequence
    of segments. Unknown action or macro ids raise PlanValidationError
    (malformed input), which is distinct from plan rejection.
    """
    segments = _normalize_segments(plan, domain.actions)
    if grounder is None:
        grounder = Grounder(
            domain.predicates,
            oracle,
            policy,
            tnorm_kind=tnorm_kind,
            seed=seed,
            record_samples=record_samples,
        )
    policy_used = alpha_policy or problem.alpha_policy
    initial = problem.initial_state(domain)
    final, degrees, violations, expanded = replay_segments(
        initial, segments, domain.actions, grounder, macros
    )
    violations = list(violations)
    if not violations and not goal_satisfied(final, problem.goal):
        violations.append(
            Violation(ViolationKind.GOAL, "final state does not satisfy the goal")
        )
    plan_mu = plan_membership(tnorm_kind, degrees)
    alpha_used = policy_used.alpha_for(len(segments))
    ok = accept(plan_mu, alpha_used, violations)
    if ok:
        reason = None
    elif violations:
        reason = FailureReason.HARD_VIOLATION
    else:
        reason = FailureReason.BELOW_ALPHA
    provenance = {}
    if record_samples:
        provenance["grounding"] = [
            {
                "predicate": r.predicate_id,
                "action": r.action_id,
                "state": r.state_digest,
                "samples": list(r.samples),
                "degree": r.degree,
            }
            for r in grounder.records
        ]
    return PlanResult(
        actions=tuple(expanded),
        step_degrees=degrees,
        plan_mu=plan_mu,
        alpha_used=alpha_used,
        accepted=ok,
        failure_reason=reason,
        violations=tuple(violations),
        segments=segments,
        provenance=provenance,
    )
