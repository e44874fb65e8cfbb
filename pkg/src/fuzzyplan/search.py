"""Bidirectional best-first planning with graded membership propagation.

The forward frontier carries concrete states with composed memberships
(root membership 1, each step conjoined by the active t-norm). The
backward frontier carries partial conditions obtained by goal regression,
each annotated with a requirement: the residuum chain lower-bounding the
forward membership needed at that point to still reach the target quality.
A distance heuristic over (facts, resources, logic, time) proposes meet
candidates; candidates are gated by the requirement, verified by crisp
pullback merge, and finally re-evaluated exactly by the plan validator,
which is the sole acceptance authority. Requirements and distances guide
the search only; they never decide acceptance.

``brute_force_plan`` is the exhaustive forward-enumeration oracle used to
cross-check the bidirectional planner on small instances.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .acceptance import (
    AlphaPolicy,
    FailureReason,
    PlanResult,
    Segment,
    failure_result,
    validate,
)
from .algebra import Degree, TNorm, residuum, tnorm
from .chunking import MacroAction, build_macros, macro_membership
from .errors import SearchLimitError
from .grounding import AggregationPolicy, Grounder, MembershipOracle
from .pullback import pullback_compatible
from .world import (
    Action,
    Condition,
    State,
    condition_from_goal,
    crisp_applicable,
    goal_satisfied,
    apply,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DistanceWeights:
    """Non-negative component weights for the meet distance; sum to 1 so
    the combined distance stays in [0, 1]."""

    facts: float = 0.4
    resources: float = 0.3
    logic: float = 0.2
    time: float = 0.1

    def __post_init__(self):
        parts = (self.facts, self.resources, self.logic, self.time)
        if any(w < 0 for w in parts):
            raise ValueError(f"distance weights must be non-negative: {parts}")
        if abs(sum(parts) - 1.0) > 1e-9:
            raise ValueError(f"distance weights must sum to 1: {parts}")


@dataclass
class SearchConfig:
    epsilon_d: float = 0.15
    max_depth: int = 12
    forward_beam: int = 512
    backward_beam: int = 512
    backward_agg: str = "max"  # "max" follows the requirement formula; "min" is the optimistic bound
    tnorm: TNorm = TNorm.LUKASIEWICZ
    weights: DistanceWeights = field(default_factory=DistanceWeights)
    seed: int = 0
    chunking: bool = False
    max_expansions: int = 100_000
    # The requirement gate is a heuristic necessary-check; a hair of slack
    # keeps float noise at exact thresholds from masking a valid meet.
    requirement_slack: float = 1e-9
    distance_sample: int = 64
    diagnostics_cap: int = 64

    def __post_init__(self):
        if not (0.0 <= self.epsilon_d <= 1.0):
            raise ValueError(f"epsilon_d must be in [0, 1]: {self.epsilon_d}")
        if self.forward_beam < 1 or self.backward_beam < 1:
            raise ValueError("beam widths must be >= 1")
        if self.backward_agg not in ("max", "min"):
            raise ValueError(f"backward_agg must be 'max' or 'min': {self.backward_agg}")


@dataclass
class ForwardNode:
    state: State
    mu: Degree
    parent: Optional["ForwardNode"]
    via_segment: Optional[Segment]
    depth: int
    id: int = 0

    @property
    def dead(self) -> bool:
        return self.mu == 0.0


@dataclass
class BackwardNode:
    condition: Condition
    requirement: Degree
    successor: Optional["BackwardNode"]
    via_segment: Optional[Segment]
    depth: int
    id: int = 0


@dataclass(frozen=True)
class Candidate:
    """One expandable step: a primitive action or a macro composite."""

    segment: Segment
    action: Action
    macro: Optional[MacroAction] = None


def make_candidates(
    actions: Sequence[Action], macros: Optional[Dict[str, MacroAction]] = None
) -> List[Candidate]:
    out = [Candidate(Segment(actions=(a.id,)), a) for a in actions]
    for macro in (macros or {}).values():
        out.append(
            Candidate(
                Segment(actions=macro.members, macro=macro.id),
                macro.composite,
                macro,
            )
        )
    return out


def _step_mu(candidate: Candidate, state: State, grounder: Grounder) -> Degree:
    if candidate.macro is not None:
        return macro_membership(candidate.macro, state, grounder)
    return grounder.action_mu(state, candidate.action)


def forward_expand(
    node: ForwardNode,
    candidates: Sequence[Candidate],
    grounder: Grounder,
) -> List[ForwardNode]:
    """Children of a forward node: one per crisp-applicable candidate,
    with membership conjoined by the active t-norm. Zero-membership
    children are produced (flagged dead via ``mu == 0``) but must never
    be expanded; infeasible candidates yield no child at all, whatever
    their degree would have been."""
    children: List[ForwardNode] = []
    for candidate in candidates:
        if not crisp_applicable(node.state, candidate.action):
            continue
        mu_step = _step_mu(candidate, node.state, grounder)
        child_state = apply(node.state, candidate.action)
        children.append(
            ForwardNode(
                state=child_state,
                mu=tnorm(grounder.tnorm_kind, node.mu, mu_step),
                parent=node,
                via_segment=candidate.segment,
                depth=node.depth + 1,
            )
        )
    return children


def regress(condition: Condition, action: Action, logic) -> Optional[Condition]:
    """Condition that must hold before ``action`` so that ``condition``
    holds after it. None when the regressed condition is unsatisfiable."""
    if condition.required_facts & action.del_facts:
        return None  # the action destroys a required fact for good
    if condition.forbidden_facts & action.add_facts:
        return None
    required = action.required_facts | (condition.required_facts - action.add_facts)
    forbidden = action.forbidden_facts | (condition.forbidden_facts - action.del_facts)
    if required & forbidden:
        return None
    if required & logic.forbidden:
        return None
    if forbidden & logic.required_invariant:
        return None
    for a, b in logic.mutex:
        if a in required and b in required:
            return None
    mins: Dict[str, float] = {}
    names = set(action.resource_needs) | set(condition.resource_mins) | set(
        action.resource_deltas
    )
    for name in names:
        need = max(
            action.resource_needs.get(name, 0.0),
            condition.resource_mins.get(name, 0.0)
            - action.resource_deltas.get(name, 0.0),
        )
        if need > 0.0:
            mins[name] = need
    remaining = condition.remaining_time_min + action.duration
    if remaining > condition.latest_finish:
        return None
    return Condition(
        required_facts=required,
        forbidden_facts=forbidden,
        resource_mins=mins,
        remaining_time_min=remaining,
        latest_finish=condition.latest_finish,
    )


def backward_requirement(
    agg: str, candidates: Sequence[Tuple[Degree, Degree]], kind: TNorm
) -> Degree:
    """Aggregate residua over (step membership, downstream requirement)
    pairs: max mirrors the existential requirement formula, min is the
    weakest sufficient bound."""
    if not candidates:
        raise ValueError("backward_requirement needs at least one candidate")
    values = [residuum(kind, mu_f, req) for mu_f, req in candidates]
    return max(values) if agg == "max" else min(values)


def _relevant(candidate: Candidate, condition: Condition) -> bool:
    # Standard regression relevance: achieves a required fact or supplies
    # a required resource.
    action = candidate.action
    if action.add_facts & condition.required_facts:
        return True
    for name, minimum in condition.resource_mins.items():
        if minimum > 0.0 and action.resource_deltas.get(name, 0.0) > 0.0:
            return True
    return False


def condition_state(condition: Condition, resource_names: Sequence[str], logic) -> State:
    """Minimal concrete representative of a condition, used to ground
    backward-step memberships (the pullback merge re-grounds them on the
    actual stitched states later)."""
    resources = {name: 0.0 for name in resource_names}
    for name, minimum in condition.resource_mins.items():
        resources[name] = minimum
    return State(resources=resources, facts=condition.required_facts, logic=logic)


def backward_expand(
    node: BackwardNode,
    candidates: Sequence[Candidate],
    grounder: Grounder,
    resource_names: Sequence[str],
    logic,
    agg: str,
) -> List[BackwardNode]:
    """Regress relevant candidates through the node's condition."""
    children: List[BackwardNode] = []
    for candidate in candidates:
        if not _relevant(candidate, node.condition):
            continue
        regressed = regress(node.condition, candidate.action, logic)
        if regressed is None:
            continue
        pseudo = condition_state(regressed, resource_names, logic)
        mu_f = _step_mu(candidate, pseudo, grounder)
        req = backward_requirement(agg, [(mu_f, node.requirement)], grounder.tnorm_kind)
        children.append(
            BackwardNode(
                condition=regressed,
                requirement=req,
                successor=node,
                via_segment=candidate.segment,
                depth=node.depth + 1,
            )
        )
    return children


def distance(state: State, condition: Condition, weights: DistanceWeights) -> float:
    """Heuristic meet distance in [0, 1]; 0 when the state satisfies the
    condition outright. Guides prioritization only."""
    # facts: Jaccard distance to the required set
    union = state.facts | condition.required_facts
    if union:
        inter = state.facts & condition.required_facts
        d_facts = 1.0 - len(inter) / len(union)
    else:
        d_facts = 0.0
    # resources: total shortfall relative to total requirement
    total = sum(m for m in condition.resource_mins.values() if m > 0.0)
    if total > 0.0:
        short = sum(
            max(0.0, minimum - state.resources.get(name, 0.0))
            for name, minimum in condition.resource_mins.items()
        )
        d_res = min(1.0, short / total)
    else:
        d_res = 0.0
    # logic: would the merged fact set violate a constraint?
    merged = state.facts | condition.required_facts
    d_logic = 0.0
    if condition.required_facts & state.logic.forbidden:
        d_logic = 1.0
    elif condition.forbidden_facts & state.facts:
        d_logic = 1.0
    else:
        for a, b in state.logic.mutex:
            if a in merged and b in merged:
                d_logic = 1.0
                break
    # time: remaining-need shortfall against the available horizon
    horizon = min(state.time.budget, condition.latest_finish)
    avail = horizon - state.time.elapsed
    need = condition.remaining_time_min
    if avail < 0.0:
        d_time = 1.0
    elif need > 0.0:
        d_time = min(1.0, max(0.0, need - avail) / need)
    else:
        d_time = 0.0
    return (
        weights.facts * d_facts
        + weights.resources * d_res
        + weights.logic * d_logic
        + weights.time * d_time
    )


def find_meet_candidates(
    forward_nodes: Sequence[ForwardNode],
    backward_nodes: Sequence[BackwardNode],
    config: SearchConfig,
) -> List[Tuple[ForwardNode, BackwardNode, float]]:
    """All frontier pairs within the meet threshold (inclusive), ordered by
    ascending distance then descending forward membership. Every candidate
    must still pass the requirement gate and pullback merge downstream."""
    out = []
    for f in forward_nodes:
        for b in backward_nodes:
            d = distance(f.state, b.condition, config.weights)
            if d <= config.epsilon_d:
                out.append((f, b, d))
    out.sort(key=lambda t: (t[2], -t[0].mu, t[0].id, t[1].id))
    return out


def _meet_pairs(
    forward_nodes: Sequence[ForwardNode],
    backward_nodes: Sequence[BackwardNode],
    config: SearchConfig,
) -> List[Tuple[ForwardNode, BackwardNode, float]]:
    """Meet pairs the planner actually tests: everything within the
    distance threshold, plus every pair whose forward state satisfies the
    backward condition outright. The Jaccard fact distance penalizes
    surplus facts, so a satisfying state can sit beyond the threshold;
    an outright satisfaction is a meet by definition and skipping it would
    cost completeness."""
    out = []
    for f in forward_nodes:
        for b in backward_nodes:
            d = distance(f.state, b.condition, config.weights)
            if d <= config.epsilon_d or b.condition.satisfied_by(f.state):
                out.append((f, b, d))
    out.sort(key=lambda t: (t[2], -t[0].mu, t[0].id, t[1].id))
    return out


def _path_segments(node: ForwardNode) -> List[Segment]:
    segments: List[Segment] = []
    n = node
    while n.via_segment is not None:
        segments.append(n.via_segment)
        n = n.parent
    segments.reverse()
    return segments


def _suffix_segments(node: BackwardNode) -> List[Segment]:
    segments: List[Segment] = []
    n = node
    while n.via_segment is not None:
        segments.append(n.via_segment)
        n = n.successor
    return segments


class _TraceWriter:
    def __init__(self, path):
        self._fh = open(path, "w", encoding="utf-8")

    def node(self, node_id, direction, value, priority, parent_id, via, depth):
        record = {
            "node": node_id,
            "dir": direction,
            ("mu" if direction == "F" else "requirement"): value,
            "priority": priority,
            "parent": parent_id,
            "via": via,
            "depth": depth,
        }
        self._fh.write(json.dumps(record) + "\n")

    def close(self):
        self._fh.close()


def bidirectional_plan(
    domain,
    problem,
    config: SearchConfig,
    oracle: MembershipOracle,
    *,
    policy: Optional[AggregationPolicy] = None,
    macros: Optional[Dict[str, MacroAction]] = None,
    alpha_policy: Optional[AlphaPolicy] = None,
    trace_path=None,
    grounder: Optional[Grounder] = None,
) -> PlanResult:
    """Meet-in-the-middle planning.

    Alternates forward and backward best-first expansion, proposes meet
    candidates within the distance threshold, and for each one runs the
    requirement gate, the crisp pullback merge, and an exact re-validation
    of the stitched plan. The first candidate whose stitched plan is
    accepted is returned; candidates whose exact membership falls short
    are remembered as diagnostics and the search continues. On exhaustion
    a structured failure is returned: BelowAlpha when a complete plan was
    seen but none met the threshold, DepthBound when the depth cap cut
    expansion, FrontierExhausted otherwise.
    """
    policy = policy or AggregationPolicy()
    alpha_policy = alpha_policy or problem.alpha_policy
    kind = config.tnorm
    if config.chunking and macros is None:
        macros = build_macros(
            list(domain.actions.values()), domain.logic, domain.chunk_estimates
        )
    macros = macros or {}
    candidates = make_candidates(list(domain.actions.values()), macros)
    if grounder is None:
        grounder = Grounder(
            domain.predicates, oracle, policy, tnorm_kind=kind, seed=config.seed
        )
    resource_names = sorted(domain.resources)

    initial = problem.initial_state(domain)
    goal_condition = condition_from_goal(problem.goal, budget=initial.time.budget)
    gate_alpha = alpha_policy.gate_alpha()

    trace = _TraceWriter(trace_path) if trace_path else None
    counter = 0

    def next_id():
        nonlocal counter
        counter += 1
        return counter

    root_f = ForwardNode(initial, 1.0, None, None, 0, id=next_id())
    root_b = BackwardNode(goal_condition, gate_alpha, None, None, 0, id=next_id())

    fwd_all: List[ForwardNode] = [root_f]
    bwd_all: List[BackwardNode] = [root_b]
    best_fwd_mu: Dict[str, Degree] = {initial.digest(): 1.0}
    bwd_by_digest: Dict[str, BackwardNode] = {goal_condition.digest(): root_b}
    retired: set[int] = set()

    stats = {
        "expanded_forward": 0,
        "expanded_backward": 0,
        "generated_forward": 1,
        "generated_backward": 1,
        "meets_tested": 0,
        "pruned_forward": 0,
        "pruned_backward": 0,
    }
    depth_limited = False
    best_reject: Optional[PlanResult] = None
    diagnostics_left = config.diagnostics_cap

    def fwd_priority(node: ForwardNode):
        sample = bwd_all[: config.distance_sample]
        if sample:
            d = min(distance(node.state, b.condition, config.weights) for b in sample)
        else:
            d = 0.0
        return (d, -node.mu, node.id)

    fwd_open: List[Tuple[Tuple, ForwardNode]] = []
    bwd_open: List[Tuple[Tuple, BackwardNode]] = []
    heapq.heappush(fwd_open, (fwd_priority(root_f), root_f))
    heapq.heappush(bwd_open, ((root_b.requirement, root_b.id), root_b))
    if trace:
        trace.node(root_f.id, "F", root_f.mu, list(fwd_open[0][0][:2]), None, None, 0)
        trace.node(root_b.id, "B", root_b.requirement, [root_b.requirement], None, None, 0)

    def process(pairs) -> Optional[PlanResult]:
        nonlocal best_reject, diagnostics_left
        for f, b, _d in pairs:
            stats["meets_tested"] += 1
            gated = f.mu + config.requirement_slack < b.requirement
            if gated and diagnostics_left <= 0:
                continue
            suffix = _suffix_segments(b)
            merge = pullback_compatible(
                f.state,
                b.condition,
                f.mu,
                suffix,
                grounder,
                domain.actions,
                kind,
                macros,
            )
            if not merge.compatible:
                continue
            stitched = _path_segments(f) + suffix
            result = validate(
                domain,
                problem,
                stitched,
                kind,
                oracle,
                policy,
                grounder=grounder,
                macros=macros,
                alpha_policy=alpha_policy,
            )
            if gated:
                # The requirement gate is a necessary condition for this
                # suffix to deliver the target quality, so a gated meet is
                # evaluated for diagnostics only.
                diagnostics_left -= 1
            elif result.accepted:
                return PlanResult(
                    actions=result.actions,
                    step_degrees=result.step_degrees,
                    plan_mu=result.plan_mu,
                    alpha_used=result.alpha_used,
                    accepted=True,
                    failure_reason=None,
                    violations=result.violations,
                    segments=result.segments,
                    stats=dict(stats),
                    provenance=result.provenance,
                )
            if not result.accepted and not result.violations:
                if best_reject is None or result.plan_mu > best_reject.plan_mu:
                    best_reject = result
        return None

    found = process(_meet_pairs([root_f], [root_b], config))
    if found is not None:
        if trace:
            trace.close()
        return found

    expansions = 0
    try:
        while fwd_open or bwd_open:
            if expansions >= config.max_expansions:
                stats["expansion_cap_hit"] = True
                break

            if fwd_open:
                _, node = heapq.heappop(fwd_open)
                if node.depth >= config.max_depth:
                    depth_limited = True
                else:
                    expansions += 1
                    stats["expanded_forward"] += 1
                    new_children = []
                    for child in forward_expand(node, candidates, grounder):
                        digest = child.state.digest()
                        seen = best_fwd_mu.get(digest)
                        if seen is not None and seen >= child.mu:
                            continue
                        best_fwd_mu[digest] = child.mu
                        child.id = next_id()
                        fwd_all.append(child)
                        new_children.append(child)
                        stats["generated_forward"] += 1
                        if not child.dead:
                            prio = fwd_priority(child)
                            heapq.heappush(fwd_open, (prio, child))
                            if trace:
                                trace.node(
                                    child.id,
                                    "F",
                                    child.mu,
                                    [prio[0], -prio[1]],
                                    node.id,
                                    child.via_segment.macro or child.via_segment.actions[0],
                                    child.depth,
                                )
                        elif trace:
                            trace.node(
                                child.id,
                                "F",
                                child.mu,
                                None,
                                node.id,
                                child.via_segment.macro or child.via_segment.actions[0],
                                child.depth,
                            )
                    found = process(_meet_pairs(new_children, bwd_all, config))
                    if found is not None:
                        return found
                    if len(fwd_open) > 2 * config.forward_beam:
                        kept = heapq.nsmallest(config.forward_beam, fwd_open)
                        stats["pruned_forward"] += len(fwd_open) - len(kept)
                        fwd_open = kept
                        heapq.heapify(fwd_open)

            if bwd_open:
                _, node = heapq.heappop(bwd_open)
                if node.id in retired:
                    continue
                if node.depth >= config.max_depth:
                    depth_limited = True
                else:
                    expansions += 1
                    stats["expanded_backward"] += 1
                    new_children = []
                    for child in backward_expand(
                        node,
                        candidates,
                        grounder,
                        resource_names,
                        domain.logic,
                        config.backward_agg,
                    ):
                        digest = child.condition.digest()
                        existing = bwd_by_digest.get(digest)
                        if existing is not None:
                            better = (
                                child.requirement > existing.requirement
                                if config.backward_agg == "max"
                                else child.requirement < existing.requirement
                            )
                            if not better:
                                continue
                            retired.add(existing.id)
                        child.id = next_id()
                        bwd_by_digest[digest] = child
                        bwd_all.append(child)
                        new_children.append(child)
                        stats["generated_backward"] += 1
                        heapq.heappush(bwd_open, ((child.requirement, child.id), child))
                        if trace:
                            trace.node(
                                child.id,
                                "B",
                                child.requirement,
                                [child.requirement],
                                node.id,
                                child.via_segment.macro or child.via_segment.actions[0],
                                child.depth,
                            )
                    found = process(_meet_pairs(fwd_all, new_children, config))
                    if found is not None:
                        return found
                    if len(bwd_open) > 2 * config.backward_beam:
                        kept = heapq.nsmallest(config.backward_beam, bwd_open)
                        stats["pruned_backward"] += len(bwd_open) - len(kept)
                        bwd_open = kept
                        heapq.heapify(bwd_open)
    finally:
        if trace:
            trace.close()

    if best_reject is not None:
        return failure_result(
            FailureReason.BELOW_ALPHA, best_reject.alpha_used, stats, best=best_reject
        )
    reason = FailureReason.DEPTH_BOUND if depth_limited else FailureReason.FRONTIER_EXHAUSTED
    return failure_result(reason, gate_alpha, stats)


def brute_force_plan(
    domain,
    problem,
    alpha: Degree,
    tnorm_kind: TNorm,
    oracle: MembershipOracle,
    depth_bound: int,
    *,
    policy: Optional[AggregationPolicy] = None,
    seed: int = 0,
    node_cap: int = 1_000_000,
) -> PlanResult:
    """Exhaustive forward enumeration over primitive action sequences up to
    ``depth_bound``; the testing oracle for the bidirectional planner.

    Returns the goal-reaching plan maximizing composed membership (ties:
    shorter plan, then lexicographically smaller action id sequence) and
    whether it meets ``alpha``. Raises SearchLimitError past ``node_cap``
    generated nodes.
    """
    policy = policy or AggregationPolicy()
    grounder = Grounder(
        domain.predicates, oracle, policy, tnorm_kind=tnorm_kind, seed=seed
    )
    initial = problem.initial_state(domain)
    actions = sorted(domain.actions.values(), key=lambda a: a.id)

    best: Optional[Tuple[Degree, int, Tuple[str, ...], Tuple[Degree, ...]]] = None
    nodes = 0
    hit_bound = False

    def consider(mu, seq, degrees):
        nonlocal best
        entry = (mu, len(seq), tuple(seq), tuple(degrees))
        if best is None:
            best = entry
            return
        # maximize mu, then prefer shorter, then lexicographic ids
        if (-entry[0], entry[1], entry[2]) < (-best[0], best[1], best[2]):
            best = entry

    def walk(state: State, mu: Degree, seq: List[str], degrees: List[Degree]):
        nonlocal nodes, hit_bound
        if goal_satisfied(state, problem.goal):
            consider(mu, seq, degrees)
            # any extension is no better: membership is non-increasing and
            # longer plans lose every tie-break
            return
        if len(seq) >= depth_bound:
            hit_bound = True
            return
        for action in actions:
            if not crisp_applicable(state, action):
                continue
            nodes += 1
            if nodes > node_cap:
                raise SearchLimitError(
                    f"brute force exceeded node cap of {node_cap}"
                )
            mu_step = grounder.action_mu(state, action)
            seq.append(action.id)
            degrees.append(mu_step)
            walk(apply(state, action), tnorm(tnorm_kind, mu, mu_step), seq, degrees)
            seq.pop()
            degrees.pop()

    walk(initial, 1.0, [], [])

    if best is None:
        reason = FailureReason.DEPTH_BOUND if hit_bound else FailureReason.FRONTIER_EXHAUSTED
        return failure_result(reason, alpha, {"nodes": nodes})
    mu, _, seq, degrees = best
    accepted = mu >= alpha
    return PlanResult(
        actions=seq,
        step_degrees=degrees,
        plan_mu=mu,
        alpha_used=alpha,
        accepted=accepted,
        failure_reason=None if accepted else FailureReason.BELOW_ALPHA,
        segments=tuple(Segment(actions=(a,)) for a in seq),
        stats={"nodes": nodes},
    )
