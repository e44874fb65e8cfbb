"""Merge verification for meet candidates: crisp compatibility plus replay.

A forward state and a backward condition are compatible when a merged
state exists that jointly satisfies every hard constraint of both partial
plans. The merge is realized operationally: check the condition's facts,
resource minima, and time headroom against the forward state, then replay
the backward action suffix from it step by step. Any crisp failure rejects
the meet regardless of membership values. When the merge succeeds, the
merged state's membership is the t-norm composition of the forward
membership with the suffix degrees re-grounded on the concrete replayed
states (the backward pass grounded them on conditions only).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple

from .acceptance import Segment, replay_segments
from .algebra import Degree, TNorm, plan_membership
from .chunking import MacroAction
from .grounding import Grounder
from .world import Condition, State, Violation, ViolationKind


@dataclass(frozen=True)
class MergeResult:
    compatible: bool
    merged_state: Optional[State] = None
    merged_mu: Optional[Degree] = None
    violations: Tuple[Violation, ...] = ()


def pullback_compatible(
    forward_state: State,
    condition: Condition,
    mu_forward: Degree,
    suffix: Sequence[Segment],
    grounder: Grounder,
    domain_actions: Mapping[str, object],
    kind: TNorm,
    macros: Optional[Mapping[str, MacroAction]] = None,
) -> MergeResult:
    """Check a meet candidate and build the merged state when compatible.

    Incompatibility is a result, not an error. Compatibility depends only
    on crisp components: degree values never override a failed check.
    """
    violations: list[Violation] = []
    missing = condition.required_facts - forward_state.facts
    for atom in sorted(missing):
        violations.append(
            Violation(ViolationKind.LOGIC, f"merge requires absent fact {atom!r}")
        )
    clash = condition.forbidden_facts & forward_state.facts
    for atom in sorted(clash):
        violations.append(
            Violation(ViolationKind.LOGIC, f"merge forbids present fact {atom!r}")
        )
    for name, minimum in sorted(condition.resource_mins.items()):
        have = forward_state.resources.get(name, 0.0)
        if have < minimum:
            violations.append(
                Violation(
                    ViolationKind.RESOURCE,
                    f"merge needs {name!r} >= {minimum:g}, have {have:g}",
                )
            )
    horizon = min(forward_state.time.budget, condition.latest_finish)
    if forward_state.time.elapsed + condition.remaining_time_min > horizon:
        violations.append(
            Violation(
                ViolationKind.TEMPORAL,
                f"merge needs {condition.remaining_time_min:g} more time units; "
                f"elapsed {forward_state.time.elapsed:g} of {horizon:g}",
            )
        )
    if violations:
        return MergeResult(compatible=False, violations=tuple(violations))

    final, suffix_degrees, replay_violations, _ = replay_segments(
        forward_state, suffix, domain_actions, grounder, macros
    )
    if replay_violations:
        return MergeResult(compatible=False, violations=tuple(replay_violations))
    merged_mu = plan_membership(kind, (mu_forward, *suffix_degrees))
    return MergeResult(compatible=True, merged_state=final, merged_mu=merged_mu)
