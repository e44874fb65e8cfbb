"""Crisp state model: states, actions, applicability, effects, violations.

A state bundles four components: a resource vector (named non-negative
reals), a symbolic fact set (ground atoms as opaque strings), logical
constraints (forbidden / invariant / mutex atoms), and a temporal budget
(scalar elapsed time against a global budget). All four are hard: a
violation in any of them makes a transition infeasible regardless of any
graded score attached elsewhere.

States and actions are treated as immutable values; ``apply`` always
builds a new state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import FrozenSet, Mapping, Optional, Tuple

from .errors import DomainError

Atom = str


class ViolationKind(str, Enum):
    RESOURCE = "Resource"
    LOGIC = "Logic"
    TEMPORAL = "Temporal"
    # Emitted only by the plan validator when the goal is unmet; states
    # themselves never carry goal violations.
    GOAL = "Goal"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    description: str


@dataclass(frozen=True)
class LogicalConstraints:
    """Atoms that must never hold, must always hold, or may not co-hold."""

    forbidden: FrozenSet[Atom] = frozenset()
    required_invariant: FrozenSet[Atom] = frozenset()
    mutex: FrozenSet[Tuple[Atom, Atom]] = frozenset()

    def __post_init__(self):
        overlap = self.forbidden & self.required_invariant
        if overlap:
            raise DomainError(
                f"atoms both forbidden and required: {sorted(overlap)}"
            )
        normalized = frozenset(tuple(sorted(p)) for p in self.mutex)
        object.__setattr__(self, "mutex", normalized)


EMPTY_LOGIC = LogicalConstraints()


@dataclass(frozen=True)
class TimeBudget:
    elapsed: float = 0.0
    budget: float = math.inf


@dataclass(frozen=True)
class State:
    resources: Mapping[str, float]
    facts: FrozenSet[Atom]
    logic: LogicalConstraints = EMPTY_LOGIC
    time: TimeBudget = TimeBudget()

    def digest(self) -> str:
        """Canonical identity string: sorted facts plus resources rounded
        at 1e-6 plus elapsed time. Used as a cache and dedup key so that
        grounded memberships are a function of the state."""
        res = ",".join(
            f"{k}={round(v, 6):.6f}" for k, v in sorted(self.resources.items())
        )
        facts = "|".join(sorted(self.facts))
        return f"r[{res}]s[{facts}]t[{self.time.elapsed:.6f}]"


@dataclass(frozen=True)
class Action:
    """A transition schema: crisp needs and effects plus graded predicates.

    ``graded_predicates`` names the vague preconditions whose membership
    degrees get composed into plan quality; crisp-only actions leave it
    empty and behave as degree-1 steps once the crisp checks pass.
    """

    id: str
    resource_needs: Mapping[str, float] = field(default_factory=dict)
    resource_deltas: Mapping[str, float] = field(default_factory=dict)
    required_facts: FrozenSet[Atom] = frozenset()
    forbidden_facts: FrozenSet[Atom] = frozenset()
    add_facts: FrozenSet[Atom] = frozenset()
    del_facts: FrozenSet[Atom] = frozenset()
    duration: float = 0.0
    graded_predicates: Tuple[str, ...] = ()
    chunk_tag: Optional[str] = None
    action_class: Optional[str] = None

    def __post_init__(self):
        overlap = self.add_facts & self.del_facts
        if overlap:
            raise DomainError(
                f"action {self.id!r} both adds and deletes: {sorted(overlap)}"
            )
        if self.duration < 0:
            raise DomainError(f"action {self.id!r} has negative duration")


@dataclass(frozen=True)
class Goal:
    required_facts: FrozenSet[Atom] = frozenset()
    resource_mins: Mapping[str, float] = field(default_factory=dict)
    deadline: Optional[float] = None


@dataclass(frozen=True)
class Condition:
    """A goal-like partial condition on states.

    Used as the payload of backward search nodes (regression produces
    conditions, not full states) and as the merge target in pullback
    verification. ``remaining_time_min`` is the least time the suffix
    behind this condition still needs; ``latest_finish`` caps the absolute
    finish time (goal deadline folded in, infinite when unconstrained).
    """

    required_facts: FrozenSet[Atom] = frozenset()
    forbidden_facts: FrozenSet[Atom] = frozenset()
    resource_mins: Mapping[str, float] = field(default_factory=dict)
    remaining_time_min: float = 0.0
    latest_finish: float = math.inf

    def digest(self) -> str:
        req = "|".join(sorted(self.required_facts))
        forb = "|".join(sorted(self.forbidden_facts))
        mins = ",".join(
            f"{k}={round(v, 6):.6f}" for k, v in sorted(self.resource_mins.items())
        )
        return f"req[{req}]forb[{forb}]min[{mins}]rt[{self.remaining_time_min:.6f}]"

    def satisfied_by(self, state: State) -> bool:
        if not self.required_facts <= state.facts:
            return False
        if self.forbidden_facts & state.facts:
            return False
        for name, minimum in self.resource_mins.items():
            if state.resources.get(name, 0.0) < minimum:
                return False
        horizon = min(state.time.budget, self.latest_finish)
        return state.time.elapsed + self.remaining_time_min <= horizon


def condition_from_goal(goal: Goal, budget: float = math.inf) -> Condition:
    return Condition(
        required_facts=goal.required_facts,
        resource_mins=dict(goal.resource_mins),
        remaining_time_min=0.0,
        latest_finish=min(budget, goal.deadline if goal.deadline is not None else math.inf),
    )


def violates_hard(state: State) -> list[Violation]:
    """Enumerate every violated hard constraint; empty iff feasible."""
    out: list[Violation] = []
    for name, qty in sorted(state.resources.items()):
        if qty < 0:
            out.append(
                Violation(ViolationKind.RESOURCE, f"resource {name!r} negative: {qty}")
            )
    hit = state.facts & state.logic.forbidden
    for atom in sorted(hit):
        out.append(Violation(ViolationKind.LOGIC, f"forbidden atom holds: {atom!r}"))
    missing = state.logic.required_invariant - state.facts
    for atom in sorted(missing):
        out.append(Violation(ViolationKind.LOGIC, f"invariant atom missing: {atom!r}"))
    for a, b in sorted(state.logic.mutex):
        if a in state.facts and b in state.facts:
            out.append(
                Violation(ViolationKind.LOGIC, f"mutex atoms co-hold: {a!r}, {b!r}")
            )
    if state.time.elapsed > state.time.budget:
        out.append(
            Violation(
                ViolationKind.TEMPORAL,
                f"elapsed {state.time.elapsed} exceeds budget {state.time.budget}",
            )
        )
    return out


def _check_known_resources(state: State, action: Action) -> None:
    unknown = (set(action.resource_needs) | set(action.resource_deltas)) - set(
        state.resources
    )
    if unknown:
        raise DomainError(
            f"action {action.id!r} references undeclared resources: {sorted(unknown)}"
        )


def crisp_applicable(state: State, action: Action) -> bool:
    """True iff the action passes every hard check in this state and the
    resulting state is itself hard-feasible."""
    _check_known_resources(state, action)
    for name, need in action.resource_needs.items():
        if state.resources[name] < need:
            return False
    if not action.required_facts <= state.facts:
        return False
    if action.forbidden_facts & state.facts:
        return False
    if state.time.elapsed + action.duration > state.time.budget:
        return False
    return not violates_hard(_apply_unchecked(state, action))


def _apply_unchecked(state: State, action: Action) -> State:
    resources = dict(state.resources)
    for name, delta in action.resource_deltas.items():
        resources[name] = resources[name] + delta
    # Deletes apply before adds, following standard planning semantics.
    facts = (state.facts - action.del_facts) | action.add_facts
    time = TimeBudget(state.time.elapsed + action.duration, state.time.budget)
    return State(resources=resources, facts=facts, logic=state.logic, time=time)


def apply(state: State, action: Action) -> State:
    """Apply an applicable action; raises on contract violation rather
    than silently clamping an infeasible result."""
    if not crisp_applicable(state, action):
        raise ValueError(
            f"action {action.id!r} is not applicable in state {state.digest()}"
        )
    return _apply_unchecked(state, action)


def goal_satisfied(state: State, goal: Goal) -> bool:
    if not goal.required_facts <= state.facts:
        return False
    for name, minimum in goal.resource_mins.items():
        if state.resources.get(name, 0.0) < minimum:
            return False
    if goal.deadline is not None and state.time.elapsed > goal.deadline:
        return False
    return True
