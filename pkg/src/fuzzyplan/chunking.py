"""Macro construction: collapse short coherent action runs into one step.

Under nilpotent composition every extra step costs quality, so sequences
of actions declared coherent via a shared ``chunk_tag`` are offered to the
search as single macro steps. A macro's crisp semantics are derived by
symbolic sequential composition of its members and are exactly equivalent
to applying the members in order; its membership comes either from one
dedicated grounding query over the whole chunk or from a stored empirical
estimate, and counts as a single composition step.

Returned plans always expand macros back to primitive actions; the
membership accounting keeps track of which degree came from a macro.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .algebra import Degree
from .errors import DomainError
from .grounding import Grounder, VaguePredicate
from .world import Action, LogicalConstraints, State

logger = logging.getLogger(__name__)

MACRO_PREFIX = "macro:"
CHUNK_PREDICATE_PREFIX = "chunk:"
DEFAULT_MAX_CHUNK = 3


@dataclass(frozen=True)
class MacroAction:
    """A composite step standing in for an ordered run of member actions."""

    id: str
    members: Tuple[str, ...]
    composite: Action
    source: str  # "oracle" or "empirical"
    empirical_mu: Optional[Degree] = None
    chunk_predicate: Optional[VaguePredicate] = None


class NotComposable(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def compose_sequence(
    members: Sequence[Action], macro_id: str, logic: LogicalConstraints
) -> Action:
    """Symbolic sequential composition of member actions.

    Raises NotComposable when the members cannot be guaranteed to run
    back-to-back from every state where the derived composite applies:
    a member requiring a fact an earlier member deleted, forbidding a
    fact an earlier member added, or touching constrained atoms only
    transiently (invisible to the composite's single post-state check).
    """
    mutex_atoms = {a for pair in logic.mutex for a in pair}
    added: set[str] = set()
    deleted: set[str] = set()
    transient_adds: set[str] = set()
    transient_dels: set[str] = set()
    required: set[str] = set()
    forbidden: set[str] = set()

    resources: set[str] = set()
    for m in members:
        resources |= set(m.resource_needs) | set(m.resource_deltas)
    cum: Dict[str, float] = {r: 0.0 for r in resources}
    needs: Dict[str, float] = {}
    duration = 0.0

    for m in members:
        for fact in sorted(m.required_facts):
            if fact in deleted:
                raise NotComposable(
                    f"{m.id!r} requires {fact!r} deleted by an earlier member"
                )
            if fact not in added:
                required.add(fact)
        for fact in sorted(m.forbidden_facts):
            if fact in added:
                raise NotComposable(
                    f"{m.id!r} forbids {fact!r} added by an earlier member"
                )
            if fact not in deleted:
                forbidden.add(fact)
        for name, need in m.resource_needs.items():
            pre = need - cum[name]
            if pre > needs.get(name, 0.0):
                needs[name] = pre
        for name, delta in m.resource_deltas.items():
            cum[name] += delta
            # intermediate levels must stay non-negative
            if -cum[name] > needs.get(name, 0.0):
                needs[name] = -cum[name]
        # (deleted, added) compose as delete-then-add set transformers;
        # a delete always lands in the composite delete set because the
        # fact may also hold before the macro runs.
        for fact in m.del_facts:
            if fact in added:
                transient_adds.add(fact)
            added.discard(fact)
            deleted.add(fact)
        for fact in m.add_facts:
            if fact in deleted:
                transient_dels.add(fact)
            deleted.discard(fact)
            added.add(fact)
        duration += m.duration

    transient_adds -= added
    transient_dels -= deleted
    bad = transient_adds & (logic.forbidden | mutex_atoms)
    if bad:
        raise NotComposable(f"transient adds touch constrained atoms: {sorted(bad)}")
    bad = transient_dels & logic.required_invariant
    if bad:
        raise NotComposable(f"transient deletes touch invariant atoms: {sorted(bad)}")

    return Action(
        id=macro_id,
        resource_needs={k: v for k, v in sorted(needs.items()) if v > 0.0},
        resource_deltas={k: v for k, v in sorted(cum.items()) if v != 0.0},
        required_facts=frozenset(required),
        forbidden_facts=frozenset(forbidden),
        add_facts=frozenset(added),
        del_facts=frozenset(deleted),
        duration=duration,
        graded_predicates=(),
        chunk_tag=members[0].chunk_tag,
    )


def build_macros(
    actions: Sequence[Action],
    logic: LogicalConstraints = LogicalConstraints(),
    chunk_estimates: Optional[Mapping[str, Degree]] = None,
    c_max: int = DEFAULT_MAX_CHUNK,
) -> Dict[str, MacroAction]:
    """Group consecutive same-tag actions (declaration order) into macros
    of 2..c_max members. Non-composable windows are skipped with a warning.
    """
    if c_max < 2:
        raise DomainError(f"c_max must be >= 2, got {c_max}")
    estimates = dict(chunk_estimates or {})
    macros: Dict[str, MacroAction] = {}

    runs: List[List[Action]] = []
    current: List[Action] = []
    for action in actions:
        if action.chunk_tag is not None and current and current[-1].chunk_tag == action.chunk_tag:
            current.append(action)
        else:
            if len(current) > 1:
                runs.append(current)
            current = [action] if action.chunk_tag is not None else []
    if len(current) > 1:
        runs.append(current)

    for run in runs:
        tag = run[0].chunk_tag
        for size in range(2, min(c_max, len(run)) + 1):
            for start in range(0, len(run) - size + 1):
                window = run[start : start + size]
                macro_id = MACRO_PREFIX + "+".join(a.id for a in window)
                try:
                    composite = compose_sequence(window, macro_id, logic)
                except NotComposable as exc:
                    logger.warning(
                        "skipping macro %s (tag %r): %s", macro_id, tag, exc.reason
                    )
                    continue
                if tag in estimates:
                    macros[macro_id] = MacroAction(
                        id=macro_id,
                        members=tuple(a.id for a in window),
                        composite=composite,
                        source="empirical",
                        empirical_mu=estimates[tag],
                    )
                else:
                    predicate = VaguePredicate(
                        id=CHUNK_PREDICATE_PREFIX + str(tag),
                        rubric=(
                            f"How well the whole {tag!r} sequence "
                            f"({', '.join(a.id for a in window)}) suits the current state."
                        ),
                    )
                    macros[macro_id] = MacroAction(
                        id=macro_id,
                        members=tuple(a.id for a in window),
                        composite=composite,
                        source="oracle",
                        chunk_predicate=predicate,
                    )
    return macros


def macro_membership(macro: MacroAction, state: State, grounder: Grounder) -> Degree:
    """Membership of the whole chunk as one composition step."""
    if macro.source == "empirical":
        return macro.empirical_mu
    return grounder.ground(macro.chunk_predicate, state, macro.composite)
