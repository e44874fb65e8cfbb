"""File formats: domain/problem/plan JSON plus a restricted preference
importer.

The native formats are JSON documents validated against the schemas in
``DOMAIN_SCHEMA`` / ``PROBLEM_SCHEMA`` / ``PLAN_SCHEMA`` (copies ship in
docs/). Parsing is total on the documented schema: malformed input always
produces a structured error with path locations, never a crash. Plans
round-trip losslessly; degrees are serialized at full precision.

``import_preference_subset`` compiles a restricted preference-style
planning text (typed STRIPS actions, conjunctive goals, named ground goal
preferences, metric = weighted sum of violation counts) into the native
structures: hard dynamics map to crisp actions, and each preference
becomes a vague predicate on a terminal no-op "commit" action whose
rule-oracle degree is 1 when the preference holds and 1 minus its
normalized weight when violated. Anything beyond that subset (temporal
modalities, quantified or unground preferences, disjunctions, negative
preconditions) is rejected with an explicit unsupported-construct error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import jsonschema

from .acceptance import AlphaPolicy, FailureReason, PlanResult, Segment
from .errors import DomainError, ProblemError, UnsupportedConstructError
from .grounding import OracleRule, RuleCondition, VaguePredicate
from .world import (
    Action,
    Goal,
    LogicalConstraints,
    State,
    TimeBudget,
    Violation,
    ViolationKind,
    violates_hard,
)

_DEGREE = {"type": "number", "minimum": 0, "maximum": 1}
_ATOMS = {"type": "array", "items": {"type": "string"}}
_QUANTITIES = {"type": "object", "additionalProperties": {"type": "number"}}

DOMAIN_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fuzzyplan domain",
    "type": "object",
    "required": ["resources", "predicates", "actions"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "resources": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "unit": {"type": "string"},
                },
            },
        },
        "predicates": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string"},
                    "rubric": {"type": "string"},
                },
            },
        },
        "constraints": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "forbidden": _ATOMS,
                "required_invariant": _ATOMS,
                "mutex": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": {"type": "string"},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
            },
        },
        "facts": _ATOMS,
        "actions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string"},
                    "resource_needs": _QUANTITIES,
                    "resource_deltas": _QUANTITIES,
                    "required_facts": _ATOMS,
                    "forbidden_facts": _ATOMS,
                    "add_facts": _ATOMS,
                    "del_facts": _ATOMS,
                    "duration": {"type": "number", "minimum": 0},
                    "graded_predicates": _ATOMS,
                    "chunk_tag": {"type": ["string", "null"]},
                    "class": {"type": ["string", "null"]},
                },
            },
        },
        "chunk_estimates": {"type": "object", "additionalProperties": _DEGREE},
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "table": {"type": "object", "additionalProperties": _DEGREE},
                "default": _DEGREE,
                "rules": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["degree"],
                        "additionalProperties": False,
                        "properties": {
                            "degree": _DEGREE,
                            "predicate": {"type": ["string", "null"]},
                            "when": {
                                "type": "object",
                                "additionalProperties": False,
                                "properties": {
                                    "facts_present": _ATOMS,
                                    "facts_absent": _ATOMS,
                                    "action_is": {"type": ["string", "null"]},
                                    "action_adds": _ATOMS,
                                    "resource_at_least": _QUANTITIES,
                                },
                            },
                        },
                    },
                },
            },
        },
    },
}

PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fuzzyplan problem",
    "type": "object",
    "required": ["initial", "goal"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "resources": _QUANTITIES,
                "facts": _ATOMS,
                "elapsed": {"type": "number", "minimum": 0},
            },
        },
        "budget": {"type": ["number", "null"]},
        "goal": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "required_facts": _ATOMS,
                "resource_mins": _QUANTITIES,
                "deadline": {"type": ["number", "null"]},
            },
        },
        "acceptance": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["fixed", "adaptive"]},
                "alpha": _DEGREE,
                "alpha_base": _DEGREE,
                "criticality": {
                    "enum": ["casual", "typical", "important", "critical"]
                },
            },
        },
    },
}

PLAN_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fuzzyplan plan",
    "type": "object",
    "required": ["actions", "step_degrees", "plan_mu", "alpha_used", "accepted"],
    "additionalProperties": False,
    "properties": {
        "actions": _ATOMS,
        "step_degrees": {"type": "array", "items": _DEGREE},
        "plan_mu": _DEGREE,
        "alpha_used": _DEGREE,
        "accepted": {"type": "boolean"},
        "failure_reason": {
            "enum": [
                None,
                "FrontierExhausted",
                "DepthBound",
                "BelowAlpha",
                "HardViolation",
            ]
        },
        "violations": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind", "description"],
                "additionalProperties": False,
                "properties": {
                    "kind": {"enum": ["Resource", "Logic", "Temporal", "Goal"]},
                    "description": {"type": "string"},
                },
            },
        },
        "segments": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["actions"],
                "additionalProperties": False,
                "properties": {
                    "actions": _ATOMS,
                    "macro": {"type": ["string", "null"]},
                },
            },
        },
        "stats": {"type": "object"},
        "provenance": {"type": "object"},
    },
}


@dataclass
class Domain:
    name: str
    resources: Dict[str, str]
    predicates: Dict[str, VaguePredicate]
    logic: LogicalConstraints
    actions: Dict[str, Action]
    chunk_estimates: Dict[str, float] = field(default_factory=dict)
    oracle_table: Dict[Tuple[str, str], float] = field(default_factory=dict)
    oracle_default: float = 0.5
    oracle_rules: List[OracleRule] = field(default_factory=list)
    known_atoms: FrozenSet[str] = frozenset()


@dataclass
class Problem:
    name: str
    initial_resources: Dict[str, float]
    initial_facts: FrozenSet[str]
    initial_elapsed: float
    budget: float
    goal: Goal
    alpha_policy: AlphaPolicy

    def initial_state(self, domain: Domain) -> State:
        resources = {name: 0.0 for name in domain.resources}
        resources.update(self.initial_resources)
        return State(
            resources=resources,
            facts=self.initial_facts,
            logic=domain.logic,
            time=TimeBudget(self.initial_elapsed, self.budget),
        )


def _schema_errors(document, schema) -> List[Tuple[str, str]]:
    validator = jsonschema.Draft202012Validator(schema)
    errors = []
    for err in sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path)):
        path = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path
        )
        errors.append((path, err.message))
    return errors


def _load_json(text: str, error_cls):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise error_cls(
            f"not valid JSON: {exc.msg} at line {exc.lineno} column {exc.colno}",
            errors=[(f"line {exc.lineno}", exc.msg)],
        )


def parse_domain(text: str) -> Domain:
    """Parse and fully cross-check a domain document."""
    doc = _load_json(text, DomainError)
    errors = _schema_errors(doc, DOMAIN_SCHEMA)
    if errors:
        raise DomainError("domain fails schema validation", errors=errors)

    resources: Dict[str, str] = {}
    for i, entry in enumerate(doc["resources"]):
        if entry["name"] in resources:
            errors.append((f"$.resources[{i}]", f"duplicate resource {entry['name']!r}"))
        resources[entry["name"]] = entry.get("unit", "")

    predicates: Dict[str, VaguePredicate] = {}
    for i, entry in enumerate(doc["predicates"]):
        if entry["id"] in predicates:
            errors.append((f"$.predicates[{i}]", f"duplicate predicate {entry['id']!r}"))
        predicates[entry["id"]] = VaguePredicate(entry["id"], entry.get("rubric", ""))

    constraints = doc.get("constraints", {})
    forbidden = frozenset(constraints.get("forbidden", []))
    invariant = frozenset(constraints.get("required_invariant", []))
    if forbidden & invariant:
        errors.append(
            ("$.constraints", f"atoms both forbidden and required: {sorted(forbidden & invariant)}")
        )
        raise DomainError("domain fails consistency checks", errors=errors)
    logic = LogicalConstraints(
        forbidden=forbidden,
        required_invariant=invariant,
        mutex=frozenset(tuple(sorted(p)) for p in constraints.get("mutex", [])),
    )

    actions: Dict[str, Action] = {}
    seen_at: Dict[str, int] = {}
    known_atoms = set(doc.get("facts", [])) | forbidden | invariant
    for pair in logic.mutex:
        known_atoms.update(pair)
    for i, entry in enumerate(doc["actions"]):
        aid = entry["id"]
        if aid in seen_at:
            errors.append(
                (
                    f"$.actions[{i}]",
                    f"duplicate action id {aid!r} (also at $.actions[{seen_at[aid]}])",
                )
            )
            continue
        seen_at[aid] = i
        for section in ("resource_needs", "resource_deltas"):
            for rname in entry.get(section, {}):
                if rname not in resources:
                    errors.append(
                        (f"$.actions[{i}].{section}.{rname}", f"undeclared resource {rname!r}")
                    )
        for pid in entry.get("graded_predicates", []):
            if pid not in predicates:
                errors.append(
                    (f"$.actions[{i}].graded_predicates", f"unknown predicate {pid!r}")
                )
        try:
            action = Action(
                id=aid,
                resource_needs=dict(entry.get("resource_needs", {})),
                resource_deltas=dict(entry.get("resource_deltas", {})),
                required_facts=frozenset(entry.get("required_facts", [])),
                forbidden_facts=frozenset(entry.get("forbidden_facts", [])),
                add_facts=frozenset(entry.get("add_facts", [])),
                del_facts=frozenset(entry.get("del_facts", [])),
                duration=float(entry.get("duration", 0.0)),
                graded_predicates=tuple(entry.get("graded_predicates", [])),
                chunk_tag=entry.get("chunk_tag"),
                action_class=entry.get("class"),
            )
        except DomainError as exc:
            errors.append((f"$.actions[{i}]", str(exc)))
            continue
        actions[aid] = action
        known_atoms |= (
            action.required_facts
            | action.forbidden_facts
            | action.add_facts
            | action.del_facts
        )
    if errors:
        raise DomainError("domain fails consistency checks", errors=errors)

    oracle_cfg = doc.get("oracle", {})
    table: Dict[Tuple[str, str], float] = {}
    for key, value in oracle_cfg.get("table", {}).items():
        if "|" not in key:
            raise DomainError(
                "oracle table keys must be 'predicate|action'",
                errors=[(f"$.oracle.table.{key}", "missing '|' separator")],
            )
        pred, act = key.split("|", 1)
        table[(pred, act)] = float(value)
    rules = []
    for entry in oracle_cfg.get("rules", []):
        when = entry.get("when", {})
        rules.append(
            OracleRule(
                when=RuleCondition(
                    facts_present=frozenset(when.get("facts_present", [])),
                    facts_absent=frozenset(when.get("facts_absent", [])),
                    action_is=when.get("action_is"),
                    action_adds=frozenset(when.get("action_adds", [])),
                    resource_at_least=dict(when.get("resource_at_least", {})),
                ),
                degree=float(entry["degree"]),
                predicate=entry.get("predicate"),
            )
        )

    return Domain(
        name=doc.get("name", ""),
        resources=resources,
        predicates=predicates,
        logic=logic,
        actions=actions,
        chunk_estimates={k: float(v) for k, v in doc.get("chunk_estimates", {}).items()},
        oracle_table=table,
        oracle_default=float(oracle_cfg.get("default", 0.5)),
        oracle_rules=rules,
        known_atoms=frozenset(known_atoms),
    )


def parse_problem(text: str, domain: Domain) -> Problem:
    """Parse a problem against its domain; the initial state must be
    hard-feasible (hard semantics reject infeasible inputs at load time)."""
    doc = _load_json(text, ProblemError)
    errors = _schema_errors(doc, PROBLEM_SCHEMA)
    if errors:
        raise ProblemError("problem fails schema validation", errors=errors)

    initial = doc["initial"]
    for rname in initial.get("resources", {}):
        if rname not in domain.resources:
            errors.append((f"$.initial.resources.{rname}", f"undeclared resource {rname!r}"))
    goal_doc = doc["goal"]
    initial_facts = frozenset(initial.get("facts", []))
    for atom in goal_doc.get("required_facts", []):
        if atom not in domain.known_atoms and atom not in initial_facts:
            errors.append(
                (
                    "$.goal.required_facts",
                    f"goal atom {atom!r} appears nowhere in the domain or initial state",
                )
            )
    for rname in goal_doc.get("resource_mins", {}):
        if rname not in domain.resources:
            errors.append((f"$.goal.resource_mins.{rname}", f"undeclared resource {rname!r}"))
    if errors:
        raise ProblemError("problem fails consistency checks", errors=errors)

    budget_raw = doc.get("budget")
    budget = math.inf if budget_raw is None else float(budget_raw)
    acceptance = doc.get("acceptance", {})
    mode = acceptance.get("mode", "fixed")
    policy = AlphaPolicy(
        mode=mode,
        alpha=float(acceptance.get("alpha", 0.7)),
        alpha_base=float(acceptance.get("alpha_base", acceptance.get("alpha", 0.7))),
        criticality=acceptance.get("criticality", "typical"),
    )
    goal = Goal(
        required_facts=frozenset(goal_doc.get("required_facts", [])),
        resource_mins=dict(goal_doc.get("resource_mins", {})),
        deadline=goal_doc.get("deadline"),
    )
    problem = Problem(
        name=doc.get("name", ""),
        initial_resources=dict(initial.get("resources", {})),
        initial_facts=initial_facts,
        initial_elapsed=float(initial.get("elapsed", 0.0)),
        budget=budget,
        goal=goal,
        alpha_policy=policy,
    )
    state = problem.initial_state(domain)
    violations = violates_hard(state)
    if violations:
        raise ProblemError(
            "initial state violates hard constraints",
            errors=[("$.initial", v.description) for v in violations],
        )
    return problem


def plan_to_dict(result: PlanResult) -> dict:
    return {
        "actions": list(result.actions),
        "step_degrees": list(result.step_degrees),
        "plan_mu": result.plan_mu,
        "alpha_used": result.alpha_used,
        "accepted": result.accepted,
        "failure_reason": result.failure_reason.value if result.failure_reason else None,
        "violations": [
            {"kind": v.kind.value, "description": v.description} for v in result.violations
        ],
        "segments": [
            {"actions": list(s.actions), "macro": s.macro} for s in result.segments
        ],
        "stats": dict(result.stats),
        "provenance": dict(result.provenance),
    }


def serialize_plan(result: PlanResult) -> str:
    """Lossless JSON text for a plan result (full float precision)."""
    return json.dumps(plan_to_dict(result), indent=2, sort_keys=True)


def parse_plan(text: str) -> PlanResult:
    doc = _load_json(text, DomainError)
    errors = _schema_errors(doc, PLAN_SCHEMA)
    if errors:
        raise DomainError("plan fails schema validation", errors=errors)
    reason = doc.get("failure_reason")
    return PlanResult(
        actions=tuple(doc["actions"]),
        step_degrees=tuple(doc["step_degrees"]),
        plan_mu=doc["plan_mu"],
        alpha_used=doc["alpha_used"],
        accepted=doc["accepted"],
        failure_reason=FailureReason(reason) if reason else None,
        violations=tuple(
            Violation(ViolationKind(v["kind"]), v["description"])
            for v in doc.get("violations", [])
        ),
        segments=tuple(
            Segment(actions=tuple(s["actions"]), macro=s.get("macro"))
            for s in doc.get("segments", [])
        ),
        stats=doc.get("stats", {}),
        provenance=doc.get("provenance", {}),
    )


# ---------------------------------------------------------------------------
# Restricted preference-subset importer
# ---------------------------------------------------------------------------

_TEMPORAL_MODALITIES = {
    "always",
    "sometime",
    "within",
    "at-most-once",
    "sometime-after",
    "sometime-before",
    "at-end",
    "hold-during",
    "hold-after",
}
_UNSUPPORTED_HEADS = {"or", "not", "imply", "forall", "exists", "when"} | _TEMPORAL_MODALITIES


def _tokenize(text: str) -> List[str]:
    out = []
    for line in text.splitlines():
        if ";" in line:
            line = line[: line.index(";")]
        out.extend(line.replace("(", " ( ").replace(")", " ) ").split())
    return out


def _parse_sexprs(tokens: List[str]):
    def parse(i):
        if tokens[i] != "(":
            return tokens[i], i + 1
        items = []
        i += 1
        while i < len(tokens) and tokens[i] != ")":
            item, i = parse(i)
            items.append(item)
        if i >= len(tokens):
            raise UnsupportedConstructError("unbalanced parentheses")
        return items, i + 1

    exprs = []
    i = 0
    while i < len(tokens):
        expr, i = parse(i)
        exprs.append(expr)
    return exprs


@dataclass
class StripsAction:
    name: str
    params: List[Tuple[str, str]]
    precond: List[Tuple[str, ...]]
    add: List[Tuple[str, ...]]
    delete: List[Tuple[str, ...]]


@dataclass
class StripsInstance:
    """Parsed original structures, kept for independent replay validation."""

    types: Dict[str, str]
    actions: List[StripsAction]
    objects: Dict[str, str]
    init: FrozenSet[Tuple[str, ...]]
    goal_hard: List[Tuple[str, ...]]
    preferences: List[Tuple[str, List[Tuple[str, ...]]]]
    metric_weights: Dict[str, float]


def atom_string(atom: Tuple[str, ...]) -> str:
    if len(atom) == 1:
        return atom[0]
    return f"{atom[0]}({','.join(atom[1:])})"


def _typed_list(items: Sequence[str], default: str = "object") -> List[Tuple[str, str]]:
    out = []
    pending: List[str] = []
    i = 0
    while i < len(items):
        if items[i] == "-":
            typ = items[i + 1]
            out.extend((name, typ) for name in pending)
            pending = []
            i += 2
        else:
            pending.append(items[i])
            i += 1
    out.extend((name, default) for name in pending)
    return out


def _require_atom(expr, where: str) -> Tuple[str, ...]:
    if not isinstance(expr, list) or not expr or any(isinstance(e, list) for e in expr):
        raise UnsupportedConstructError(f"expected an atom in {where}, got {expr!r}")
    head = expr[0]
    if head in _UNSUPPORTED_HEADS:
        raise UnsupportedConstructError(
            f"unsupported construct {head!r} in {where}", construct=head
        )
    return tuple(expr)


def _conjunction(expr, where: str) -> List:
    if isinstance(expr, list) and expr and expr[0] == "and":
        return expr[1:]
    return [expr]


def parse_strips(text: str) -> StripsInstance:
    """Parse the documented restricted subset (one domain and one problem
    definition in a single text)."""
    exprs = _parse_sexprs(_tokenize(text))
    domain_expr = problem_expr = None
    for expr in exprs:
        if isinstance(expr, list) and expr and expr[0] == "define":
            header = expr[1]
            if header[0] == "domain":
                domain_expr = expr
            elif header[0] == "problem":
                problem_expr = expr
    if domain_expr is None or problem_expr is None:
        raise UnsupportedConstructError(
            "input must contain one (define (domain ...)) and one (define (problem ...))"
        )

    types: Dict[str, str] = {"object": "object"}
    actions: List[StripsAction] = []
    for section in domain_expr[2:]:
        head = section[0]
        if head == ":requirements":
            continue
        if head == ":types":
            for name, parent in _typed_list(section[1:]):
                types[name] = parent
                types.setdefault(parent, "object")
        elif head == ":predicates":
            continue  # arities are implied by use; atoms stay opaque
        elif head == ":action":
            name = section[1]
            params: List[Tuple[str, str]] = []
            precond: List[Tuple[str, ...]] = []
            add: List[Tuple[str, ...]] = []
            delete: List[Tuple[str, ...]] = []
            i = 2
            while i < len(section):
                key = section[i]
                value = section[i + 1]
                if key == ":parameters":
                    params = _typed_list(value)
                elif key == ":precondition":
                    for item in _conjunction(value, f"precondition of {name}"):
                        if isinstance(item, list) and item and item[0] == "not":
                            raise UnsupportedConstructError(
                                f"negative precondition in action {name!r}",
                                construct="not",
                            )
                        precond.append(_require_atom(item, f"precondition of {name}"))
                elif key == ":effect":
                    for item in _conjunction(value, f"effect of {name}"):
                        if isinstance(item, list) and item and item[0] == "not":
                            delete.append(_require_atom(item[1], f"effect of {name}"))
                        else:
                            add.append(_require_atom(item, f"effect of {name}"))
                else:
                    raise UnsupportedConstructError(
                        f"unsupported action field {key!r} in {name!r}", construct=key
                    )
                i += 2
            actions.append(StripsAction(name, params, precond, add, delete))
        else:
            raise UnsupportedConstructError(
                f"unsupported domain section {head!r}", construct=head
            )

    objects: Dict[str, str] = {}
    init: set[Tuple[str, ...]] = set()
    goal_hard: List[Tuple[str, ...]] = []
    preferences: List[Tuple[str, List[Tuple[str, ...]]]] = []
    metric_weights: Dict[str, float] = {}
    for section in problem_expr[2:]:
        head = section[0]
        if head == ":domain":
            continue
        if head == ":objects":
            for name, typ in _typed_list(section[1:]):
                objects[name] = typ
        elif head == ":init":
            for item in section[1:]:
                init.add(_require_atom(item, ":init"))
        elif head == ":goal":
            for item in _conjunction(section[1], ":goal"):
                if isinstance(item, list) and item and item[0] == "preference":
                    pname = item[1]
                    conj = [
                        _require_atom(sub, f"preference {pname}")
                        for sub in _conjunction(item[2], f"preference {pname}")
                    ]
                    for atom in conj:
                        if any(part.startswith("?") for part in atom):
                            raise UnsupportedConstructError(
                                f"preference {pname!r} is not ground", construct="?"
                            )
                    preferences.append((pname, conj))
                else:
                    goal_hard.append(_require_atom(item, ":goal"))
        elif head == ":metric":
            # (:metric minimize (+ (* w (is-violated name)) ...))
            expr = section[2]
            terms = expr[1:] if isinstance(expr, list) and expr and expr[0] == "+" else [expr]
            for term in terms:
                if isinstance(term, list) and term and term[0] == "*":
                    weight = float(term[1])
                    target = term[2]
                elif isinstance(term, list) and term and term[0] == "is-violated":
                    weight, target = 1.0, term
                else:
                    raise UnsupportedConstructError(
                        f"unsupported metric term {term!r}", construct="metric"
                    )
                if not (isinstance(target, list) and target[0] == "is-violated"):
                    raise UnsupportedConstructError(
                        f"unsupported metric term {target!r}", construct="metric"
                    )
                metric_weights[target[1]] = weight
        else:
            raise UnsupportedConstructError(
                f"unsupported problem section {head!r}", construct=head
            )

    return StripsInstance(
        types=types,
        actions=actions,
        objects=objects,
        init=frozenset(init),
        goal_hard=goal_hard,
        preferences=preferences,
        metric_weights=metric_weights,
    )


def _type_matches(types: Dict[str, str], obj_type: str, wanted: str) -> bool:
    seen = set()
    current = obj_type
    while current not in seen:
        if current == wanted:
            return True
        seen.add(current)
        current = types.get(current, "object")
    return wanted == "object"


def _ground_bindings(instance: StripsInstance, action: StripsAction):
    pools = []
    for _, typ in action.params:
        pool = sorted(
            name
            for name, otype in instance.objects.items()
            if _type_matches(instance.types, otype, typ)
        )
        pools.append(pool)
    if not pools:
        yield {}
        return

    def rec(i, binding):
        if i == len(pools):
            yield dict(binding)
            return
        var = action.params[i][0]
        for obj in pools[i]:
            binding[var] = obj
            yield from rec(i + 1, binding)
        binding.pop(action.params[i][0], None)

    yield from rec(0, {})


def _substitute(atom: Tuple[str, ...], binding: Mapping[str, str]) -> Tuple[str, ...]:
    return tuple(binding.get(part, part) for part in atom)


def ground_strips_actions(
    instance: StripsInstance,
) -> Dict[str, Tuple[FrozenSet[str], FrozenSet[str], FrozenSet[str]]]:
    """All ground (precondition, add, delete) triples keyed by ground id."""
    out = {}
    for action in instance.actions:
        for binding in _ground_bindings(instance, action):
            args = [binding[v] for v, _ in action.params]
            gid = action.name if not args else f"{action.name}({','.join(args)})"
            pre = frozenset(atom_string(_substitute(a, binding)) for a in action.precond)
            add = frozenset(atom_string(_substitute(a, binding)) for a in action.add)
            dele = frozenset(atom_string(_substitute(a, binding)) for a in action.delete)
            out[gid] = (pre, add, dele - add)
    return out


COMMIT_ACTION = "commit"
COMMITTED_ATOM = "committed"


def import_preference_subset(text: str, alpha: float = 0.5) -> Tuple[Domain, Problem]:
    """Compile a restricted-subset instance into native structures.

    The mapping is deterministic: hard dynamics become crisp actions; each
    named preference becomes a vague predicate attached to a terminal
    "commit" no-op that requires the hard goals and adds a synthetic
    "committed" atom (which the goal then requires). The predicate's rule
    oracle yields 1 when the preference's ground conjunction holds at
    commit time, else 1 - (weight / total metric weight). Instances with
    no preferences import as pure crisp domains without the commit step.
    """
    instance = parse_strips(text)
    grounded = ground_strips_actions(instance)

    predicates: Dict[str, VaguePredicate] = {}
    rules: List[OracleRule] = []
    actions: Dict[str, Action] = {}
    for gid, (pre, add, dele) in sorted(grounded.items()):
        actions[gid] = Action(
            id=gid,
            required_facts=pre,
            add_facts=add,
            del_facts=dele,
        )

    hard_goal = frozenset(atom_string(a) for a in instance.goal_hard)
    goal_atoms = set(hard_goal)
    if instance.preferences:
        total_weight = sum(
            instance.metric_weights.get(name, 1.0) for name, _ in instance.preferences
        )
        pref_predicate_ids = []
        for name, conj in instance.preferences:
            pid = f"pref:{name}"
            weight = instance.metric_weights.get(name, 1.0)
            normalized = weight / total_weight if total_weight > 0 else 0.0
            atoms = frozenset(atom_string(a) for a in conj)
            predicates[pid] = VaguePredicate(
                id=pid,
                rubric=(
                    f"Preference {name!r}: satisfied when {sorted(atoms)} all hold "
                    f"at commit time (violation weight {weight:g})."
                ),
            )
            rules.append(
                OracleRule(
                    when=RuleCondition(facts_present=atoms),
                    degree=1.0,
                    predicate=pid,
                )
            )
            rules.append(
                OracleRule(when=RuleCondition(), degree=1.0 - normalized, predicate=pid)
            )
            pref_predicate_ids.append(pid)
        actions[COMMIT_ACTION] = Action(
            id=COMMIT_ACTION,
            required_facts=hard_goal,
            add_facts=frozenset({COMMITTED_ATOM}),
            graded_predicates=tuple(pref_predicate_ids),
        )
        goal_atoms.add(COMMITTED_ATOM)

    known = set()
    for pre, add, dele in grounded.values():
        known |= pre | add | dele
    known |= {atom_string(a) for a in instance.init}
    known |= goal_atoms

    domain = Domain(
        name="imported",
        resources={},
        predicates=predicates,
        logic=LogicalConstraints(),
        actions=actions,
        oracle_rules=rules,
        known_atoms=frozenset(known),
    )
    problem = Problem(
        name="imported",
        initial_resources={},
        initial_facts=frozenset(atom_string(a) for a in instance.init),
        initial_elapsed=0.0,
        budget=math.inf,
        goal=Goal(required_facts=frozenset(goal_atoms)),
        alpha_policy=AlphaPolicy(mode="fixed", alpha=alpha),
    )
    return domain, problem


def replay_strips(
    instance: StripsInstance,
    action_ids: Sequence[str],
    ignore: Tuple[str, ...] = (COMMIT_ACTION,),
) -> List[str]:
    """Independent replay of a plan under the original subset semantics.

    Returns a list of error strings (empty when the plan is valid): every
    step's preconditions must hold, effects apply delete-then-add, and the
    hard goals must hold at the end. Synthetic ids in ``ignore`` (the
    compiled commit step) are skipped.
    """
    grounded = ground_strips_actions(instance)
    facts = {atom_string(a) for a in instance.init}
    errors: List[str] = []
    for i, action_id in enumerate(action_ids, start=1):
        if action_id in ignore:
            continue
        entry = grounded.get(action_id)
        if entry is None:
            errors.append(f"step {i}: unknown action {action_id!r}")
            return errors
        pre, add, dele = entry
        missing = pre - facts
        if missing:
            errors.append(
                f"step {i} ({action_id}): preconditions not met: {sorted(missing)}"
            )
            return errors
        facts = (facts - dele) | add
    unmet = {atom_string(a) for a in instance.goal_hard} - facts
    if unmet:
        errors.append(f"hard goals not achieved: {sorted(unmet)}")
    return errors
