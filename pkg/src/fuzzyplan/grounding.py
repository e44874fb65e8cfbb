"""Grounding vague predicates into degrees via pluggable membership oracles.

An oracle maps (vague predicate, state, action) to a degree in [0, 1].
The engine draws k samples per query with derived per-sample seeds and
aggregates them by median, which is robust to occasional outlier
judgments. Three oracle families are provided:

* ``TableOracle``: (predicate id, action id) lookup plus optional seeded
  Gaussian noise; the workhorse for benchmarks and tests.
* ``RuleOracle``: first-match-wins rules over facts, resources, and the
  queried action.
* ``LlmOracle``: scores a 0-100 rubric prompt through a chat-completion
  style HTTP endpoint under stochastic decoding.

Oracles receive the structured state (not a pre-rendered summary) so rule
conditions can inspect facts and resources; the LLM oracle renders the
canonical text summary itself via ``state_summary``.
"""

from __future__ import annotations

import json
import logging
import random
import re
import statistics
import threading
import time
import zlib
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .algebra import Degree, TNorm, tnorm
from .errors import GroundingError
from .world import Action, State

logger = logging.getLogger(__name__)

DEFAULT_DEGREE = 0.5


@dataclass(frozen=True)
class VaguePredicate:
    """A graded precondition: an id plus the rubric text that anchors its
    0 / 50 / 100 scoring scale."""

    id: str
    rubric: str = ""


@dataclass(frozen=True)
class AggregationPolicy:
    """How many oracle samples to draw per query (median-aggregated).

    Odd k is recommended; the default is 5. Even-length sample sets take
    the midpoint of the two central order statistics.
    """

    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"aggregation width k must be >= 1, got {self.k}")


def aggregate(samples: Sequence[Degree]) -> Degree:
    """Median of a non-empty sample sequence."""
    if not samples:
        raise GroundingError("cannot aggregate an empty sample sequence")
    return float(statistics.median(samples))


def combine_predicates(kind: TNorm, degrees: Iterable[Degree]) -> Degree:
    """Fold the active t-norm over one action's per-predicate degrees.

    An action with no vague preconditions composes to 1: its applicability
    is purely crisp.
    """
    mu = 1.0
    for d in degrees:
        mu = tnorm(kind, mu, d)
    return mu


def derive_seed(base_seed: int, index: int, *context: str) -> int:
    """Stable 32-bit per-sample seed from the episode seed, the sample
    index, and the query identity. Unlike ``hash()``, survives process
    boundaries, so fixed seeds reproduce sample streams exactly."""
    blob = "\x1f".join([str(base_seed), str(index), *context]).encode("utf-8")
    return zlib.crc32(blob)


def state_summary(state: State) -> str:
    """Canonical one-line text rendering of a state, used in oracle
    prompts and audit records."""
    res = ", ".join(f"{k}={v:g}" for k, v in sorted(state.resources.items()))
    facts = ", ".join(sorted(state.facts)) or "(none)"
    budget = "unbounded" if state.time.budget == float("inf") else f"{state.time.budget:g}"
    return f"resources: {res or '(none)'}; facts: {facts}; elapsed: {state.time.elapsed:g} of {budget}"


class MembershipOracle:
    """Interface contract: ``sample`` returns one raw degree judgment.

    Implementations must tolerate concurrent ``sample`` calls and must be
    deterministic in the given seed. Out-of-range raw outputs are clamped
    by the calling engine, not here.
    """

    kind = "abstract"

    def sample(self, predicate: VaguePredicate, state: State, action: Action, seed: int) -> float:
        raise NotImplementedError


class TableOracle(MembershipOracle):
    """Deterministic lookup oracle with optional seeded Gaussian noise."""

    kind = "table"

    def __init__(
        self,
        table: Mapping[Tuple[str, str], float],
        noise_std: float = 0.0,
        seed: int = 0,
        default: float = DEFAULT_DEGREE,
        strict: bool = False,
    ):
        for key, value in table.items():
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"table degree out of range for {key}: {value}")
        self.table = dict(table)
        self.noise_std = noise_std
        self.seed = seed
        self.default = default
        self.strict = strict

    def sample(self, predicate: VaguePredicate, state: State, action: Action, seed: int) -> float:
        key = (predicate.id, action.id)
        if key in self.table:
            base = self.table[key]
        elif self.strict:
            raise GroundingError(
                f"no table entry for predicate {predicate.id!r} / action {action.id!r}",
                predicate_id=predicate.id,
                action_id=action.id,
            )
        else:
            logger.warning(
                "table oracle missing entry for (%s, %s); using default %.3f",
                predicate.id,
                action.id,
                self.default,
            )
            base = self.default
        if self.noise_std == 0.0:
            return base
        rng = random.Random(derive_seed(self.seed, seed, "table-noise"))
        return min(1.0, max(0.0, base + rng.gauss(0.0, self.noise_std)))


@dataclass(frozen=True)
class RuleCondition:
    """Conjunctive match over the queried state and action; empty fields
    match anything."""

    facts_present: FrozenSet[str] = frozenset()
    facts_absent: FrozenSet[str] = frozenset()
    action_is: Optional[str] = None
    action_adds: FrozenSet[str] = frozenset()
    resource_at_least: Mapping[str, float] = field(default_factory=dict)

    def matches(self, state: State, action: Action) -> bool:
        if not self.facts_present <= state.facts:
            return False
        if self.facts_absent & state.facts:
            return False
        if self.action_is is not None and action.id != self.action_is:
            return False
        if not self.action_adds <= action.add_facts:
            return False
        for name, minimum in self.resource_at_least.items():
            if state.resources.get(name, 0.0) < minimum:
                return False
        return True


@dataclass(frozen=True)
class OracleRule:
    when: RuleCondition
    degree: float
    predicate: Optional[str] = None  # None applies the rule to any predicate


class RuleOracle(MembershipOracle):
    """Ordered-rule oracle: the first matching rule's degree wins, with a
    configurable fallback when nothing matches."""

    kind = "rule"

    def __init__(self, rules: Sequence[OracleRule], default: float = DEFAULT_DEGREE):
        self.rules = list(rules)
        self.default = default

    def sample(self, predicate: VaguePredicate, state: State, action: Action, seed: int) -> float:
        for rule in self.rules:
            if rule.predicate is not None and rule.predicate != predicate.id:
                continue
            if rule.when.matches(state, action):
                return rule.degree
        return self.default


@dataclass
class LlmConfig:
    endpoint: str
    api_key: str = ""
    model: str = ""
    temperature: float = 0.7
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0

    @classmethod
    def from_env(cls, env: Mapping[str, str]) -> "LlmConfig":
        endpoint = env.get("FCP_LLM_ENDPOINT", "")
        if not endpoint:
            raise GroundingError("FCP_LLM_ENDPOINT is not set")
        return cls(
            endpoint=endpoint,
            api_key=env.get("FCP_LLM_API_KEY", ""),
            model=env.get("FCP_LLM_MODEL", ""),
            temperature=float(env.get("FCP_LLM_TEMPERATURE", "0.7")),
        )


PROMPT_TEMPLATE = """\
Rate how well the current situation supports the graded requirement below
for executing the given action. Answer with a single integer from 0 to 100:
0 = completely unsuitable, 50 = marginal, 100 = perfect.

Requirement: {predicate_id}
Scoring rubric: {rubric}
Current situation: {summary}
Action under consideration: {action_id}

Score (0-100):"""

_INT_RE = re.compile(r"-?\d+")


def render_prompt(predicate: VaguePredicate, state: State, action: Action) -> str:
    return PROMPT_TEMPLATE.format(
        predicate_id=predicate.id,
        rubric=predicate.rubric or "(no rubric provided)",
        summary=state_summary(state),
        action_id=action.id,
    )


def parse_score(text: str) -> Optional[float]:
    """First integer in the reply, normalized by 100. None when absent."""
    m = _INT_RE.search(text)
    if m is None:
        return None
    raw = int(m.group(0)) / 100.0
    if raw < 0.0 or raw > 1.0:
        logger.warning("oracle score %s outside 0-100; clamping", m.group(0))
        return min(1.0, max(0.0, raw))
    return raw


class LlmOracle(MembershipOracle):
    """Scores rubric prompts through a chat-completion style JSON endpoint.

    Network failures retry with exponential backoff up to
    ``config.max_retries``; a reply with no parseable integer triggers one
    re-ask before failing. Untrusted replies outside 0-100 are clamped
    with a warning. When an audit sink is attached, every request and raw
    reply is recorded.
    """

    kind = "llm"

    def __init__(self, config: LlmConfig, audit=None, transport=None):
        self.config = config
        self.audit = audit
        if transport is None:
            import requests

            transport = requests.post
        self._post = transport

    def _ask(self, prompt: str, seed: int) -> str:
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "seed": seed,
        }
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries):
            try:
                response = self._post(
                    self.config.endpoint,
                    json=payload,
                    headers=headers,
                    timeout=self.config.timeout,
                )
                response.raise_for_status()
                data = response.json()
                content = data["choices"][0]["message"]["content"]
                if self.audit is not None:
                    self.audit.write(
                        {"event": "llm_query", "request": payload, "reply": content}
                    )
                return content
            except Exception as exc:  # network and shape errors both retry
                last_error = exc
                if attempt < self.config.max_retries - 1:
                    time.sleep(self.config.backoff * (2 ** attempt))
        raise GroundingError(f"LLM endpoint failed after retries: {last_error}")

    def sample(self, predicate: VaguePredicate, state: State, action: Action, seed: int) -> float:
        prompt = render_prompt(predicate, state, action)
        reply = self._ask(prompt, seed)
        score = parse_score(reply)
        if score is None:
            reply = self._ask(prompt, seed + 1)  # one re-ask on unparseable output
            score = parse_score(reply)
        if score is None:
            raise GroundingError(
                f"unparseable oracle reply for {predicate.id!r}: {reply[:200]!r}",
                predicate_id=predicate.id,
                action_id=action.id,
            )
        return score


def make_table_oracle(
    table: Mapping[Tuple[str, str], float],
    noise_std: float = 0.0,
    seed: int = 0,
    default: float = DEFAULT_DEGREE,
    strict: bool = False,
) -> TableOracle:
    return TableOracle(table, noise_std=noise_std, seed=seed, default=default, strict=strict)


def make_rule_oracle(rules: Sequence[OracleRule], default: float = DEFAULT_DEGREE) -> RuleOracle:
    return RuleOracle(rules, default=default)


def make_llm_oracle(config: LlmConfig, audit=None, transport=None) -> LlmOracle:
    return LlmOracle(config, audit=audit, transport=transport)


@dataclass
class CalibrationEntry:
    degree: float
    count: int = 0


@dataclass
class CalibrationTable:
    """Bounded-update calibration of elicited degrees toward observed
    execution success rates. Each update moves the degree by at most
    ``delta`` and never leaves [0, 1]."""

    entries: Dict[Tuple[str, str], CalibrationEntry] = field(default_factory=dict)
    eta: float = 0.3
    delta: float = 0.15

    def lookup(self, predicate_id: str, action_key: str) -> Optional[float]:
        entry = self.entries.get((predicate_id, action_key))
        return entry.degree if entry is not None else None


def calibrate(
    table: CalibrationTable,
    key: Tuple[str, str],
    elicited: Degree,
    observed_success_rate: Degree,
) -> Degree:
    """One bounded calibration step; updates the table entry and returns
    the new degree."""
    step = table.eta * (observed_success_rate - elicited)
    step = max(-table.delta, min(table.delta, step))
    new = max(0.0, min(1.0, elicited + step))
    entry = table.entries.get(key)
    if entry is None:
        table.entries[key] = CalibrationEntry(degree=new, count=1)
    else:
        entry.degree = new
        entry.count += 1
    return new


class AuditLog:
    """Append-only JSONL sink for grounding queries and raw oracle traffic."""

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()
        self._fh = open(path, "a", encoding="utf-8")

    def write(self, record: dict) -> None:
        line = json.dumps(record, sort_keys=True)
        with self._lock:
            self._fh.write(line + "\n")
            self._fh.flush()

    def close(self) -> None:
        self._fh.close()


@dataclass
class GroundingRecord:
    predicate_id: str
    action_id: str
    state_digest: str
    samples: List[float]
    degree: float


class Grounder:
    """Per-episode grounding engine: draws and aggregates oracle samples,
    clamps untrusted outputs, caches results, and applies calibration.

    The cache is keyed by (predicate id, state digest, action id) so a
    grounded membership is a function of the state for the lifetime of one
    planning episode. Reads are lock-free after publication; writes take
    an exclusive lock, so the engine may batch the k samples concurrently
    without changing results (per-sample seeds are fixed and the median is
    order-invariant).
    """

    def __init__(
        self,
        predicates: Mapping[str, VaguePredicate],
        oracle: MembershipOracle,
        policy: AggregationPolicy = AggregationPolicy(),
        tnorm_kind: TNorm = TNorm.LUKASIEWICZ,
        seed: int = 0,
        calibration: Optional[CalibrationTable] = None,
        audit: Optional[AuditLog] = None,
        record_samples: bool = False,
    ):
        self.predicates = dict(predicates)
        self.oracle = oracle
        self.policy = policy
        self.tnorm_kind = tnorm_kind
        self.seed = seed
        self.calibration = calibration
        self.audit = audit
        self.record_samples = record_samples
        self.records: List[GroundingRecord] = []
        self._cache: Dict[Tuple[str, str, str], float] = {}
        self._lock = threading.Lock()

    def _clamp(self, raw: float, predicate_id: str, action_id: str) -> float:
        import math as _math

        if not _math.isfinite(raw):
            logger.warning(
                "oracle returned non-finite %r for (%s, %s); clamping to %.2f",
                raw,
                predicate_id,
                action_id,
                DEFAULT_DEGREE,
            )
            return DEFAULT_DEGREE
        if raw < 0.0 or raw > 1.0:
            logger.warning(
                "oracle returned out-of-range %r for (%s, %s); clamping",
                raw,
                predicate_id,
                action_id,
            )
            return min(1.0, max(0.0, raw))
        return raw

    def ground(self, predicate: VaguePredicate, state: State, action: Action) -> Degree:
        digest = state.digest()
        key = (predicate.id, digest, action.id)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        samples = []
        for i in range(self.policy.k):
            sample_seed = derive_seed(self.seed, i, predicate.id, action.id, digest)
            raw = self.oracle.sample(predicate, state, action, sample_seed)
            samples.append(self._clamp(raw, predicate.id, action.id))
        degree = aggregate(samples)
        if self.calibration is not None:
            action_key = action.action_class or action.id
            calibrated = self.calibration.lookup(predicate.id, action_key)
            if calibrated is not None:
                degree = calibrated
        if self.audit is not None:
            self.audit.write(
                {
                    "event": "ground",
                    "predicate": predicate.id,
                    "action": action.id,
                    "state": digest,
                    "samples": samples,
                    "degree": degree,
                }
            )
        if self.record_samples:
            self.records.append(
                GroundingRecord(predicate.id, action.id, digest, samples, degree)
            )
        with self._lock:
            self._cache[key] = degree
        return degree

    def ground_by_id(self, predicate_id: str, state: State, action: Action) -> Degree:
        predicate = self.predicates.get(predicate_id)
        if predicate is None:
            raise GroundingError(
                f"unknown vague predicate {predicate_id!r}",
                predicate_id=predicate_id,
                action_id=action.id,
            )
        return self.ground(predicate, state, action)

    def action_mu(self, state: State, action: Action) -> Degree:
        """Membership of one action in one state: the t-norm fold of its
        graded preconditions (1.0 when it has none)."""
        degrees = [
            self.ground_by_id(pid, state, action) for pid in action.graded_predicates
        ]
        return combine_predicates(self.tnorm_kind, degrees)
