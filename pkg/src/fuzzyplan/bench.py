"""Synthetic degradation suite and the ablation grid runner.

The suite generator builds chain-shaped instances stratified by the three
degradation drivers: plan length (bins 1/3/5/7/>7), number of missing
requirements, and number of substitute candidates per missing requirement.
Each chain step carries a graded quality predicate; missing requirements
are repaired by substitute actions carrying a graded suitability
predicate; when three or more candidates exist, one tempting high-degree
candidate is crisp-infeasible (it adds a forbidden atom), exercising the
rule that membership never overrides feasibility. True degrees are drawn
from Beta distributions and embedded as the domain oracle table;
benchmark runs plan against a noisy view of that table and score success
against the noise-free truth.

Grid runs are deterministic under a fixed seed: per-run oracle seeds are
derived from (suite seed, instance id, configuration), and CSV rows are
emitted in a stable order regardless of completion order. The only
nondeterministic CSV column is the trailing timestamp column, which also
carries wall-clock duration.
"""

from __future__ import annotations

import csv
import io
import json
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from itertools import product
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .acceptance import AlphaPolicy, validate
from .algebra import TNorm
from .chunking import build_macros
from .domain_io import Domain, Problem, parse_domain, parse_problem
from .errors import FuzzyPlanError
from .grounding import AggregationPolicy, TableOracle, derive_seed
from .search import SearchConfig, bidirectional_plan

LENGTH_BINS = ("1", "3", "5", "7", ">7")

ABLATION_AXES: Dict[str, List] = {
    "tnorm": ["lukasiewicz", "godel"],
    "k": [1, 3, 5, 7],
    "chunking": ["on", "off"],
    "alpha-policy": ["fixed", "adaptive"],
    "backward-agg": ["max", "min"],
}

BASE_CONFIG = {
    "tnorm": "lukasiewicz",
    "k": 5,
    "chunking": "on",
    "alpha-policy": "fixed",
    "backward-agg": "max",
}

CSV_COLUMNS = [
    "instance",
    "tnorm",
    "k",
    "chunking",
    "alpha_policy",
    "backward_agg",
    "bin_length",
    "bin_missing",
    "bin_candidates",
    "planner_accepted",
    "success",
    "crisp_valid",
    "hard_violations",
    "plan_mu",
    "true_mu",
    "plan_length",
    "nodes_forward",
    "nodes_backward",
    "wall",  # "<ISO start>/<ms>ms"; the single nondeterministic column
]


def length_bin(length: int) -> str:
    if length > 7:
        return ">7"
    return str(length)


@dataclass
class BenchRecord:
    instance: str
    config: Dict[str, object]
    bins: Dict[str, str]
    planner_accepted: bool
    success: bool
    crisp_valid: Optional[bool]
    hard_violations: Optional[int]
    plan_mu: float
    true_mu: float
    plan_length: int
    nodes_forward: int
    nodes_backward: int
    wall_ms: float
    started: str

    def row(self) -> List[str]:
        return [
            self.instance,
            str(self.config["tnorm"]),
            str(self.config["k"]),
            str(self.config["chunking"]),
            str(self.config["alpha-policy"]),
            str(self.config["backward-agg"]),
            self.bins["length"],
            self.bins["missing"],
            self.bins["candidates"],
            "1" if self.planner_accepted else "0",
            "1" if self.success else "0",
            "" if self.crisp_valid is None else ("1" if self.crisp_valid else "0"),
            "" if self.hard_violations is None else str(self.hard_violations),
            repr(self.plan_mu),
            repr(self.true_mu),
            str(self.plan_length),
            str(self.nodes_forward),
            str(self.nodes_backward),
            f"{self.started}/{self.wall_ms:.1f}ms",
        ]


# ---------------------------------------------------------------------------
# Suite generation
# ---------------------------------------------------------------------------


def make_chain_instance(
    name: str,
    length: int,
    missing_count: int,
    candidate_count: int,
    rng: random.Random,
    alpha: float,
    step_beta: Tuple[float, float],
    sub_beta: Tuple[float, float],
) -> Tuple[dict, dict, dict]:
    """One synthetic instance: a stage chain of ``length`` steps, with
    ``missing_count`` of the step ingredients absent initially and
    ``candidate_count`` graded substitute actions per missing ingredient."""
    missing = sorted(rng.sample(range(1, length + 1), missing_count))
    total_steps = length + missing_count
    effort = float(total_steps + 2)
    budget = float(total_steps + 2)

    actions = []
    table: Dict[str, float] = {}
    for i in range(1, length + 1):
        step_id = f"step_{i}"
        actions.append(
            {
                "id": step_id,
                "resource_needs": {"effort": 1},
                "resource_deltas": {"effort": -1},
                "required_facts": [f"stage_{i-1}", f"ing_{i}"],
                "add_facts": [f"stage_{i}"],
                "del_facts": [f"stage_{i-1}"],
                "duration": 1.0,
                "graded_predicates": ["step_quality"],
                "chunk_tag": f"phase{(i - 1) // 2}",
            }
        )
        table[f"step_quality|{step_id}"] = round(rng.betavariate(*step_beta), 6)
    for j in missing:
        for c in range(1, candidate_count + 1):
            sub_id = f"sub_{j}_{c}"
            adds = [f"ing_{j}"]
            # One tempting but infeasible candidate when the pool is rich:
            # high degree, adds a forbidden atom, so crisp checks reject it.
            if candidate_count >= 3 and c == candidate_count:
                adds.append("allergen")
                degree = 0.99
            else:
                degree = round(rng.betavariate(*sub_beta), 6)
            actions.append(
                {
                    "id": sub_id,
                    "resource_needs": {"effort": 1},
                    "resource_deltas": {"effort": -1},
                    "add_facts": adds,
                    "duration": 1.0,
                    "graded_predicates": ["suitable_substitute"],
                    "class": "substitute",
                }
            )
            table[f"suitable_substitute|{sub_id}"] = degree

    domain_doc = {
        "name": name,
        "resources": [{"name": "effort", "unit": "u"}],
        "predicates": [
            {
                "id": "step_quality",
                "rubric": "How well this preparation step fits the current state "
                "(0 unusable, 50 marginal, 100 perfect).",
            },
            {
                "id": "suitable_substitute",
                "rubric": "How suitable the substitute is for the missing "
                "ingredient (flavor, texture, constraints).",
            },
        ],
        "constraints": {"forbidden": ["allergen"]},
        "actions": actions,
        "oracle": {"table": table, "default": 0.5},
    }

    # Chunk-level degrees: one table entry per macro. A coherent run judged
    # as a whole scores like its best member (the shared context that makes
    # the run coherent is judged once, not once per step).
    domain = parse_domain(json.dumps(domain_doc))
    macros = build_macros(list(domain.actions.values()), domain.logic, {})
    for macro in macros.values():
        member_degrees = [table[f"step_quality|{m}"] for m in macro.members]
        key = f"{macro.chunk_predicate.id}|{macro.id}"
        table[key] = max(member_degrees)
    domain_doc["oracle"]["table"] = table

    initial_facts = ["stage_0"] + [f"ing_{i}" for i in range(1, length + 1) if i not in missing]
    problem_doc = {
        "name": name,
        "initial": {"resources": {"effort": effort}, "facts": initial_facts},
        "budget": budget,
        "goal": {"required_facts": [f"stage_{length}"]},
        "acceptance": {"mode": "fixed", "alpha": alpha},
    }
    meta = {
        "id": name,
        "bins": {
            "length": length_bin(length),
            "missing": str(missing_count),
            "candidates": str(candidate_count),
        },
        "expected_length": total_steps,
    }
    return domain_doc, problem_doc, meta


def generate_suite(
    out_dir,
    seed: int = 0,
    lengths: Sequence[int] = (1, 3, 5, 7, 9),
    missing: Sequence[int] = (0, 1, 2),
    candidates: Sequence[int] = (1, 3, 5),
    replicates: int = 2,
    noise_std: float = 0.15,
    alpha: float = 0.7,
    step_beta: Tuple[float, float] = (28.0, 2.0),
    sub_beta: Tuple[float, float] = (5.0, 2.0),
) -> dict:
    """Write a stratified instance suite plus its manifest; returns the
    manifest dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    instances = []
    index = 0
    for rep in range(replicates):
        for length in lengths:
            for m in missing:
                if m > length:
                    continue
                for c in candidates:
                    name = f"inst{index:03d}_L{length}_m{m}_c{c}_r{rep}"
                    rng = random.Random(derive_seed(seed, index, name))
                    domain_doc, problem_doc, meta = make_chain_instance(
                        name, length, m, c, rng, alpha, step_beta, sub_beta
                    )
                    (out / f"{name}.domain.json").write_text(
                        json.dumps(domain_doc, indent=1, sort_keys=True)
                    )
                    (out / f"{name}.problem.json").write_text(
                        json.dumps(problem_doc, indent=1, sort_keys=True)
                    )
                    instances.append(
                        {
                            "id": name,
                            "domain": f"{name}.domain.json",
                            "problem": f"{name}.problem.json",
                            "bins": meta["bins"],
                            "expected_length": meta["expected_length"],
                        }
                    )
                    index += 1
    manifest = {
        "seed": seed,
        "noise_std": noise_std,
        "alpha": alpha,
        "instances": instances,
    }
    (out / "suite.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return manifest


# ---------------------------------------------------------------------------
# Grid runner
# ---------------------------------------------------------------------------


def expand_configs(ablate: Sequence[str], base: Optional[Dict] = None) -> List[Dict]:
    """Cartesian product over the requested ablation axes, other axes held
    at their base values."""
    merged = dict(BASE_CONFIG)
    if base:
        merged.update(base)
    axes = []
    for axis in sorted(ablate):
        if axis not in ABLATION_AXES:
            raise FuzzyPlanError(
                f"unknown ablation axis {axis!r}; choose from {sorted(ABLATION_AXES)}"
            )
        axes.append((axis, ABLATION_AXES[axis]))
    if not axes:
        return [merged]
    configs = []
    for combo in product(*(values for _, values in axes)):
        cfg = dict(merged)
        for (axis, _), value in zip(axes, combo):
            cfg[axis] = value
        configs.append(cfg)
    return configs


def run_one(
    instance: dict,
    suite_dir: Path,
    cfg: Dict,
    seed: int,
    noise_std: float,
    search_overrides: Optional[Dict] = None,
) -> BenchRecord:
    domain = parse_domain((suite_dir / instance["domain"]).read_text())
    problem = parse_problem((suite_dir / instance["problem"]).read_text(), domain)

    cfg_tag = json.dumps(cfg, sort_keys=True)
    run_seed = derive_seed(seed, 0, instance["id"], cfg_tag)
    kind = TNorm(cfg["tnorm"])
    chunked = cfg["chunking"] == "on"
    policy = AggregationPolicy(k=int(cfg["k"]))
    if cfg["alpha-policy"] == "adaptive":
        alpha_policy = AlphaPolicy(
            mode="adaptive",
            alpha_base=problem.alpha_policy.alpha,
            criticality="typical",
        )
    else:
        alpha_policy = problem.alpha_policy

    search = SearchConfig(
        tnorm=kind,
        seed=run_seed,
        chunking=chunked,
        backward_agg=cfg["backward-agg"],
        max_depth=int(instance.get("expected_length", 8)) + 2,
    )
    for key, value in (search_overrides or {}).items():
        setattr(search, key, value)

    noisy = TableOracle(
        domain.oracle_table,
        noise_std=noise_std,
        seed=run_seed,
        default=domain.oracle_default,
    )
    started = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    t0 = time.perf_counter()
    result = bidirectional_plan(
        domain, problem, search, noisy, policy=policy, alpha_policy=alpha_policy
    )
    wall_ms = (time.perf_counter() - t0) * 1000.0

    crisp_valid: Optional[bool] = None
    hard_violations: Optional[int] = None
    true_mu = 0.0
    success = False
    if result.accepted:
        truth = TableOracle(
            domain.oracle_table, noise_std=0.0, seed=0, default=domain.oracle_default
        )
        macros = (
            build_macros(list(domain.actions.values()), domain.logic, domain.chunk_estimates)
            if chunked
            else None
        )
        checked = validate(
            domain,
            problem,
            result,
            kind,
            truth,
            AggregationPolicy(k=1),
            macros=macros,
            alpha_policy=alpha_policy,
        )
        true_mu = checked.plan_mu
        hard_violations = len(checked.violations)
        crisp_valid = hard_violations == 0
        success = checked.accepted

    return BenchRecord(
        instance=instance["id"],
        config=cfg,
        bins=instance["bins"],
        planner_accepted=result.accepted,
        success=success,
        crisp_valid=crisp_valid,
        hard_violations=hard_violations,
        plan_mu=result.plan_mu,
        true_mu=true_mu,
        plan_length=len(result.actions),
        nodes_forward=int(result.stats.get("generated_forward", 0)),
        nodes_backward=int(result.stats.get("generated_backward", 0)),
        wall_ms=wall_ms,
        started=started,
    )


def load_suite(suite_dir) -> dict:
    path = Path(suite_dir) / "suite.json"
    if not path.exists():
        raise FuzzyPlanError(f"no suite manifest at {path}")
    manifest = json.loads(path.read_text())
    if not manifest.get("instances"):
        raise FuzzyPlanError(f"suite at {suite_dir} is empty")
    return manifest


def run_bench(
    suite_dir,
    ablate: Sequence[str] = (),
    seed: int = 0,
    base: Optional[Dict] = None,
    noise_std: Optional[float] = None,
    jobs: int = 1,
    search_overrides: Optional[Dict] = None,
) -> List[BenchRecord]:
    """Run the ablation grid over the suite; records return in stable
    (configuration, instance) order regardless of completion order."""
    suite_dir = Path(suite_dir)
    manifest = load_suite(suite_dir)
    noise = manifest.get("noise_std", 0.0) if noise_std is None else noise_std
    configs = expand_configs(ablate, base)
    tasks = [
        (cfg_idx, inst_idx, cfg, instance)
        for cfg_idx, cfg in enumerate(configs)
        for inst_idx, instance in enumerate(manifest["instances"])
    ]

    def execute(task):
        _, _, cfg, instance = task
        return run_one(instance, suite_dir, cfg, seed, noise, search_overrides)

    records: Dict[Tuple[int, int], BenchRecord] = {}
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for task, record in zip(tasks, pool.map(execute, tasks)):
                records[(task[0], task[1])] = record
    else:
        for task in tasks:
            records[(task[0], task[1])] = execute(task)
    return [records[key] for key in sorted(records)]


def records_to_csv(records: Sequence[BenchRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for record in records:
        writer.writerow(record.row())
    return buf.getvalue()


def success_by_bin(
    records: Sequence[BenchRecord], bin_name: str
) -> Dict[Tuple[str, str], Tuple[int, int]]:
    """(config tag, bin value) -> (successes, total)."""
    out: Dict[Tuple[str, str], Tuple[int, int]] = {}
    for record in records:
        tag = json.dumps(record.config, sort_keys=True)
        key = (tag, record.bins[bin_name])
        won, total = out.get(key, (0, 0))
        out[key] = (won + int(record.success), total + 1)
    return out


def summary_table(records: Sequence[BenchRecord]) -> str:
    """Success rate per bin per configuration, as printable text."""
    lines = []
    configs = sorted({json.dumps(r.config, sort_keys=True) for r in records})
    for tag in configs:
        lines.append(f"config {tag}")
        for bin_name in ("length", "missing", "candidates"):
            per_bin = success_by_bin([r for r in records], bin_name)
            entries = sorted(
                (k[1], v) for k, v in per_bin.items() if k[0] == tag
            )

            def bin_sort(item):
                label = item[0]
                return (1, 8.0) if label == ">7" else (0, float(label))

            entries.sort(key=bin_sort)
            cells = [
                f"{label}: {won}/{total} ({won / total:.0%})"
                for label, (won, total) in entries
            ]
            lines.append(f"  {bin_name:<10} " + "  ".join(cells))
    return "\n".join(lines)
