"""Command-line entry points: plan, validate, ground, bench, suite.

Exit codes follow one convention everywhere: 0 = plan accepted,
2 = plan rejected or not found, 1 = any error (including usage errors),
so shell harnesses can compute success rates without parsing JSON.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import bench as bench_mod
from .acceptance import AlphaPolicy, validate
from .algebra import TNorm
from .chunking import build_macros
from .domain_io import parse_domain, parse_plan, parse_problem, plan_to_dict, serialize_plan
from .errors import FuzzyPlanError
from .grounding import (
    AggregationPolicy,
    AuditLog,
    Grounder,
    LlmConfig,
    LlmOracle,
    RuleOracle,
    TableOracle,
    derive_seed,
    render_prompt,
)
from .search import SearchConfig, bidirectional_plan
from .world import State, TimeBudget


class _Parser(argparse.ArgumentParser):
    # usage problems are errors (exit 1), not rejections (exit 2)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p):
    p.add_argument("--tnorm", choices=[t.value for t in TNorm], default="lukasiewicz")
    p.add_argument("--k", type=int, default=5, help="oracle samples per grounding query")
    p.add_argument("--oracle", choices=["table", "rule", "llm"], default="table")
    p.add_argument("--noise-std", type=float, default=0.0, help="table oracle noise")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--audit", metavar="PATH", help="JSONL audit log of oracle traffic")


def build_parser():
    parser = _Parser(prog="fuzzyplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="search for an acceptable plan")
    p.add_argument("--domain", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--alpha", type=float, help="fixed acceptance threshold override")
    p.add_argument("--adaptive", action="store_true", help="adaptive threshold mode")
    p.add_argument(
        "--criticality",
        choices=["casual", "typical", "important", "critical"],
        default=None,
    )
    _add_common(p)
    p.add_argument("--epsilon-d", type=float, default=0.15)
    p.add_argument("--max-depth", type=int, default=12)
    p.add_argument("--forward-beam", type=int, default=512)
    p.add_argument("--backward-beam", type=int, default=512)
    p.add_argument("--chunking", choices=["on", "off"], default="on")
    p.add_argument("--backward-agg", choices=["max", "min"], default="max")
    p.add_argument("--trace", metavar="PATH", help="JSONL search trace")
    p.add_argument("--out", default="plan.json")

    p = sub.add_parser("validate", help="replay and re-judge an existing plan")
    p.add_argument("--domain", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--plan", required=True)
    _add_common(p)
    p.add_argument("--chunking", choices=["on", "off"], default=None)
    p.add_argument("--alpha", type=float)
    p.add_argument("--adaptive", action="store_true")
    p.add_argument(
        "--criticality",
        choices=["casual", "typical", "important", "critical"],
        default=None,
    )

    p = sub.add_parser("ground", help="inspect one grounding query")
    p.add_argument("--domain", required=True)
    p.add_argument("--state", required=True, help="state JSON (or a problem file)")
    p.add_argument("--action", required=True)
    p.add_argument("--predicate", required=True)
    _add_common(p)

    p = sub.add_parser("bench", help="run the ablation grid over a suite")
    p.add_argument("--suite", required=True)
    p.add_argument(
        "--ablate",
        action="append",
        default=[],
        help="axis to ablate (repeatable): " + ", ".join(sorted(bench_mod.ABLATION_AXES)),
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="bench.csv")
    p.add_argument("--summary-out")
    p.add_argument("--noise-std", type=float, default=None)
    p.add_argument("--jobs", type=int, default=1)
    for axis, default in bench_mod.BASE_CONFIG.items():
        p.add_argument(
            f"--{axis}", default=default, help=f"base value when not ablating {axis}"
        )

    p = sub.add_parser("suite", help="generate the synthetic degradation suite")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicates", type=int, default=2)
    p.add_argument("--noise-std", type=float, default=0.15)
    p.add_argument("--alpha", type=float, default=0.7)

    return parser


def _make_oracle(args, domain, audit=None):
    if args.oracle == "table":
        return TableOracle(
            domain.oracle_table,
            noise_std=args.noise_std,
            seed=args.seed,
            default=domain.oracle_default,
        )
    if args.oracle == "rule":
        return RuleOracle(domain.oracle_rules, default=domain.oracle_default)
    return LlmOracle(LlmConfig.from_env(os.environ), audit=audit)


def _alpha_policy(args, problem):
    if args.alpha is not None and args.adaptive:
        raise FuzzyPlanError("--alpha conflicts with --adaptive; pick one mode")
    if args.adaptive:
        base = args.alpha if args.alpha is not None else problem.alpha_policy.alpha_base
        return AlphaPolicy(
            mode="adaptive",
            alpha_base=base,
            criticality=args.criticality or problem.alpha_policy.criticality,
        )
    if args.alpha is not None:
        return AlphaPolicy(mode="fixed", alpha=args.alpha)
    if args.criticality is not None:
        policy = problem.alpha_policy
        return AlphaPolicy(
            mode=policy.mode,
            alpha=policy.alpha,
            alpha_base=policy.alpha_base,
            criticality=args.criticality,
        )
    return problem.alpha_policy


def _config_digest(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def cmd_plan(args) -> int:
    domain = parse_domain(Path(args.domain).read_text())
    problem = parse_problem(Path(args.problem).read_text(), domain)
    alpha_policy = _alpha_policy(args, problem)
    audit = AuditLog(args.audit) if args.audit else None
    oracle = _make_oracle(args, domain, audit=audit)
    policy = AggregationPolicy(k=args.k)
    config = SearchConfig(
        epsilon_d=args.epsilon_d,
        max_depth=args.max_depth,
        forward_beam=args.forward_beam,
        backward_beam=args.backward_beam,
        backward_agg=args.backward_agg,
        tnorm=TNorm(args.tnorm),
        seed=args.seed,
        chunking=args.chunking == "on",
    )
    macros = (
        build_macros(list(domain.actions.values()), domain.logic, domain.chunk_estimates)
        if config.chunking
        else {}
    )
    grounder = Grounder(
        domain.predicates,
        oracle,
        policy,
        tnorm_kind=config.tnorm,
        seed=args.seed,
        audit=audit,
    )
    result = bidirectional_plan(
        domain,
        problem,
        config,
        oracle,
        policy=policy,
        macros=macros,
        alpha_policy=alpha_policy,
        trace_path=args.trace,
        grounder=grounder,
    )
    provenance = {
        "oracle": args.oracle,
        "seed": args.seed,
        "tnorm": args.tnorm,
        "k": args.k,
        "chunking": args.chunking,
        "backward_agg": args.backward_agg,
        "alpha_mode": alpha_policy.mode,
        "config_digest": _config_digest(
            {
                "tnorm": args.tnorm,
                "k": args.k,
                "seed": args.seed,
                "epsilon_d": args.epsilon_d,
                "max_depth": args.max_depth,
                "chunking": args.chunking,
                "backward_agg": args.backward_agg,
            }
        ),
    }
    if args.audit and result.actions:
        audited = validate(
            domain,
            problem,
            result,
            config.tnorm,
            oracle,
            policy,
            seed=args.seed,
            macros=macros,
            alpha_policy=alpha_policy,
            record_samples=True,
        )
        provenance["grounding"] = audited.provenance.get("grounding", [])
    doc = plan_to_dict(result)
    doc["provenance"].update(provenance)
    Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if audit:
        audit.close()
    if result.accepted:
        print(
            f"accepted: mu={result.plan_mu:.6f} alpha={result.alpha_used:.6f} "
            f"steps={len(result.actions)} -> {args.out}"
        )
        return 0
    reason = result.failure_reason.value if result.failure_reason else "rejected"
    print(f"rejected ({reason}): mu={result.plan_mu:.6f} alpha={result.alpha_used:.6f} -> {args.out}")
    return 2


def cmd_validate(args) -> int:
    domain = parse_domain(Path(args.domain).read_text())
    problem = parse_problem(Path(args.problem).read_text(), domain)
    plan = parse_plan(Path(args.plan).read_text())
    provenance = dict(plan.provenance)
    if provenance.get("tnorm") and provenance["tnorm"] != args.tnorm:
        print(
            f"warning: validating with --tnorm {args.tnorm} but the plan was "
            f"produced under {provenance['tnorm']}",
            file=sys.stderr,
        )
    chunking = args.chunking
    if chunking is None:
        chunking = provenance.get("chunking", "off")
    macros = (
        build_macros(list(domain.actions.values()), domain.logic, domain.chunk_estimates)
        if chunking == "on"
        else {}
    )
    audit = AuditLog(args.audit) if args.audit else None
    oracle = _make_oracle(args, domain, audit=audit)
    alpha_policy = _alpha_policy(args, problem)
    result = validate(
        domain,
        problem,
        plan,
        TNorm(args.tnorm),
        oracle,
        AggregationPolicy(k=args.k),
        seed=args.seed,
        macros=macros,
        alpha_policy=alpha_policy,
        record_samples=bool(args.audit),
    )
    for i, (segment, degree) in enumerate(zip(result.segments, result.step_degrees), 1):
        label = segment.macro or segment.actions[0]
        print(f"step {i}: {label} degree={degree!r}")
    print(f"plan_mu={result.plan_mu!r} alpha={result.alpha_used!r}")
    for violation in result.violations:
        print(f"violation [{violation.kind.value}]: {violation.description}")
    if audit:
        audit.close()
    if result.accepted:
        print("accepted")
        return 0
    print(f"rejected ({result.failure_reason.value})")
    return 2


def _load_state(path: str, domain) -> State:
    doc = json.loads(Path(path).read_text())
    if "initial" in doc:
        doc = doc["initial"]
    resources = {name: 0.0 for name in domain.resources}
    resources.update(doc.get("resources", {}))
    return State(
        resources=resources,
        facts=frozenset(doc.get("facts", [])),
        logic=domain.logic,
        time=TimeBudget(float(doc.get("elapsed", 0.0))),
    )


def cmd_ground(args) -> int:
    domain = parse_domain(Path(args.domain).read_text())
    predicate = domain.predicates.get(args.predicate)
    if predicate is None:
        raise FuzzyPlanError(f"unknown predicate {args.predicate!r}")
    action = domain.actions.get(args.action)
    if action is None:
        raise FuzzyPlanError(f"unknown action {args.action!r}")
    state = _load_state(args.state, domain)
    audit = AuditLog(args.audit) if args.audit else None
    oracle = _make_oracle(args, domain, audit=audit)
    if args.oracle == "llm":
        print("prompt:")
        print(render_prompt(predicate, state, action))
    grounder = Grounder(
        domain.predicates,
        oracle,
        AggregationPolicy(k=args.k),
        seed=args.seed,
        audit=audit,
        record_samples=True,
    )
    degree = grounder.ground(predicate, state, action)
    record = grounder.records[-1]
    for i, sample in enumerate(record.samples):
        print(f"sample {i}: {sample!r}")
    print(f"aggregate (median of {args.k}): {degree!r}")
    if audit:
        audit.close()
    return 0


def cmd_bench(args) -> int:
    ablate = []
    for item in args.ablate:
        ablate.extend(part.strip() for part in item.split(",") if part.strip())
    base = {
        axis: getattr(args, axis.replace("-", "_")) for axis in bench_mod.BASE_CONFIG
    }
    base["k"] = int(base["k"])
    records = bench_mod.run_bench(
        args.suite,
        ablate=ablate,
        seed=args.seed,
        base=base,
        noise_std=args.noise_std,
        jobs=args.jobs,
    )
    csv_text = bench_mod.records_to_csv(records)
    Path(args.out).write_text(csv_text)
    summary = bench_mod.summary_table(records)
    print(summary)
    if args.summary_out:
        Path(args.summary_out).write_text(summary + "\n")
    print(f"{len(records)} records -> {args.out}")
    return 0


def cmd_suite(args) -> int:
    manifest = bench_mod.generate_suite(
        args.out,
        seed=args.seed,
        replicates=args.replicates,
        noise_std=args.noise_std,
        alpha=args.alpha,
    )
    print(f"{len(manifest['instances'])} instances -> {args.out}")
    return 0


_COMMANDS = {
    "plan": cmd_plan,
    "validate": cmd_validate,
    "ground": cmd_ground,
    "bench": cmd_bench,
    "suite": cmd_suite,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except FuzzyPlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for path, message in getattr(exc, "errors", []) or []:
            print(f"  at {path}: {message}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
