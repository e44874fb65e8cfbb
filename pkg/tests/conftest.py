import json
import random

import pytest

from fuzzyplan.domain_io import parse_domain, parse_problem


def domain_text(doc) -> str:
    return json.dumps(doc)


def kitchen_domain_doc(fetch_degree=0.9, mix_degree=None, table_extra=None):
    """Three-step chain: fetch milk (graded), mix dough, bake. An extra
    shortcut action adds a forbidden atom to exercise the crisp gate."""
    table = {"suitable|fetch": fetch_degree, "suitable|shortcut": 0.99}
    if mix_degree is not None:
        table["quality|mix"] = mix_degree
    table.update(table_extra or {})
    return {
        "name": "kitchen",
        "resources": [{"name": "flour", "unit": "cup"}],
        "predicates": [
            {"id": "suitable", "rubric": "how suitable the fetched milk substitute is"},
            {"id": "quality", "rubric": "mixing quality"},
        ],
        "constraints": {"forbidden": ["allergen"]},
        "actions": [
            {
                "id": "fetch",
                "add_facts": ["have_milk"],
                "duration": 1.0,
                "graded_predicates": ["suitable"],
            },
            {
                "id": "shortcut",
                "add_facts": ["have_milk", "allergen"],
                "duration": 0.5,
                "graded_predicates": ["suitable"],
            },
            {
                "id": "mix",
                "resource_needs": {"flour": 1.0},
                "resource_deltas": {"flour": -1.0},
                "required_facts": ["have_milk"],
                "add_facts": ["dough"],
                "del_facts": ["have_milk"],
                "duration": 1.0,
                "graded_predicates": ["quality"] if mix_degree is not None else [],
            },
            {
                "id": "bake",
                "required_facts": ["dough"],
                "add_facts": ["cake"],
                "del_facts": ["dough"],
                "duration": 2.0,
            },
        ],
        "oracle": {"table": table, "default": 0.5},
    }


def kitchen_problem_doc(alpha=0.7, budget=10.0, flour=2.0):
    return {
        "name": "bake-a-cake",
        "initial": {"resources": {"flour": flour}, "facts": []},
        "budget": budget,
        "goal": {"required_facts": ["cake"]},
        "acceptance": {"mode": "fixed", "alpha": alpha},
    }


@pytest.fixture
def kitchen():
    domain = parse_domain(domain_text(kitchen_domain_doc()))
    problem = parse_problem(domain_text(kitchen_problem_doc()), domain)
    return domain, problem


ATOMS = ["f0", "f1", "f2", "f3", "f4", "f5"]


def random_small_instance(rng: random.Random):
    """A random instance with at most 4 actions (branching <= 4), suited to
    exhaustive cross-checking. Mixes solvable and unsolvable cases, graded
    and crisp actions, resource and time pressure, and occasionally a
    forbidden atom some action would add."""
    n_actions = rng.randint(2, 4)
    use_resource = rng.random() < 0.5
    forbidden = ["bad"] if rng.random() < 0.3 else []
    predicates = [{"id": "grade", "rubric": "graded fitness"}]
    table = {}
    actions = []
    for i in range(n_actions):
        aid = f"a{i}"
        pre = rng.sample(ATOMS, rng.randint(0, 2))
        add = rng.sample(ATOMS, rng.randint(1, 2))
        delete = [f for f in rng.sample(ATOMS, rng.randint(0, 1)) if f not in add]
        if forbidden and rng.random() < 0.25:
            add.append("bad")
        graded = rng.random() < 0.7
        if graded:
            table[f"grade|{aid}"] = round(rng.uniform(0.3, 1.0), 2)
        action = {
            "id": aid,
            "required_facts": pre,
            "add_facts": add,
            "del_facts": delete,
            "duration": round(rng.uniform(0.0, 2.0), 1),
            "graded_predicates": ["grade"] if graded else [],
        }
        if use_resource:
            action["resource_needs"] = {"fuel": round(rng.uniform(0.0, 1.0), 1)}
            action["resource_deltas"] = {"fuel": round(rng.uniform(-1.0, 0.5), 1)}
        actions.append(action)
    domain_doc = {
        "name": "random",
        "resources": [{"name": "fuel"}] if use_resource else [],
        "predicates": predicates,
        "constraints": {"forbidden": forbidden},
        "actions": actions,
        "oracle": {"table": table, "default": 0.5},
    }
    initial_facts = rng.sample(ATOMS, rng.randint(0, 2))
    # goal atoms must be mentioned somewhere; unreachable ones still occur
    # through ordering and deletes, keeping unsolvable cases in the mix
    mentioned = sorted(
        {f for a in actions for f in a["add_facts"] if f != "bad"} | set(initial_facts)
    )
    goal_atoms = rng.sample(mentioned, min(len(mentioned), rng.randint(1, 2)))
    alpha = round(rng.uniform(0.05, 0.95), 2)
    problem_doc = {
        "initial": {
            "resources": {"fuel": round(rng.uniform(1.0, 4.0), 1)} if use_resource else {},
            "facts": initial_facts,
        },
        "budget": round(rng.uniform(3.0, 12.0), 1) if rng.random() < 0.6 else None,
        "goal": {"required_facts": goal_atoms},
        "acceptance": {"mode": "fixed", "alpha": alpha},
    }
    return domain_doc, problem_doc, alpha


def parse_instance(domain_doc, problem_doc):
    domain = parse_domain(json.dumps(domain_doc))
    problem = parse_problem(json.dumps(problem_doc), domain)
    return domain, problem
