"""Structural and empirical game complexity features.

Most measures are computed over the subset of rules responsible for a given
concept: the ``_NEXT`` subset (rules reachable backward from a ``next``
head) or the ``_LEGAL`` subset (same for ``legal``). Counting happens on
the unsplit rule bodies: an ``or`` group is one condition (tallied
separately), ``distinct`` is one condition with two arguments.

The empirical features (average fact count, state diff, convergence) come
from seeded playouts, so they are deterministic per seed. Annotated
semantic properties (2D board, point counting, ...) are inputs, never
computed here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .kif import (
    DISTINCT,
    NEGATED,
    OR_GROUP,
    POSITIVE,
    GameDescription,
    Literal,
    term_name,
)
from .simulator import random_playout

NEXT = "next"
LEGAL = "legal"

ANNOTATION_KEYS = (
    "2D Board?",
    '"Connection game" elements?',
    "Point counting?",
    "Offboard resource management?",
    "Has truly simultaneous moves?",
)


# ---------------------------------------------------------------------------
# Dependency graph
# ---------------------------------------------------------------------------

@dataclass
class DependencyGraph:
    nodes: frozenset
    edges: tuple  # (head_rel, body_rel, negative)

    def body_relations(self, rel: str) -> set:
        return {b for h, b, _ in self.edges if h == rel}


def _literal_relations(lit: Literal):
    """(relation, negative) pairs referenced by one body condition."""
    if lit.form == POSITIVE:
        yield term_name(lit.term), False
    elif lit.form == NEGATED:
        yield term_name(lit.term), True
    elif lit.form == OR_GROUP:
        for b in lit.branches:
            yield from _literal_relations(b)
    # distinct is a builtin comparison, not a relation reference


def dependency_graph(desc: GameDescription) -> DependencyGraph:
    nodes = set()
    edges = []
    for rule in desc.rules:
        nodes.add(rule.head_relation)
        for lit in rule.body:
            for rel, neg in _literal_relations(lit):
                nodes.add(rel)
                edges.append((rule.head_relation, rel, neg))
    return DependencyGraph(frozenset(nodes), tuple(edges))


def rule_subset(desc: GameDescription, target: str) -> tuple:
    """All rules whose head relation is reachable backward from `target`
    (``next`` or ``legal``) through body dependencies, target rules included."""
    if target not in (NEXT, LEGAL):
        raise ValueError("target must be 'next' or 'legal'")
    by_head: dict = {}
    for rule in desc.rules:
        by_head.setdefault(rule.head_relation, []).append(rule)
    reachable = {target}
    frontier = [target]
    while frontier:
        rel = frontier.pop()
        for rule in by_head.get(rel, ()):
            for lit in rule.body:
                for dep, _neg in _literal_relations(lit):
                    if dep not in reachable:
                        reachable.add(dep)
                        frontier.append(dep)
    return tuple(r for r in desc.rules if r.head_relation in reachable)


# ---------------------------------------------------------------------------
# Per-condition measures
# ---------------------------------------------------------------------------

def _leaf_args(term) -> int:
    """Constant/variable occurrences in argument positions, functors excluded."""
    if isinstance(term, str):
        return 0
    count = 0
    for arg in term[1:]:
        count += 1 if isinstance(arg, str) else _leaf_args(arg)
    return count


def condition_arguments(lit: Literal) -> int:
    if lit.form == POSITIVE or lit.form == NEGATED:
        return _leaf_args(lit.term)
    if lit.form == DISTINCT:
        return 2
    return max(condition_arguments(b) for b in lit.branches)


def _count_literals(body, form) -> int:
    n = 0
    for lit in body:
        if lit.form == form:
            n += 1
        if lit.form == OR_GROUP:
            n += _count_literals(lit.branches, form)
    return n


def _h_index(sizes) -> int:
    ranked = sorted(sizes, reverse=True)
    h = 0
    for i, s in enumerate(ranked, start=1):
        if s >= i:
            h = i
        else:
            break
    return h


# ---------------------------------------------------------------------------
# Rule depth on the SCC condensation
# ---------------------------------------------------------------------------

def _sccs(nodes, succ):
    import networkx as nx

    g = nx.DiGraph()
    g.add_nodes_from(nodes)
    for a, bs in succ.items():
        for b in bs:
            g.add_edge(a, b)
    member = {}
    for i, comp in enumerate(nx.strongly_connected_components(g)):
        for rel in comp:
            member[rel] = i
    return member


def _rule_depths(rules) -> dict:
    """Depth per rule: 0 when no body relation is rule-defined, otherwise one
    more than the deepest defining rule of any lower body relation. Recursion
    adds no extra depth: dependencies inside the head's own SCC are skipped,
    so cycle members take their depth from non-cyclic paths."""
    defined = {}
    succ: dict = {}
    for rule in rules:
        defined.setdefault(rule.head_relation, []).append(rule)
        deps = succ.setdefault(rule.head_relation, set())
        for lit in rule.body:
            for rel, _ in _literal_relations(lit):
                deps.add(rel)
    nodes = set(succ)
    for deps in succ.values():
        nodes |= deps
    member = _sccs(nodes, succ)

    rel_depth: dict = {}

    def relation_depth(rel):
        if rel not in defined:
            return None
        if rel in rel_depth:
            return rel_depth[rel]
        rel_depth[rel] = 0  # provisional for cycles
        best = 0
        for rule in defined[rel]:
            best = max(best, one_rule_depth(rule))
        rel_depth[rel] = best
        return best

    def one_rule_depth(rule):
        depth = 0
        head_scc = member[rule.head_relation]
        for lit in rule.body:
            for rel, _ in _literal_relations(lit):
                if rel not in defined:
                    continue
                if member.get(rel) == head_scc:
                    continue
                sub = relation_depth(rel)
                depth = max(depth, 1 + sub)
        return depth

    return {id(rule): one_rule_depth(rule) for rule in rules}


# ---------------------------------------------------------------------------
# Feature extraction
# ---------------------------------------------------------------------------

def _subset_features(desc: GameDescription, target: str, suffix: str) -> dict:
    subset = rule_subset(desc, target)
    conditions = [len(r.body) for r in subset]
    args = [condition_arguments(l) for r in subset for l in r.body]

    body_rels = set()
    for r in subset:
        for lit in r.body:
            for rel, _ in _literal_relations(lit):
                body_rels.add(rel)
    constant_facts = {f for f in desc.static_facts if term_name(f) in body_rels}

    top = [r for r in subset if r.head_relation == target]
    if target == NEXT:
        top_types = {term_name(r.head[1]) for r in top}
    else:
        top_types = {term_name(r.head[2]) if len(r.head) > 2 else "" for r in top}

    depths = _rule_depths(list(subset))
    depth_values = [depths[id(r)] for r in subset]

    member = None
    recurrent = 0
    if subset:
        succ: dict = {}
        for r in subset:
            deps = succ.setdefault(r.head_relation, set())
            for lit in r.body:
                for rel, _ in _literal_relations(lit):
                    deps.add(rel)
        nodes = set(succ)
        for deps in succ.values():
            nodes |= deps
        member = _sccs(nodes, succ)
        for r in subset:
            head_scc = member[r.head_relation]
            rels = {
                rel
                for lit in r.body
                for rel, _ in _literal_relations(lit)
            }
            if any(member.get(rel) == head_scc for rel in rels):
                recurrent += 1

    def avg(values):
        return round(sum(values) / len(values), 4) if values else 0.0

    return {
        f"Total rules{suffix}": len(subset),
        f"Total conditions{suffix}": sum(conditions),
        f"Total constant facts{suffix}": len(constant_facts),
        f"Top level rules{suffix}": len(top),
        f"Top level rule types{suffix}": len(top_types),
        f"Max conditions per rule{suffix}": max(conditions, default=0),
        f"Avg conditions per rule{suffix}": avg(conditions),
        f"Max arguments per condition{suffix}": max(args, default=0),
        f"Avg arguments per condition{suffix}": avg(args),
        f"Max rule depth{suffix}": max(depth_values, default=0),
        f"Avg rule depth{suffix}": avg(depth_values),
        f"Rules 'H-Index'{suffix}": _h_index(conditions),
        f"Conditions 'H-Index'{suffix}": _h_index(args),
        f"Negative conditions{suffix}": sum(_count_literals(r.body, NEGATED) for r in subset),
        f"Or conditions{suffix}": sum(_count_literals(r.body, OR_GROUP) for r in subset),
        f"Recurrent rules{suffix}": recurrent,
    }


def structural_features(desc: GameDescription) -> dict:
    """The statically computed feature set (renaming-invariant by design)."""
    out = {}
    out.update(_subset_features(desc, NEXT, "_NEXT"))
    out.update(_subset_features(desc, LEGAL, "_LEGAL"))
    out["No. of Players"] = len(desc.roles)
    return out


def empirical_features(
    desc: GameDescription,
    playout_count: int = 20,
    max_steps: int = 25,
    seed: int = 0,
) -> dict:
    """Average fact count per visited state, average facts added+removed per
    transition, and convergence (1 when no sampled transition ever removes a
    fact)."""
    if playout_count < 1:
        raise ValueError("playout_count must be >= 1")
    sizes = []
    diffs = []
    converging = 1
    for k in range(playout_count):
        playout = random_playout(desc, seed * 1009 + k, max_steps)
        states = playout.states
        sizes.extend(len(s) for s in states)
        for a, b in zip(states, states[1:]):
            removed = a - b
            diffs.append(len(b - a) + len(removed))
            if removed:
                converging = 0
    return {
        "Avg FactCount": round(sum(sizes) / len(sizes), 4),
        "Diff Heuristic": round(sum(diffs) / len(diffs), 4) if diffs else 0.0,
        "Converging?": converging,
    }


def game_features(
    desc: GameDescription,
    annotations: dict | None = None,
    playout_count: int = 20,
    max_steps: int = 25,
    seed: int = 0,
) -> dict:
    """Full feature row: structural + empirical + annotated inputs."""
    row = {"Game": desc.source_name}
    row.update(structural_features(desc))
    row.update(empirical_features(desc, playout_count, max_steps, seed))
    if annotations:
        for key in ANNOTATION_KEYS:
            if key in annotations:
                row[key] = int(bool(annotations[key]))
    return row


def load_annotations(path) -> dict:
    """Annotation file: JSON object keyed by game name; values map the
    annotation keys to booleans. These are human inputs, never computed."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    for game, ann in data.items():
        unknown = set(ann) - set(ANNOTATION_KEYS)
        if unknown:
            raise ValueError(f"{game}: unknown annotation keys {sorted(unknown)}")
    return data
