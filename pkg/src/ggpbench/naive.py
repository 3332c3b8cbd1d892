"""Naive reference evaluator used for differential testing of the engine.

Deliberately shares no machinery with :mod:`ggpbench.engine`: rules are
split on `or` up front, stratification runs through networkx, and every
stratum is recomputed from scratch on each pass by scanning the full fact
set per body condition (no indexes, no deltas, environments copied instead
of trailed). Slow, but simple enough to trust.
"""

from __future__ import annotations

from typing import Optional

import networkx as nx

from .kif import (
    DISTINCT,
    NEGATED,
    POSITIVE,
    GameDescription,
    split_or_groups,
    term_name,
)


class NaiveUnstratifiable(Exception):
    pass


def _flat_rules(desc: GameDescription):
    out = []
    for rule in desc.rules:
        for body in split_or_groups(rule.body):
            out.append((rule.head, body))
    return out


def _strata(flat_rules):
    g = nx.DiGraph()
    negative = set()
    for head, body in flat_rules:
        h = term_name(head)
        g.add_node(h)
        for lit in body:
            if lit.form == POSITIVE:
                g.add_edge(h, term_name(lit.term))
            elif lit.form == NEGATED:
                b = term_name(lit.term)
                g.add_edge(h, b)
                negative.add((h, b))
    comp = list(nx.strongly_connected_components(g))
    member = {}
    for i, c in enumerate(comp):
        for rel in c:
            member[rel] = i
    for h, b in negative:
        if member[h] == member[b]:
            raise NaiveUnstratifiable(sorted(comp[member[h]]))
    cond = nx.condensation(g, scc=comp)
    order = list(nx.topological_sort(cond))
    # topological_sort puts dependents first; evaluate dependencies first.
    rank = {scc_id: len(order) - 1 - pos for pos, scc_id in enumerate(order)}
    return {rel: rank[member[rel]] for rel in member}


def _bind(pattern, fact, env):
    """Return an extended copy of env if pattern matches fact, else None."""
    if isinstance(pattern, str):
        if pattern.startswith("?"):
            if pattern in env:
                return env if env[pattern] == fact else None
            new = dict(env)
            new[pattern] = fact
            return new
        return env if pattern == fact else None
    if not isinstance(fact, tuple) or len(fact) != len(pattern) or fact[0] != pattern[0]:
        return None
    for p, f in zip(pattern[1:], fact[1:]):
        env = _bind(p, f, env)
        if env is None:
            return None
    return env


def _apply(term, env):
    if isinstance(term, str):
        return env.get(term, term)
    return tuple(_apply(x, env) for x in term)


def _solutions(body, facts, env):
    if not body:
        yield env
        return
    lit, rest = body[0], body[1:]
    if lit.form == POSITIVE:
        for fact in facts:
            new = _bind(lit.term, fact, env)
            if new is not None:
                yield from _solutions(rest, facts, new)
    elif lit.form == NEGATED:
        if _apply(lit.term, env) not in facts:
            yield from _solutions(rest, facts, env)
    elif lit.form == DISTINCT:
        if _apply(lit.pair[0], env) != _apply(lit.pair[1], env):
            yield from _solutions(rest, facts, env)
    else:  # pragma: no cover - or-groups were split away
        raise AssertionError("or-group survived splitting")


def _reorder(body):
    """Positive conditions first so negation and distinct see full bindings."""
    pos = [l for l in body if l.form == POSITIVE]
    rest = [l for l in body if l.form != POSITIVE]
    return tuple(pos + rest)


def naive_derive(desc: GameDescription, state, does: Optional[dict] = None) -> frozenset:
    flat = _flat_rules(desc)
    strata = _strata(flat)
    facts = set(desc.static_facts)
    facts.update(("role", r) for r in desc.roles)
    facts.update(("true", f) for f in state)
    if does is not None:
        facts.update(("does", r, a) for r, a in does.items())

    by_stratum: dict = {}
    for head, body in flat:
        by_stratum.setdefault(strata[term_name(head)], []).append((head, _reorder(body)))

    for s in sorted(by_stratum):
        changed = True
        while changed:
            changed = False
            snapshot = frozenset(facts)
            for head, body in by_stratum[s]:
                for env in _solutions(body, snapshot, {}):
                    fact = _apply(head, env)
                    if fact not in facts:
                        facts.add(fact)
                        changed = True
    return frozenset(facts)


def naive_legal_moves(desc: GameDescription, state) -> dict:
    derived = naive_derive(desc, state)
    moves = {r: set() for r in desc.roles}
    for f in derived:
        if isinstance(f, tuple) and len(f) == 3 and f[0] == "legal" and f[1] in moves:
            moves[f[1]].add(f[2])
    return {r: frozenset(v) for r, v in moves.items()}


def naive_next_state(desc: GameDescription, state, joint) -> frozenset:
    derived = naive_derive(desc, state, joint)
    return frozenset(
        f[1] for f in derived if isinstance(f, tuple) and len(f) == 2 and f[0] == "next"
    )


def naive_is_terminal(desc: GameDescription, state) -> bool:
    return "terminal" in naive_derive(desc, state)


def naive_goal_values(desc: GameDescription, state) -> dict:
    derived = naive_derive(desc, state)
    out: dict = {}
    for f in derived:
        if isinstance(f, tuple) and len(f) == 3 and f[0] == "goal" and f[1] in desc.roles:
            out.setdefault(f[1], set()).add(int(f[2]))
    return {r: min(v) if len(v) == 1 else sorted(v) for r, v in out.items()}
