"""Exact GDL semantics under the closed-world assumption.

Evaluation is bottom-up and semi-naive: relations are stratified via the
predicate dependency graph (negation only across strata), each stratum is
saturated to its least fixed point, and within a stratum rules are re-fired
only against the delta of newly derived facts. The result is deterministic
regardless of rule order.

A derivation starts from the base facts
``{(true f)} ∪ {(does r a)} ∪ static_facts ∪ {(role r)}`` and closes them
under all rules; anything not derived is false.

Each evaluation is single-threaded and self-contained; descriptions are
immutable, so any number of evaluations may run concurrently over one
shared description.
"""

from __future__ import annotations

import logging
import weakref
from dataclasses import dataclass
from typing import Mapping, Optional

from .kif import (
    DISTINCT,
    NEGATED,
    OR_GROUP,
    POSITIVE,
    GameDescription,
    Literal,
    Term,
    is_ground,
    render,
    split_or_groups,
    term_name,
)

log = logging.getLogger(__name__)

State = frozenset
JointMove = Mapping[str, Term]

_BASE_RELATIONS = frozenset({"true", "does", "role"})


class EngineError(Exception):
    """Base class for evaluation errors."""


class NegativeCycle(EngineError):
    def __init__(self, relations):
        self.relations = tuple(sorted(relations))
        super().__init__(f"negation cycle through relations: {', '.join(self.relations)}")


class UnstratifiableOr(EngineError):
    def __init__(self, relations):
        self.relations = tuple(sorted(relations))
        super().__init__(
            f"'or' branch creates a negation cycle through: {', '.join(self.relations)}"
        )


class NonNumericGoal(EngineError):
    def __init__(self, role, value):
        self.role = role
        self.value = value
        super().__init__(f"goal value for {role} is not an integer: {render(value)}")


class MultipleGoalValues(EngineError):
    def __init__(self, role, values):
        self.role = role
        self.values = tuple(sorted(values))
        super().__init__(f"role {role} derives several goal values: {self.values}")


class MissingGoalValue(EngineError):
    def __init__(self, role):
        self.role = role
        super().__init__(f"terminal state derives no goal value for role {role}")


class BadJointMove(EngineError):
    pass


# ---------------------------------------------------------------------------
# Stratification
# ---------------------------------------------------------------------------

def _dependency_edges(rules):
    """(head_rel, body_rel, negative, via_or) for every rule body condition."""
    edges = []

    for rule in rules:
        for lit in rule.body:
            for rel, neg, via_or in _walk_literal(lit):
                edges.append((rule.head_relation, rel, neg, via_or))
    return edges


def _walk_literal(lit: Literal, via_or: bool = False):
    """(relation, negative, via_or) for one body condition; distinct is a
    builtin and depends on nothing."""
    if lit.form == POSITIVE:
        yield term_name(lit.term), False, via_or
    elif lit.form == NEGATED:
        yield term_name(lit.term), True, via_or
    elif lit.form == OR_GROUP:
        for b in lit.branches:
            yield from _walk_literal(b, True)


def _tarjan_sccs(nodes, successors):
    """Iterative Tarjan; SCCs come out in dependency-first order."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    sccs = []
    counter = [0]

    for start in nodes:
        if start in index:
            continue
        work = [(start, iter(successors.get(start, ())))]
        index[start] = low[start] = counter[0]
        counter[0] += 1
        stack.append(start)
        on_stack.add(start)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(successors.get(nxt, ()))))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                sccs.append(frozenset(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    return sccs


def stratify(rules):
    """Map each relation to a stratum index; base relations get stratum 0.

    Raises :class:`NegativeCycle` (or :class:`UnstratifiableOr` when the
    offending edge lives inside an ``or`` branch) if some relation depends
    negatively on itself.
    """
    edges = _dependency_edges(rules)
    nodes = set(_BASE_RELATIONS)
    succ: dict = {}
    for rule in rules:
        nodes.add(rule.head_relation)
    for h, b, _neg, _via in edges:
        nodes.add(h)
        nodes.add(b)
        succ.setdefault(h, []).append(b)

    sccs = _tarjan_sccs(sorted(nodes), succ)
    scc_of = {}
    for i, comp in enumerate(sccs):
        for rel in comp:
            scc_of[rel] = i

    for h, b, neg, via_or in edges:
        if neg and scc_of[h] == scc_of[b]:
            comp = sccs[scc_of[h]]
            raise UnstratifiableOr(comp) if via_or else NegativeCycle(comp)

    # Tarjan emits dependency-first, so the SCC index is a valid stratum.
    return {rel: scc_of[rel] for rel in nodes}, scc_of


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------

_STEP_POS = 0
_STEP_NEG = 1
_STEP_DISTINCT = 2


def _order_body(body, first: Optional[int]):
    """Greedy join order: start from `first` (delta literal) when given, then
    repeatedly take the positive literal with fewest unbound variables;
    negations and distinct checks run as soon as their variables are bound."""
    positives = [(i, l) for i, l in enumerate(body) if l.form == POSITIVE]
    checks = [(i, l) for i, l in enumerate(body) if l.form in (NEGATED, DISTINCT)]
    ordered = []
    bound: set = set()
    used = set()

    def flush_checks():
        for i, l in checks:
            if i in used:
                continue
            if l.variables() <= bound:
                used.add(i)
                if l.form == NEGATED:
                    ordered.append((_STEP_NEG, l.term, term_name(l.term), i))
                else:
                    ordered.append((_STEP_DISTINCT, l.pair, None, i))

    if first is not None:
        lit = body[first]
        ordered.append((_STEP_POS, lit.term, term_name(lit.term), first))
        used.add(first)
        bound |= lit.variables()
        flush_checks()

    while len(used) < len(body):
        best = None
        best_key = None
        for i, l in positives:
            if i in used:
                continue
            unbound = len(l.variables() - bound)
            key = (unbound, i)
            if best_key is None or key < best_key:
                best, best_key = (i, l), key
        if best is None:
            break
        i, l = best
        ordered.append((_STEP_POS, l.term, term_name(l.term), i))
        used.add(i)
        bound |= l.variables()
        flush_checks()
    flush_checks()
    return tuple(ordered)


@dataclass
class _Plan:
    head: Term
    steps: tuple
    delta_index: Optional[int]  # body index evaluated against the delta


class _CompiledRule:
    __slots__ = ("head", "head_rel", "body", "base_plan", "delta_plans")

    def __init__(self, head, body):
        self.head = head
        self.head_rel = term_name(head)
        self.body = body
        self.base_plan = _Plan(head, _order_body(body, None), None)
        self.delta_plans = []


class CompiledGame:
    """Rules split on `or`, stratified, and join-ordered once per description."""

    def __init__(self, desc: GameDescription):
        self.desc = desc
        split: list[_CompiledRule] = []
        for rule in desc.rules:
            for disjunct in split_or_groups(rule.body):
                split.append(_CompiledRule(rule.head, disjunct))
        self.strata_of, _ = stratify(desc.rules)
        n_strata = max(self.strata_of.values(), default=0) + 1
        self.strata: list[list[_CompiledRule]] = [[] for _ in range(n_strata)]
        for cr in split:
            stratum = self.strata_of[cr.head_rel]
            self.strata[stratum].append(cr)
            same = [
                i
                for i, lit in enumerate(cr.body)
                if lit.form == POSITIVE
                and self.strata_of.get(term_name(lit.term)) == stratum
            ]
            cr.delta_plans = [
                _Plan(cr.head, _order_body(cr.body, i), i) for i in same
            ]
        self._needed_cache: dict = {}

    def strata_for(self, targets) -> Optional[frozenset]:
        """Indices of strata needed to decide the target relations (backward
        closure over rule dependencies); None means all."""
        if targets is None:
            return None
        key = frozenset(targets)
        cached = self._needed_cache.get(key)
        if cached is not None:
            return cached
        deps: dict = {}
        for rule in self.desc.rules:
            entry = deps.setdefault(rule.head_relation, set())
            for lit in rule.body:
                for rel, _neg, _via in _walk_literal(lit):
                    entry.add(rel)
        needed = set()
        frontier = [t for t in key]
        seen = set(frontier)
        while frontier:
            rel = frontier.pop()
            stratum = self.strata_of.get(rel)
            if stratum is not None:
                needed.add(stratum)
            for dep in deps.get(rel, ()):
                if dep not in seen:
                    seen.add(dep)
                    frontier.append(dep)
        result = frozenset(needed)
        self._needed_cache[key] = result
        return result


_COMPILED: dict = {}


def _drop_compiled(key):
    try:
        _COMPILED.pop(key, None)
    except Exception:  # module globals may be gone at interpreter shutdown
        pass


def compile_game(desc: GameDescription) -> CompiledGame:
    key = id(desc)
    entry = _COMPILED.get(key)
    if entry is not None and entry[0]() is desc:
        return entry[1]
    compiled = CompiledGame(desc)
    _COMPILED[key] = (weakref.ref(desc, lambda _ref, k=key: _drop_compiled(k)), compiled)
    return compiled


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _substitute(t, env):
    if isinstance(t, str):
        return env[t] if t[0] == "?" else t
    return tuple(_substitute(x, env) for x in t)


def _match_into(pat, fact, env, trail) -> bool:
    if isinstance(pat, str):
        if pat[0] == "?":
            cur = env.get(pat)
            if cur is None:
                env[pat] = fact
                trail.append(pat)
                return True
            return cur == fact
        return pat == fact
    if type(fact) is not tuple or len(fact) != len(pat) or fact[0] != pat[0]:
        return False
    for p, f in zip(pat, fact):
        if p is f:
            continue
        if not _match_into(p, f, env, trail):
            return False
    return True


def _resolve(arg, env):
    """Ground value of a pattern argument under env, or None if unbound."""
    if isinstance(arg, str):
        if arg[0] == "?":
            return env.get(arg)
        return arg
    return arg if is_ground(arg) else None


class _FactStore:
    __slots__ = ("by_rel", "index1", "index2", "all_facts")

    def __init__(self):
        self.by_rel: dict = {}
        self.index1: dict = {}
        self.index2: dict = {}
        self.all_facts: set = set()

    def add(self, fact) -> bool:
        if fact in self.all_facts:
            return False
        self.all_facts.add(fact)
        rel = fact[0] if type(fact) is tuple else fact
        self.by_rel.setdefault(rel, []).append(fact)
        if type(fact) is tuple and len(fact) > 1:
            self.index1.setdefault((rel, fact[1]), []).append(fact)
            if len(fact) > 2:
                self.index2.setdefault((rel, fact[1], fact[2]), []).append(fact)
        return True

    def candidates(self, rel, pat, env):
        if isinstance(pat, tuple) and len(pat) > 1:
            a1 = _resolve(pat[1], env)
            if a1 is not None:
                if len(pat) > 2:
                    a2 = _resolve(pat[2], env)
                    if a2 is not None:
                        return self.index2.get((rel, a1, a2), ())
                return self.index1.get((rel, a1), ())
        return self.by_rel.get(rel, ())

    def holds(self, fact) -> bool:
        return fact in self.all_facts


def _run_plan(plan: _Plan, store: _FactStore, delta, out: list):
    steps = plan.steps
    head = plan.head
    env: dict = {}
    n = len(steps)

    def run(i):
        if i == n:
            out.append(_substitute(head, env))
            return
        kind, payload, rel, body_idx = steps[i]
        if kind == _STEP_POS:
            if plan.delta_index is not None and body_idx == plan.delta_index:
                source = delta
            else:
                source = store.candidates(rel, payload, env)
            for fact in source:
                trail: list = []
                if _match_into(payload, fact, env, trail):
                    run(i + 1)
                for v in trail:
                    del env[v]
        elif kind == _STEP_NEG:
            if not store.holds(_substitute(payload, env)):
                run(i + 1)
        else:  # distinct
            a, b = payload
            if _substitute(a, env) != _substitute(b, env):
                run(i + 1)

    run(0)


class DerivationResult:
    """All facts derivable from a state (closed under every rule)."""

    def __init__(self, store: _FactStore):
        self._store = store

    @property
    def derived(self) -> frozenset:
        return frozenset(self._store.all_facts)

    def relation(self, rel: str) -> tuple:
        return tuple(self._store.by_rel.get(rel, ()))

    def holds(self, fact) -> bool:
        return self._store.holds(fact)


def derive(
    desc: GameDescription,
    state: State,
    does: Optional[JointMove] = None,
    targets=None,
) -> DerivationResult:
    """Least fixed point of the rule set over the given state (and joint move).

    With `targets` (an iterable of relation names) only the strata those
    relations depend on are saturated; their extensions are identical to a
    full derivation, the rest is simply left uncomputed.
    """
    compiled = compile_game(desc)
    wanted = compiled.strata_for(targets)
    store = _FactStore()
    for f in desc.static_facts:
        store.add(f)
    for r in desc.roles:
        store.add(("role", r))
    for f in state:
        store.add(("true", f))
    if does is not None:
        if set(does) != set(desc.roles):
            raise BadJointMove(
                f"joint move roles {sorted(does)} != description roles {sorted(desc.roles)}"
            )
        for r, a in does.items():
            if not is_ground(a):
                raise BadJointMove(f"action for {r} is not ground: {render(a)}")
            store.add(("does", r, a))

    for index, stratum_rules in enumerate(compiled.strata):
        if not stratum_rules:
            continue
        if wanted is not None and index not in wanted:
            continue
        delta: list = []
        for cr in stratum_rules:
            out: list = []
            _run_plan(cr.base_plan, store, (), out)
            for fact in out:
                if store.add(fact):
                    delta.append(fact)
        while delta:
            new_delta: list = []
            for cr in stratum_rules:
                for plan in cr.delta_plans:
                    out = []
                    _run_plan(plan, store, delta, out)
                    for fact in out:
                        if store.add(fact):
                            new_delta.append(fact)
            delta = new_delta
    return DerivationResult(store)


# ---------------------------------------------------------------------------
# Game-level queries
# ---------------------------------------------------------------------------

def initial_state(desc: GameDescription) -> State:
    """The state holding exactly the description's `init` facts."""
    return frozenset(desc.init_facts)


def legal_moves(desc: GameDescription, state: State) -> dict:
    """role -> set of actions a with (legal role a) derivable."""
    result = derive(desc, state, targets=("legal",))
    moves: dict = {r: set() for r in desc.roles}
    for fact in result.relation("legal"):
        if type(fact) is tuple and len(fact) == 3 and fact[1] in moves:
            moves[fact[1]].add(fact[2])
    return {r: frozenset(v) for r, v in moves.items()}


def next_state(desc: GameDescription, state: State, joint: JointMove) -> State:
    """Successor state: exactly the t with (next t) derivable; everything
    else from the previous state is discarded."""
    result = derive(desc, state, joint, targets=("next",))
    return frozenset(f[1] for f in result.relation("next") if type(f) is tuple and len(f) == 2)


def is_terminal(desc: GameDescription, state: State) -> bool:
    return derive(desc, state, targets=("terminal",)).holds("terminal")


def goal_values(desc: GameDescription, state: State) -> dict:
    """role -> integer goal value.

    Multiple distinct values for one role raise; in a terminal state a role
    with no derivable goal raises too (missing goals are never defaulted).
    Values outside 0..100 are accepted with a warning.
    """
    result = derive(desc, state, targets=("goal", "terminal"))
    values: dict = {}
    for fact in result.relation("goal"):
        if not (type(fact) is tuple and len(fact) == 3):
            continue
        role, raw = fact[1], fact[2]
        if role not in desc.roles:
            continue
        try:
            v = int(raw)
        except (TypeError, ValueError):
            raise NonNumericGoal(role, raw)
        values.setdefault(role, set()).add(v)
    for role, vs in values.items():
        if len(vs) > 1:
            raise MultipleGoalValues(role, vs)
    out = {role: next(iter(vs)) for role, vs in values.items()}
    for role, v in out.items():
        if not 0 <= v <= 100:
            log.warning("goal value %d for role %s outside 0..100", v, role)
    if result.holds("terminal"):
        for role in desc.roles:
            if role not in out:
                raise MissingGoalValue(role)
    return out
