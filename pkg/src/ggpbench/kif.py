"""Parsing and rendering of GDL in prefix KIF notation.

Terms use a lightweight representation chosen for fast hashing and set
arithmetic in the evaluation engine:

* a constant is a plain ``str`` (``"white"``, ``"5"``),
* a variable is a ``str`` starting with ``?`` (``"?x"``),
* a compound is a ``tuple`` whose first element is the functor name and
  whose remaining elements are argument terms (``("cell", "1", "1", "b")``).

Rules, literals and whole game descriptions are small frozen dataclasses on
top of that. Everything produced by the parsers is immutable and safe to
share between threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

Term = Union[str, tuple]

GDL_KEYWORDS = frozenset(
    {"role", "init", "true", "next", "legal", "does", "goal", "terminal",
     "distinct", "or", "not", "<="}
)

# Relations that may never appear as a rule head.
_FORBIDDEN_HEADS = frozenset({"init", "true", "does", "role", "distinct", "or", "not", "<="})


class KifError(Exception):
    """Base class for description / fact-set syntax errors."""


class UnbalancedParens(KifError):
    def __init__(self, position: int, line: str | None = None):
        self.position = position
        self.line = line
        where = f"line {line!r}" if line is not None else f"offset {position}"
        super().__init__(f"unbalanced parentheses at {where}")


class EmptyExpression(KifError):
    def __init__(self, position: int):
        self.position = position
        super().__init__(f"empty expression '()' at offset {position}")


class SafetyViolation(KifError):
    def __init__(self, rule_index: int, variable: str):
        self.rule_index = rule_index
        self.variable = variable
        super().__init__(
            f"rule #{rule_index}: variable {variable} does not occur in any "
            f"positive body condition"
        )


class NoRoles(KifError):
    def __init__(self):
        super().__init__("description declares no roles")


class DescriptionError(KifError):
    """Structurally invalid description (bad heads, non-ground facts, ...)."""


class NonGroundFact(KifError):
    def __init__(self, line: str):
        self.line = line
        super().__init__(f"fact contains a variable: {line!r}")


class Unparseable(KifError):
    """Raised by the relaxed fact parser; carries the first offending line."""

    def __init__(self, line: str, reason: str = ""):
        self.line = line
        self.reason = reason
        msg = f"unparseable fact line: {line!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

def is_variable(t: Term) -> bool:
    return isinstance(t, str) and t.startswith("?")


def is_constant(t: Term) -> bool:
    return isinstance(t, str) and not t.startswith("?")


def is_compound(t: Term) -> bool:
    return isinstance(t, tuple)


def term_name(t: Term) -> str:
    """Functor name of a compound, or the symbol itself."""
    return t[0] if isinstance(t, tuple) else t


def term_args(t: Term) -> tuple:
    return t[1:] if isinstance(t, tuple) else ()


def is_ground(t: Term) -> bool:
    if isinstance(t, str):
        return not t.startswith("?")
    return all(is_ground(a) for a in t)


def variables_of(t: Term) -> set[str]:
    if isinstance(t, str):
        return {t} if t.startswith("?") else set()
    out: set[str] = set()
    for a in t[1:]:
        out |= variables_of(a)
    return out


def symbols_of(t: Term) -> Iterator[str]:
    """All symbol occurrences in a term (functor names, constants, variables)."""
    if isinstance(t, str):
        yield t
    else:
        yield t[0]
        for a in t[1:]:
            yield from symbols_of(a)


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------

POSITIVE = "positive"
NEGATED = "negated"
OR_GROUP = "or"
DISTINCT = "distinct"


@dataclass(frozen=True)
class Literal:
    """One body condition: positive or negated atom, or-group, or distinct."""

    form: str
    term: Term | None = None
    branches: tuple["Literal", ...] = ()
    pair: tuple[Term, Term] | None = None

    def variables(self) -> set[str]:
        if self.form in (POSITIVE, NEGATED):
            return variables_of(self.term)
        if self.form == DISTINCT:
            return variables_of(self.pair[0]) | variables_of(self.pair[1])
        out: set[str] = set()
        for b in self.branches:
            out |= b.variables()
        return out


@dataclass(frozen=True)
class Rule:
    head: Term
    body: tuple[Literal, ...]

    @property
    def head_relation(self) -> str:
        return term_name(self.head)


@dataclass(frozen=True)
class GameDescription:
    roles: tuple[str, ...]
    init_facts: frozenset
    static_facts: frozenset
    rules: tuple[Rule, ...]
    source_name: str = ""

    def relations_defined(self) -> frozenset:
        return frozenset(r.head_relation for r in self.rules)


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\(|\)|;[^\n]*|[^\s();]+")


def tokenize(text: str) -> list[tuple[str, int]]:
    """Split into '(' / ')' / symbol tokens with character offsets.

    Comments (from ';' to end of line) are dropped here; the obfuscator has
    its own layout-preserving tokenizer.
    """
    out = []
    for m in _TOKEN_RE.finditer(text):
        tok = m.group(0)
        if tok.startswith(";"):
            continue
        out.append((tok, m.start()))
    return out


def _parse_terms(tokens: list[tuple[str, int]]) -> list[Term]:
    """Parse a token stream into a list of top-level terms."""
    terms: list[Term] = []
    stack: list[tuple[list, int]] = []
    for tok, pos in tokens:
        if tok == "(":
            stack.append(([], pos))
        elif tok == ")":
            if not stack:
                raise UnbalancedParens(pos)
            items, open_pos = stack.pop()
            if not items:
                raise EmptyExpression(open_pos)
            if len(items) == 1 and isinstance(items[0], str):
                # '(f)' normalizes to the bare symbol f; compounds carry >= 1
                # argument by construction.
                node: Term = items[0]
            else:
                if not isinstance(items[0], str):
                    raise DescriptionError(
                        f"compound functor must be a symbol, got {items[0]!r}"
                    )
                node = tuple(items)
            if stack:
                stack[-1][0].append(node)
            else:
                terms.append(node)
        else:
            if stack:
                stack[-1][0].append(tok)
            else:
                terms.append(tok)
    if stack:
        raise UnbalancedParens(stack[-1][1])
    return terms


def parse_terms(text: str) -> list[Term]:
    """All top-level terms in a chunk of KIF text."""
    return _parse_terms(tokenize(text))


# ---------------------------------------------------------------------------
# Description parsing
# ---------------------------------------------------------------------------

def _parse_literal(t: Term) -> Literal:
    if isinstance(t, tuple):
        head = t[0]
        if head == "not":
            if len(t) != 2:
                raise DescriptionError(f"'not' takes exactly one condition: {render(t)}")
            inner = t[1]
            if isinstance(inner, tuple) and inner[0] in ("not", "or"):
                raise DescriptionError(f"'not' must wrap a plain condition: {render(t)}")
            return Literal(NEGATED, term=inner)
        if head == "or":
            if len(t) < 3:
                raise DescriptionError(f"'or' needs at least two branches: {render(t)}")
            return Literal(OR_GROUP, branches=tuple(_parse_literal(b) for b in t[1:]))
        if head == "distinct":
            if len(t) != 3:
                raise DescriptionError(f"'distinct' takes exactly two terms: {render(t)}")
            return Literal(DISTINCT, pair=(t[1], t[2]))
    return Literal(POSITIVE, term=t)


def split_or_groups(body: tuple[Literal, ...]) -> list[tuple[Literal, ...]]:
    """Expand or-groups into the cartesian product of plain conjunctions."""
    expanded: list[list[Literal]] = [[]]
    for lit in body:
        if lit.form == OR_GROUP:
            choices = []
            for branch in lit.branches:
                if branch.form == OR_GROUP:
                    for sub in split_or_groups((branch,)):
                        choices.append(list(sub))
                else:
                    choices.append([branch])
            expanded = [pre + c for pre in expanded for c in choices]
        else:
            expanded = [pre + [lit] for pre in expanded]
    return [tuple(b) for b in expanded]


def _check_safety(rule: Rule, index: int) -> None:
    for disjunct in split_or_groups(rule.body):
        positive_vars: set[str] = set()
        for lit in disjunct:
            if lit.form == POSITIVE:
                positive_vars |= variables_of(lit.term)
        need = variables_of(rule.head)
        for lit in disjunct:
            if lit.form == NEGATED:
                need |= variables_of(lit.term)
            elif lit.form == DISTINCT:
                need |= variables_of(lit.pair[0]) | variables_of(lit.pair[1])
        for v in sorted(need):
            if v not in positive_vars:
                raise SafetyViolation(index, v)


def parse_description(text: str, source_name: str = "") -> GameDescription:
    """Parse a whole GDL file into roles, init facts, static facts and rules.

    Whitespace and comment placement never affect the result; rule safety is
    verified on load.
    """
    sentences = parse_terms(text)
    roles: list[str] = []
    init_facts: set = set()
    static_facts: set = set()
    rules: list[Rule] = []

    for s in sentences:
        if isinstance(s, tuple) and s[0] == "role":
            if len(s) != 2 or not is_constant(s[1]):
                raise DescriptionError(f"bad role declaration: {render(s)}")
            if s[1] in roles:
                raise DescriptionError(f"duplicate role: {s[1]}")
            roles.append(s[1])
        elif isinstance(s, tuple) and s[0] == "init":
            if len(s) != 2:
                raise DescriptionError(f"'init' takes exactly one fact: {render(s)}")
            if not is_ground(s[1]):
                raise NonGroundFact(render(s))
            init_facts.add(s[1])
        elif isinstance(s, tuple) and s[0] == "<=":
            if len(s) < 2:
                raise DescriptionError("rule without a head")
            head = s[1]
            if term_name(head) in _FORBIDDEN_HEADS:
                raise DescriptionError(
                    f"reserved keyword {term_name(head)!r} may not head a rule"
                )
            body = tuple(_parse_literal(b) for b in s[2:])
            rule = Rule(head=head, body=body)
            _check_safety(rule, len(rules))
            rules.append(rule)
        else:
            if not is_ground(s):
                raise NonGroundFact(render(s))
            static_facts.add(s)

    if not roles:
        raise NoRoles()
    return GameDescription(
        roles=tuple(roles),
        init_facts=frozenset(init_facts),
        static_facts=frozenset(static_facts),
        rules=tuple(rules),
        source_name=source_name,
    )


# ---------------------------------------------------------------------------
# Fact-set parsing
# ---------------------------------------------------------------------------

def _parse_fact_line(line: str) -> list[Term]:
    tokens = tokenize(line)
    try:
        terms = _parse_terms(tokens)
    except UnbalancedParens:
        raise UnbalancedParens(0, line=line)
    # A bare symbol is only a fact when it stands alone on its line; a symbol
    # glued to a parenthesis ("score(blue 5)") is bracket misuse.
    if len(terms) > 1 and any(isinstance(t, str) for t in terms):
        raise Unparseable(line, "stray symbol outside parentheses")
    return terms


def parse_fact_set_strict(text: str) -> frozenset:
    """Ground facts, one per line or whitespace-separated; duplicates collapse."""
    facts: set = set()
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith(";"):
            continue
        for t in _parse_fact_line(line):
            if not is_ground(t):
                raise NonGroundFact(line)
            facts.add(t)
    return frozenset(facts)


_FENCE_RE = re.compile(r"^```[\w-]*\s*$")


def parse_fact_set_relaxed(text: str) -> frozenset:
    """Fact-set parsing for model output.

    Commas count as whitespace and surrounding markdown fences are stripped;
    the prefix-paren syntax itself is still required. Raises
    :class:`Unparseable` (carrying the first offending line) on any failure;
    callers map that to a score of zero.
    """
    facts: set = set()
    for raw in text.splitlines():
        line = raw.strip()
        if not line or _FENCE_RE.match(line):
            continue
        cleaned = line.replace(",", " ").strip()
        if not cleaned:
            continue
        try:
            terms = _parse_fact_line(cleaned)
        except (UnbalancedParens, EmptyExpression, DescriptionError):
            raise Unparseable(line)
        for t in terms:
            if not is_ground(t):
                raise Unparseable(line, "variable in fact")
            facts.add(t)
    return frozenset(facts)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def render(value) -> str:
    """Canonical single-space prefix form.

    Sets/iterables of terms render sorted lexicographically, one per line, so
    rendering is a stable on-disk format: ``parse(render(x)) == x``.
    """
    if isinstance(value, str):
        return value
    if isinstance(value, tuple):
        return "(" + " ".join(render(v) for v in value) + ")"
    if isinstance(value, (set, frozenset, list)):
        return "\n".join(sorted(render(v) for v in value))
    raise TypeError(f"cannot render {type(value).__name__}")


def render_literal(lit: Literal) -> str:
    if lit.form == POSITIVE:
        return render(lit.term)
    if lit.form == NEGATED:
        return f"(not {render(lit.term)})"
    if lit.form == DISTINCT:
        return f"(distinct {render(lit.pair[0])} {render(lit.pair[1])})"
    return "(or " + " ".join(render_literal(b) for b in lit.branches) + ")"


def render_rule(rule: Rule) -> str:
    if not rule.body:
        return f"(<= {render(rule.head)})"
    body = " ".join(render_literal(l) for l in rule.body)
    return f"(<= {render(rule.head)} {body})"


def render_description(desc: GameDescription) -> str:
    """Whole-description rendering that reparses to an identical description."""
    parts = [f"(role {r})" for r in desc.roles]
    parts += sorted(f"(init {render(f)})" for f in desc.init_facts)
    parts += sorted(render(f) for f in desc.static_facts)
    parts += [render_rule(r) for r in desc.rules]
    return "\n".join(parts) + "\n"
