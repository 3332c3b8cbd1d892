"""Scoring of parsed answers against engine ground truth, plus statistics.

The two headline metrics: per-instance Jaccard index between expected and
produced fact/move sets, and the strict success rate (share of instances
whose Jaccard is exactly 1). Answers that fail relaxed parsing, or that
contain an illegal action in generation tasks, score 0 in both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .kif import GameDescription, render
from .simulator import MoveSequence, replay

ZERO_UNPARSEABLE = "unparseable"
ZERO_ILLEGAL = "illegal_action"


class MetricsError(Exception):
    pass


class EmptyGroup(MetricsError):
    pass


class ConstantSeries(MetricsError):
    pass


class AllZeroDifferences(MetricsError):
    pass


# ---------------------------------------------------------------------------
# Jaccard and per-instance scoring
# ---------------------------------------------------------------------------

def jaccard(expected, produced) -> float:
    """|Y ∩ Y'| / |Y ∪ Y'|; two empty sets agree perfectly (1.0)."""
    expected = frozenset(expected)
    produced = frozenset(produced)
    union = expected | produced
    if not union:
        return 1.0
    return len(expected & produced) / len(union)


def diff_report(expected, produced):
    """(missing, superfluous) as sorted canonical renderings."""
    expected = frozenset(expected)
    produced = frozenset(produced)
    missing = sorted(render(t) for t in expected - produced)
    superfluous = sorted(render(t) for t in produced - expected)
    return missing, superfluous


@dataclass
class ScoreRecord:
    instance_id: str
    expected: frozenset
    produced: frozenset
    ji: float
    exact: bool
    zero_reason: Optional[str] = None

    def __post_init__(self):
        if self.zero_reason is not None and self.ji != 0.0:
            raise MetricsError("zero_reason set but score is nonzero")

    @property
    def missing(self) -> int:
        return len(self.expected - self.produced)

    @property
    def superfluous(self) -> int:
        return len(self.produced - self.expected)


def _scored(instance_id, expected, produced) -> ScoreRecord:
    ji = jaccard(expected, produced)
    return ScoreRecord(instance_id, frozenset(expected), frozenset(produced), ji, ji == 1.0)


def _zero(instance_id, expected, reason) -> ScoreRecord:
    return ScoreRecord(instance_id, frozenset(expected), frozenset(), 0.0, False, reason)


def score_instance(
    task: int,
    expected,
    answer,
    desc: Optional[GameDescription] = None,
    horizon: Optional[int] = None,
    instance_id: str = "",
) -> ScoreRecord:
    """Score one parsed answer.

    * task 1/3: `expected` is the ground-truth fact set, the answer's fact
      set is compared by Jaccard.
    * task 2: `expected` is the set of (role, action) pairs pooled across
      roles.
    * task 4: the answer's own move sequence is replayed on `desc`; any
      illegal joint zeroes the score, otherwise the engine state after the
      model's own moves is the ground truth for its claimed final state.
    """
    if answer.parse_status != "ok":
        return _zero(instance_id, expected if expected is not None else (), ZERO_UNPARSEABLE)

    if task in (1, 3):
        return _scored(instance_id, expected, answer.fact_set)
    if task == 2:
        return _scored(instance_id, expected, answer.move_pairs)
    if task == 4:
        if desc is None or horizon is None:
            raise MetricsError("task 4 scoring needs the game description and horizon")
        joints = answer.joints
        if len(joints) != horizon:
            return _zero(instance_id, (), ZERO_UNPARSEABLE)
        seq = MoveSequence(desc.source_name, instance_id, tuple(joints))
        try:
            final = replay(desc, seq, horizon)
        except Exception:
            return _zero(instance_id, (), ZERO_ILLEGAL)
        return _scored(instance_id, final, answer.fact_set)
    raise MetricsError(f"unknown task {task}")


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def aggregate(rows: Sequence[dict], group_by: Sequence[str]) -> list:
    """Mean Jaccard and strict success per group.

    Rows need `ji` and `exact` keys plus whatever keys `group_by` names.
    Returns one dict per group with `ji`, `pct_s` and `n` added.
    """
    if not rows:
        raise EmptyGroup("no score rows to aggregate")
    groups: dict = {}
    for row in rows:
        key = tuple(row[k] for k in group_by)
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        members = groups[key]
        entry = dict(zip(group_by, key))
        entry["ji"] = sum(r["ji"] for r in members) / len(members)
        entry["pct_s"] = sum(1 for r in members if r["exact"]) / len(members)
        entry["n"] = len(members)
        out.append(entry)
    return out


def grand_average(per_game_rows: Sequence[dict], value_key: str) -> float:
    """Average of per-game means: games are averaged first, then the game
    means are averaged, matching how the result tables report overall rows."""
    if not per_game_rows:
        raise EmptyGroup("no per-game rows")
    by_game: dict = {}
    for row in per_game_rows:
        by_game.setdefault(row["game"], []).append(row[value_key])
    return sum(sum(v) / len(v) for v in by_game.values()) / len(by_game)


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

@dataclass
class StatResult:
    kind: str
    statistic: float
    p_value: Optional[float] = None
    n_effective: Optional[int] = None


def pearson(x: Sequence[float], y: Sequence[float]) -> StatResult:
    """Sample Pearson correlation; refuses constant series."""
    if len(x) != len(y):
        raise MetricsError("series lengths differ")
    if len(x) < 3:
        raise MetricsError("need at least three points")
    ax = np.asarray(x, dtype=float)
    ay = np.asarray(y, dtype=float)
    sx = ax.std()
    sy = ay.std()
    if sx == 0.0 or sy == 0.0:
        raise ConstantSeries("correlation undefined for a constant series")
    r = float(((ax - ax.mean()) * (ay - ay.mean())).mean() / (sx * sy))
    return StatResult(kind="pearson", statistic=r)


def _rankdata(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _exact_two_sided(ranks, w_plus: float) -> float:
    """Exact signed-rank p over all sign assignments (handles midranks)."""
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(doubled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for d in doubled:
        nxt = counts[:]
        for s in range(total - d + 1):
            if counts[s]:
                nxt[s + d] += counts[s]
        counts = nxt
    n_assign = 2 ** len(ranks)
    w2 = int(round(2 * w_plus))
    t2 = min(w2, total - w2)
    lo = sum(counts[: t2 + 1])
    hi = sum(counts[total - t2 :])
    return min(1.0, (lo + hi) / n_assign)


def wilcoxon_signed_rank(
    pairs: Sequence[tuple],
    zero_method: str = "discard",
    exact_threshold: int = 12,
    tie_correction: bool = True,
    continuity: bool = True,
) -> StatResult:
    """Two-sided Wilcoxon signed-rank test on paired values.

    Zero differences are discarded by default (classic treatment); pass
    ``zero_method="pratt"`` to rank them before dropping. Ties get average
    ranks. The exact distribution is used for up to `exact_threshold`
    effective pairs, otherwise a normal approximation with tie and
    continuity correction (both switchable, since reported values in the
    literature often come from the plain textbook formula).
    """
    diffs = [float(a) - float(b) for a, b in pairs]
    nonzero = [d for d in diffs if d != 0.0]
    if not nonzero:
        raise AllZeroDifferences("every pair is tied")

    if zero_method == "discard":
        ranked_diffs = nonzero
        ranks = _rankdata([abs(d) for d in ranked_diffs])
    elif zero_method == "pratt":
        ranks_all = _rankdata([abs(d) for d in diffs])
        ranked_diffs = []
        ranks = []
        for d, r in zip(diffs, ranks_all):
            if d != 0.0:
                ranked_diffs.append(d)
                ranks.append(r)
    else:
        raise MetricsError(f"unknown zero_method {zero_method!r}")

    n_eff = len(ranked_diffs)
    w_plus = sum(r for d, r in zip(ranked_diffs, ranks) if d > 0)
    w_minus = sum(r for d, r in zip(ranked_diffs, ranks) if d < 0)
    statistic = min(w_plus, w_minus)

    if zero_method == "discard" and n_eff <= exact_threshold:
        p = _exact_two_sided(ranks, w_plus)
    else:
        mean = sum(ranks) / 2.0
        if tie_correction:
            var = sum(r * r for r in ranks) / 4.0
        else:
            var = n_eff * (n_eff + 1) * (2 * n_eff + 1) / 24.0
        if var == 0.0:
            raise AllZeroDifferences("degenerate rank variance")
        delta = abs(w_plus - mean)
        if continuity:
            delta = max(delta - 0.5, 0.0)
        z = delta / math.sqrt(var)
        p = min(1.0, 2.0 * (1.0 - _norm_cdf(z)))
    return StatResult(kind="wilcoxon", statistic=statistic, p_value=p, n_effective=n_eff)


def wilcoxon_rank_sum(xs: Sequence[float], ys: Sequence[float]) -> StatResult:
    """Two-sided Wilcoxon rank-sum test on two independent samples (normal
    approximation on the pooled ranks, as in the classic formulation).

    This is the unpaired sibling of the signed-rank test; model-hierarchy
    comparisons of per-game scores match the reported values under this
    variant.
    """
    if not xs or not ys:
        raise MetricsError("both samples must be nonempty")
    pooled = list(xs) + list(ys)
    ranks = _rankdata(pooled)
    n1, n2 = len(xs), len(ys)
    r1 = sum(ranks[:n1])
    mean = n1 * (n1 + n2 + 1) / 2.0
    var = n1 * n2 * (n1 + n2 + 1) / 12.0
    if var == 0.0:
        raise ConstantSeries("rank-sum variance is zero")
    z = (r1 - mean) / math.sqrt(var)
    p = min(1.0, 2.0 * (1.0 - _norm_cdf(abs(z))))
    return StatResult(kind="rank-sum", statistic=r1, p_value=p, n_effective=n1 + n2)


def _norm_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
