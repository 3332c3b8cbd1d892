"""Seeded playouts, benchmark-instance generation, and game selection.

Playouts draw one action per role uniformly from the legal sets using a
generator seeded from ``(game, seed)``, so every artifact here is
reproducible bit-for-bit. Benchmark instances re-validate against the
engine by construction: the stored legal sets and successor state are the
engine's own answers for the stored state.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass
from typing import Sequence

from . import engine
from .kif import GameDescription, parse_terms, render

log = logging.getLogger(__name__)

MAX_SAMPLED_DEPTH = 25


class SimulatorError(Exception):
    pass


class DeadEnd(SimulatorError):
    def __init__(self, step: int, role: str):
        self.step = step
        self.role = role
        super().__init__(f"no legal move for {role} in nonterminal state at step {step}")


class IllegalMoveAt(SimulatorError):
    def __init__(self, step: int, role: str, action):
        self.step = step
        self.role = role
        self.action = action
        super().__init__(f"step {step}: ({role} {render(action)}) is not legal")


class FewerThanKGames(SimulatorError):
    pass


class MissingModelScores(SimulatorError):
    pass


# ---------------------------------------------------------------------------
# Joint moves as text
# ---------------------------------------------------------------------------

def render_joint(joint, roles) -> str:
    """One (role action) pair per role, space separated, in role order."""
    return " ".join(f"({r} {render(joint[r])})" for r in roles)


def parse_joint(text: str, roles) -> dict:
    pairs = parse_terms(text)
    joint: dict = {}
    for p in pairs:
        if not isinstance(p, tuple) or len(p) < 2:
            raise SimulatorError(f"bad (role action) pair: {render(p)}")
        role = p[0]
        action = p[1] if len(p) == 2 else tuple(p[1:])
        if role in joint:
            raise SimulatorError(f"duplicate role in joint move: {role}")
        joint[role] = action
    if set(joint) != set(roles):
        raise SimulatorError(
            f"joint move covers {sorted(joint)}, description has {sorted(roles)}"
        )
    return {r: joint[r] for r in roles}


# ---------------------------------------------------------------------------
# Playouts
# ---------------------------------------------------------------------------

@dataclass
class Playout:
    game: str
    seed: int
    steps: list  # [(state, joint), ...] ending before the final state
    final_state: frozenset

    @property
    def states(self) -> list:
        return [s for s, _ in self.steps] + [self.final_state]


def _rng_for(desc: GameDescription, seed: int) -> random.Random:
    return random.Random(f"{desc.source_name}|{seed}")


def random_playout(desc: GameDescription, seed: int, max_steps: int) -> Playout:
    """Uniform random legal play from the initial state; stops at a terminal
    state or after max_steps joint moves, whichever comes first."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    rng = _rng_for(desc, seed)
    state = engine.initial_state(desc)
    steps = []
    for i in range(max_steps):
        if engine.is_terminal(desc, state):
            break
        legal = engine.legal_moves(desc, state)
        for role in desc.roles:
            if not legal[role]:
                raise DeadEnd(i, role)
        joint = {
            role: rng.choice(sorted(legal[role], key=render)) for role in desc.roles
        }
        steps.append((state, joint))
        state = engine.next_state(desc, state, joint)
    return Playout(desc.source_name, seed, steps, state)


# ---------------------------------------------------------------------------
# Benchmark instances (single-step tasks)
# ---------------------------------------------------------------------------

@dataclass
class BenchmarkInstance:
    game: str
    instance_id: str
    game_state: frozenset
    move: dict
    legal_moves: dict
    next_state: frozenset


def validate_instance(desc: GameDescription, inst: BenchmarkInstance) -> None:
    """Re-check the instance invariants against the engine."""
    legal = engine.legal_moves(desc, inst.game_state)
    if legal != inst.legal_moves:
        raise SimulatorError(f"{inst.instance_id}: stored legal sets disagree with engine")
    for role, action in inst.move.items():
        if action not in legal[role]:
            raise SimulatorError(f"{inst.instance_id}: stored move illegal for {role}")
    if engine.next_state(desc, inst.game_state, inst.move) != inst.next_state:
        raise SimulatorError(f"{inst.instance_id}: stored successor disagrees with engine")


def generate_step_instances(
    desc: GameDescription, count: int = 20, seed: int = 0
) -> list:
    """States sampled from distinct playout prefixes at uniformly drawn depths.

    20 per game matches the 0.05 granularity of the strict-success metric.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    instances = []
    seen = set()
    offset = 0
    while len(instances) < count:
        if offset > count * 50:
            raise SimulatorError(
                f"{desc.source_name}: could not sample {count} distinct instances"
            )
        playout_seed = seed * 100003 + offset
        offset += 1
        playout = random_playout(desc, playout_seed, MAX_SAMPLED_DEPTH + 1)
        if not playout.steps:
            raise SimulatorError(f"{desc.source_name}: initial state is terminal")
        rng = _rng_for(desc, playout_seed ^ 0x5EED)
        depth = rng.randint(0, min(len(playout.steps) - 1, MAX_SAMPLED_DEPTH))
        state, joint = playout.steps[depth]
        key = (state, tuple(sorted(joint.items())))
        if key in seen:
            continue
        seen.add(key)
        idx = len(instances)
        instances.append(
            BenchmarkInstance(
                game=desc.source_name,
                instance_id=f"{desc.source_name}_{idx:03d}",
                game_state=state,
                move=joint,
                legal_moves=engine.legal_moves(desc, state),
                next_state=engine.next_state(desc, state, joint),
            )
        )
    return instances


def instance_to_json(inst: BenchmarkInstance, roles) -> str:
    pooled = sorted(
        f"({r} {render(a)})" for r, acts in inst.legal_moves.items() for a in acts
    )
    doc = {
        "game": inst.game,
        "id": inst.instance_id,
        "game_state": render(inst.game_state),
        "move": render_joint(inst.move, roles),
        "legal_moves": "\n".join(pooled),
        "next_state": render(inst.next_state),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def instance_from_json(text: str, roles) -> BenchmarkInstance:
    doc = json.loads(text)
    legal: dict = {r: set() for r in roles}
    for line in doc["legal_moves"].splitlines():
        line = line.strip()
        if not line:
            continue
        (pair,) = parse_terms(line)
        action = pair[1] if len(pair) == 2 else tuple(pair[1:])
        legal[pair[0]].add(action)
    from .kif import parse_fact_set_strict

    return BenchmarkInstance(
        game=doc["game"],
        instance_id=doc["id"],
        game_state=parse_fact_set_strict(doc["game_state"]),
        move=parse_joint(doc["move"], roles),
        legal_moves={r: frozenset(v) for r, v in legal.items()},
        next_state=parse_fact_set_strict(doc["next_state"]),
    )


# ---------------------------------------------------------------------------
# Move sequences (multistep tasks)
# ---------------------------------------------------------------------------

@dataclass
class MoveSequence:
    game: str
    sequence_id: str
    joints: tuple  # tuple of joint-move dicts

    def __len__(self):
        return len(self.joints)


def generate_sequences(
    desc: GameDescription, count: int = 20, length: int = 15, seed: int = 0
) -> list:
    """Legal move sequences of exactly `length` steps with no terminal state
    before the last move. Playouts that end early are retried with a fresh
    seed offset; a game that cannot reach `length` is reported and skipped."""
    sequences = []
    offset = 0
    attempts = 0
    max_attempts = count * 60
    while len(sequences) < count and attempts < max_attempts:
        playout_seed = seed * 99991 + offset
        offset += 1
        attempts += 1
        playout = random_playout(desc, playout_seed, length)
        if len(playout.steps) < length:
            continue
        idx = len(sequences)
        sequences.append(
            MoveSequence(
                game=desc.source_name,
                sequence_id=f"{desc.source_name}_seq_{idx:03d}",
                joints=tuple(j for _, j in playout.steps),
            )
        )
    if len(sequences) < count:
        log.warning(
            "%s: only %d/%d sequences reach %d steps; game excluded from longer horizons",
            desc.source_name,
            len(sequences),
            count,
            length,
        )
    return sequences


def replay(desc: GameDescription, seq: MoveSequence, n: int) -> frozenset:
    """State after applying the first n joints from the initial state.

    Every joint is validated against the legal sets; an illegal joint means
    the fixture is corrupted and raises IllegalMoveAt.
    """
    if n > len(seq.joints):
        raise ValueError(f"horizon {n} exceeds sequence length {len(seq.joints)}")
    state = engine.initial_state(desc)
    for i in range(n):
        legal = engine.legal_moves(desc, state)
        joint = seq.joints[i]
        for role in desc.roles:
            if joint[role] not in legal[role]:
                raise IllegalMoveAt(i, role, joint[role])
        state = engine.next_state(desc, state, joint)
    return state


def sequence_to_json(seq: MoveSequence, roles) -> str:
    doc = {
        "game": seq.game,
        "id": seq.sequence_id,
        "moves": [render_joint(j, roles) for j in seq.joints],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def sequence_from_json(text: str, roles) -> MoveSequence:
    doc = json.loads(text)
    return MoveSequence(
        game=doc["game"],
        sequence_id=doc["id"],
        joints=tuple(parse_joint(m, roles) for m in doc["moves"]),
    )


# ---------------------------------------------------------------------------
# Game selection
# ---------------------------------------------------------------------------

@dataclass
class GameScores:
    """Preliminary per-game inputs to the selection procedure.

    model_scores holds the per-model mean scores sorted descending, so
    model_scores[0] is the best model's score for this game.
    """

    name: str
    model_scores: tuple
    avg_fact_count: float
    state_diff: float

    def __post_init__(self):
        if tuple(sorted(self.model_scores, reverse=True)) != tuple(self.model_scores):
            raise ValueError(f"{self.name}: model scores must be sorted descending")
        if any(not 0.0 <= s <= 1.0 for s in self.model_scores):
            raise ValueError(f"{self.name}: scores must lie in [0, 1]")


@dataclass
class SelectionResult:
    selected: tuple
    by_criterion: dict  # criterion -> top-k game names in rank order


def _spread(scores) -> float:
    s = scores.model_scores
    if len(s) < 3:
        raise MissingModelScores(
            f"{scores.name}: spread criterion needs at least three model scores"
        )
    return (s[0] - s[1]) + (s[0] - s[2])


def _sum_plus_product(scores) -> float:
    return sum(scores.model_scores) + math.prod(scores.model_scores)


def select_games(all_scores: Sequence[GameScores], k: int = 10) -> SelectionResult:
    """Union of the top-k lists under the five selection criteria.

    Criteria: largest average fact count, largest state diff, largest and
    smallest sum-plus-product of model scores, and largest top-model spread.
    Ties break on ascending game name so selection is a pure function of its
    inputs.
    """
    if len(all_scores) < k:
        raise FewerThanKGames(f"need at least {k} games, got {len(all_scores)}")

    def top(key, reverse):
        ranked = sorted(
            all_scores,
            key=lambda g: ((-key(g)) if reverse else key(g), g.name),
        )
        return [g.name for g in ranked[:k]]

    by_criterion = {
        "AvgFactCount": top(lambda g: g.avg_fact_count, True),
        "StateDiff": top(lambda g: g.state_diff, True),
        "HighEnd": top(_sum_plus_product, True),
        "LowEnd": top(_sum_plus_product, False),
        "Variance": top(_spread, True),
    }
    selected = sorted(set().union(*by_criterion.values()))
    return SelectionResult(selected=tuple(selected), by_criterion=by_criterion)
