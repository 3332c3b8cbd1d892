"""General Game Playing workbench.

Parse GDL game descriptions, execute their semantics exactly, generate
forward-simulation benchmark instances, obfuscate symbol vocabularies,
extract structural complexity features, score model output against engine
ground truth, and run the accompanying statistics.
"""

from .kif import (
    GameDescription,
    Literal,
    Rule,
    parse_description,
    parse_fact_set_relaxed,
    parse_fact_set_strict,
    render,
)
from .engine import (
    derive,
    goal_values,
    initial_state,
    is_terminal,
    legal_moves,
    next_state,
)
from .games import game_names, load_game

__all__ = [
    "GameDescription",
    "Literal",
    "Rule",
    "parse_description",
    "parse_fact_set_relaxed",
    "parse_fact_set_strict",
    "render",
    "derive",
    "goal_values",
    "initial_state",
    "is_terminal",
    "legal_moves",
    "next_state",
    "game_names",
    "load_game",
]

__version__ = "0.1.0"
