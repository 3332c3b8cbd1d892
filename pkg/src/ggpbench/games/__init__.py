"""Bundled GDL game corpus.

The 35 benchmark games plus classic tictactoe, stored as UTF-8 ``.kif``
files with ``;`` line comments. ``load_game`` parses by name;
``game_names`` lists what is available.
"""

from __future__ import annotations

import functools
from importlib import resources

from ..kif import GameDescription, parse_description

# The selection used for benchmark generation (tictactoe is bundled for the
# engine test-bed but is not part of the benchmark set).
BENCHMARK_GAMES = (
    "1reversi2",
    "battlebrushes",
    "beatMania",
    "bomberman2p",
    "bomberman2p_InvertedRoles",
    "buttons",
    "checkers",
    "checkers-mustjump",
    "checkers-newgoals",
    "checkersSmall",
    "checkersTiny",
    "chess",
    "chineseCheckers3",
    "cittaceot",
    "connectfour",
    "connectFourSuicide",
    "dotsAndBoxes",
    "dotsAndBoxesSuicide",
    "farmers",
    "fighter",
    "god",
    "mummymaze2p",
    "othello-comp2007",
    "othellosuicide",
    "pacman3p",
    "pawnWhopping",
    "platformJumpers",
    "qyshinsu",
    "rendezvous_asteroids",
    "rubikscube",
    "snake_2009_big",
    "snakeAssemblit",
    "ticTacToeLarge",
    "ticTacToeLargeSuicide",
    "wallmaze",
)


def game_names(include_extras: bool = False) -> tuple:
    names = list(BENCHMARK_GAMES)
    if include_extras:
        for entry in resources.files(__package__).iterdir():
            if entry.name.endswith(".kif"):
                stem = entry.name[:-4]
                if stem not in names:
                    names.append(stem)
    return tuple(names)


def game_source(name: str) -> str:
    path = resources.files(__package__) / f"{name}.kif"
    if not path.is_file():
        raise KeyError(f"no bundled game named {name!r}")
    return path.read_text(encoding="utf-8")


@functools.lru_cache(maxsize=None)
def load_game(name: str) -> GameDescription:
    return parse_description(game_source(name), source_name=name)
