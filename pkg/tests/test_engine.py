"""Engine semantics tests: derivation, queries, stratification, errors."""

import logging

import pytest

from ggpbench.engine import (
    BadJointMove,
    MissingGoalValue,
    MultipleGoalValues,
    NegativeCycle,
    NonNumericGoal,
    UnstratifiableOr,
    derive,
    goal_values,
    initial_state,
    is_terminal,
    legal_moves,
    next_state,
)
from ggpbench.games import load_game
from ggpbench.kif import parse_description, parse_fact_set_strict, render


def desc_of(text):
    return parse_description(text)


class TestInitialState:
    def test_tictactoe_init(self):
        ttt = load_game("tictactoe")
        state = initial_state(ttt)
        assert len(state) == 10
        blanks = {f for f in state if f[0] == "cell"}
        assert len(blanks) == 9 and all(f[3] == "b" for f in blanks)
        assert ("control", "xplayer") in state

    def test_no_init_sentences(self):
        assert initial_state(desc_of("(role p)(<= terminal (true over))")) == frozenset()

    def test_checkers_tiny_has_light_square_facts(self):
        tiny = load_game("checkersTiny")
        light = {
            f
            for f in initial_state(tiny)
            if f[0] == "cell" and (int(f[1]) + int(f[2])) % 2 == 1
        }
        assert light, "initial position must spell out the light squares"


class TestDerive:
    def test_column_derivation(self):
        ttt = load_game("tictactoe")
        state = parse_fact_set_strict(
            "(cell 1 2 x)\n(cell 2 2 x)\n(cell 3 2 x)\n(control oplayer)"
        )
        assert ("column", "2", "x") in derive(ttt, state).derived

    def test_empty_rule_set_fixed_point(self):
        desc = desc_of("(role p)(succ 1 2)(init (f a))")
        result = derive(desc, initial_state(desc))
        assert result.derived == frozenset(
            {("succ", "1", "2"), ("role", "p"), ("true", ("f", "a"))}
        )

    def test_does_wrappers_present(self):
        desc = desc_of("(role p)(<= (legal p act) (role p))")
        result = derive(desc, frozenset(), {"p": "act"})
        assert ("does", "p", "act") in result.derived

    def test_joint_move_role_mismatch(self):
        desc = desc_of("(role p)(role q)")
        with pytest.raises(BadJointMove):
            derive(desc, frozenset(), {"p": "act"})

    def test_groundedness(self):
        ttt = load_game("tictactoe")
        from ggpbench.kif import is_ground

        for fact in derive(ttt, initial_state(ttt)).derived:
            assert is_ground(fact)

    def test_rule_order_irrelevant(self):
        from ggpbench.games import game_source

        text = game_source("tictactoe")
        ttt = parse_description(text)
        sentences = [s.strip() for s in text.replace("\n", " ").split(") (")]
        # reparse with the rules reversed instead of splitting text crudely
        from ggpbench.kif import GameDescription

        shuffled = GameDescription(
            roles=ttt.roles,
            init_facts=ttt.init_facts,
            static_facts=ttt.static_facts,
            rules=tuple(reversed(ttt.rules)),
            source_name="tictactoe-reversed",
        )
        state = initial_state(ttt)
        assert legal_moves(ttt, state) == legal_moves(shuffled, state)
        joint = {"xplayer": ("mark", "2", "2"), "oplayer": "noop"}
        assert next_state(ttt, state, joint) == next_state(shuffled, state, joint)


class TestQueries:
    def test_tictactoe_opening_moves(self):
        ttt = load_game("tictactoe")
        lm = legal_moves(ttt, initial_state(ttt))
        assert len(lm["xplayer"]) == 9
        assert lm["oplayer"] == frozenset({"noop"})

    def test_legality_ignores_terminality(self):
        ttt = load_game("tictactoe")
        won = parse_fact_set_strict(
            "(cell 1 1 x)\n(cell 1 2 x)\n(cell 1 3 x)\n"
            "(cell 2 1 o)\n(cell 2 2 o)\n(cell 2 3 b)\n"
            "(cell 3 1 b)\n(cell 3 2 b)\n(cell 3 3 b)\n(control oplayer)"
        )
        assert is_terminal(ttt, won)
        assert legal_moves(ttt, won)["oplayer"]  # definition is state-local

    def test_mark_and_frame(self):
        ttt = load_game("tictactoe")
        state = initial_state(ttt)
        succ = next_state(
            ttt, state, {"xplayer": ("mark", "1", "1"), "oplayer": "noop"}
        )
        assert ("cell", "1", "1", "x") in succ
        assert ("control", "oplayer") in succ
        assert len(succ) == 10

    def test_move_vacates_source_cell(self):
        desc = desc_of(
            "(role player)"
            "(init (cell 1 1 pawn))"
            "(<= (legal player (move pawn 1 1 ?x ?y)) (true (cell 1 1 pawn))"
            " (spot ?x ?y))"
            "(spot 2 2)"
            "(<= (next (cell ?u ?v b)) (does ?player (move ?p ?u ?v ?x ?y)))"
        )
        succ = next_state(
            desc, initial_state(desc), {"player": ("move", "pawn", "1", "1", "2", "2")}
        )
        assert succ == frozenset({("cell", "1", "1", "b")})

    def test_no_next_rules_empty_successor(self):
        desc = desc_of("(role p)(init (f a))(<= (legal p wait) (role p))")
        assert next_state(desc, initial_state(desc), {"p": "wait"}) == frozenset()

    def test_checkers_tiny_drops_light_squares(self):
        tiny = load_game("checkersTiny")
        state = initial_state(tiny)
        lm = legal_moves(tiny, state)
        joint = {r: sorted(lm[r], key=render)[0] for r in tiny.roles}
        succ = next_state(tiny, state, joint)
        light = {
            f
            for f in succ
            if f[0] == "cell" and (int(f[1]) + int(f[2])) % 2 == 1
        }
        assert light == set()

    def test_frame_discipline_reparse(self):
        ttt = load_game("tictactoe")
        state = initial_state(ttt)
        joint = {"xplayer": ("mark", "3", "1"), "oplayer": "noop"}
        direct = next_state(ttt, state, joint)
        reparsed = parse_fact_set_strict(render(state))
        assert next_state(ttt, reparsed, joint) == direct


class TestTerminalAndGoals:
    DRAWN = (
        "(cell 1 1 x)\n(cell 1 2 o)\n(cell 1 3 x)\n"
        "(cell 2 1 o)\n(cell 2 2 x)\n(cell 2 3 x)\n"
        "(cell 3 1 o)\n(cell 3 2 x)\n(cell 3 3 o)\n(control xplayer)"
    )

    def test_drawn_board(self):
        ttt = load_game("tictactoe")
        state = parse_fact_set_strict(self.DRAWN)
        assert is_terminal(ttt, state)
        assert goal_values(ttt, state) == {"xplayer": 50, "oplayer": 50}

    def test_initial_not_terminal(self):
        ttt = load_game("tictactoe")
        assert not is_terminal(ttt, initial_state(ttt))

    def test_multiple_goal_values(self):
        desc = desc_of(
            "(role p)(init go)"
            "(<= (goal p 100) (true go))(<= (goal p 0) (true go))"
        )
        with pytest.raises(MultipleGoalValues):
            goal_values(desc, initial_state(desc))

    def test_non_numeric_goal(self):
        desc = desc_of("(role p)(init go)(<= (goal p win) (true go))")
        with pytest.raises(NonNumericGoal):
            goal_values(desc, initial_state(desc))

    def test_missing_goal_reported_at_terminal(self):
        desc = desc_of("(role p)(role q)(init go)(<= terminal (true go))"
                       "(<= (goal p 100) (true go))")
        with pytest.raises(MissingGoalValue) as err:
            goal_values(desc, initial_state(desc))
        assert err.value.role == "q"

    def test_out_of_range_goal_warns(self, caplog):
        desc = desc_of("(role p)(init go)(<= (goal p 150) (true go))")
        with caplog.at_level(logging.WARNING, logger="ggpbench.engine"):
            values = goal_values(desc, initial_state(desc))
        assert values == {"p": 150}
        assert any("outside 0..100" in m for m in caplog.messages)


class TestStratification:
    def test_negative_cycle(self):
        with pytest.raises(NegativeCycle):
            derive(desc_of("(role r)(<= p (not q))(<= q (not p))"), frozenset())

    def test_unstratifiable_or(self):
        with pytest.raises(UnstratifiableOr):
            derive(
                desc_of("(role r)(<= p (or (true f) (not q)))(<= q p)"),
                frozenset(),
            )

    def test_positive_recursion_allowed(self):
        desc = desc_of(
            "(role r)(edge a b)(edge b c)"
            "(<= (path ?x ?y) (edge ?x ?y))"
            "(<= (path ?x ?z) (path ?x ?y) (edge ?y ?z))"
        )
        assert ("path", "a", "c") in derive(desc, frozenset()).derived

    def test_negation_under_recursion_is_fine_across_strata(self):
        desc = desc_of(
            "(role r)(edge a b)(edge b c)(node a)(node b)(node c)"
            "(<= (reach ?x) (edge a ?x))"
            "(<= (reach ?y) (reach ?x) (edge ?x ?y))"
            "(<= (unreached ?x) (node ?x) (not (reach ?x)))"
        )
        assert ("unreached", "a") in derive(desc, frozenset()).derived


class TestChessMechanics:
    """Functional checks for the corner-case chess moves random play
    rarely exercises."""

    def _state(self, facts):
        # the game stores explicit blanks; fill every unlisted square
        listed = parse_fact_set_strict(facts)
        occupied = {(f[1], f[2]) for f in listed if f[0] == "cell"}
        board = set(listed)
        for file in "abcdefgh":
            for rank in "12345678":
                if (file, rank) not in occupied:
                    board.add(("cell", file, rank, "b"))
        return frozenset(board)

    def test_castling_kingside(self):
        chess = load_game("chess")
        state = self._state(
            "(cell e 1 wk)\n(cell h 1 wr)\n(cell e 8 bk)\n(cell a 7 bp)\n"
            "(control white)\n(ply 4)"
        )
        lm = legal_moves(chess, state)
        assert "castlek" in lm["white"]
        succ = next_state(chess, state, {"white": "castlek", "black": "noop"})
        assert ("cell", "g", "1", "wk") in succ
        assert ("cell", "f", "1", "wr") in succ
        assert ("cell", "e", "1", "b") in succ
        assert ("cell", "h", "1", "b") in succ
        assert ("moved", "e", "1") in succ

    def test_castling_blocked_by_moved_marker(self):
        chess = load_game("chess")
        state = self._state(
            "(cell e 1 wk)\n(cell h 1 wr)\n(cell e 8 bk)\n(cell a 7 bp)\n"
            "(moved e 1)\n(control white)\n(ply 4)"
        )
        assert "castlek" not in legal_moves(chess, state)["white"]

    def test_pawn_promotion_on_advance(self):
        chess = load_game("chess")
        state = self._state(
            "(cell a 7 wp)\n(cell e 1 wk)\n(cell e 8 bk)\n"
            "(control white)\n(ply 10)"
        )
        moves = legal_moves(chess, state)["white"]
        assert ("advance", "a", "7", "a", "8") in moves
        succ = next_state(
            chess, state, {"white": ("advance", "a", "7", "a", "8"), "black": "noop"}
        )
        assert ("cell", "a", "8", "wq") in succ
        assert ("cell", "a", "7", "b") in succ

    def test_en_passant(self):
        chess = load_game("chess")
        state = self._state(
            "(cell b 7 bp)\n(cell a 5 wp)\n(cell e 1 wk)\n(cell e 8 bk)\n"
            "(control black)\n(ply 9)"
        )
        succ = next_state(
            chess, state, {"black": ("dash", "b", "7", "b", "5"), "white": "noop"}
        )
        assert ("passable", "b", "6") in succ
        moves = legal_moves(chess, succ)["white"]
        assert ("seize", "a", "5", "b", "6") in moves
        after = next_state(
            chess, succ, {"white": ("seize", "a", "5", "b", "6"), "black": "noop"}
        )
        assert ("cell", "b", "6", "wp") in after
        assert ("cell", "b", "5", "b") in after  # the bypassed pawn is gone
        # the window closes after one ply
        assert not any(f[0] == "passable" for f in after)

    def test_king_capture_is_terminal(self):
        chess = load_game("chess")
        state = self._state(
            "(cell e 1 wk)\n(cell e 8 bk)\n(cell e 7 wq)\n(control white)\n(ply 12)"
        )
        succ = next_state(
            chess, state, {"white": ("glide", "e", "7", "e", "8"), "black": "noop"}
        )
        assert is_terminal(chess, succ)
        assert goal_values(chess, succ) == {"white": 100, "black": 0}
