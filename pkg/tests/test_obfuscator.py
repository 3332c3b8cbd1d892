"""Symbol obfuscation: encodings, round trips, isomorphism."""

import logging
import re

import pytest

from ggpbench.games import game_source, load_game
from ggpbench.kif import GDL_KEYWORDS, parse_description
from ggpbench.obfuscator import (
    DictionaryExhausted,
    EncodingMap,
    ObfuscationError,
    ReservedSymbolCollision,
    UnmappedSymbol,
    build_encoding,
    deobfuscate,
    map_term,
    obfuscate,
    verify_isomorphism,
)
from ggpbench.pipeline import default_dictionary


class TestBuildEncoding:
    def test_placeholder_numbering_by_encounter(self):
        emap = build_encoding(["(role white) (role black) (init (cell 1 1 b))"],
                              "placeholder")
        assert emap.pairs["white"] == "term1"
        assert emap.pairs["black"] == "term2"
        assert emap.pairs["cell"] == "term3"
        assert emap.pairs["1"] == "term4"
        assert emap.pairs["b"] == "term5"

    def test_variable_marker_preserved(self):
        emap = build_encoding(["(role p)(<= (q ?color) (r ?color))"], "placeholder")
        image = emap.pairs["?color"]
        assert image.startswith("?term")

    def test_global_across_sources(self):
        emap = build_encoding(["(role white)(alpha white)", "(role white)(beta white)"],
                              "placeholder")
        assert emap.pairs["white"] == "term1"  # one image corpus-wide
        assert "alpha" in emap.pairs and "beta" in emap.pairs

    def test_random_strings_shape_and_determinism(self):
        src = [game_source("tictactoe")]
        a = build_encoding(src, "random", seed=3)
        b = build_encoding(src, "random", seed=3)
        assert a.pairs == b.pairs
        for img in a.pairs.values():
            bare = img.lstrip("?")
            assert 5 <= len(bare) <= 8
            assert re.fullmatch(r"[A-Za-z0-9]+", bare)
            assert not bare.isdigit()
        assert build_encoding(src, "random", seed=4).pairs != a.pairs

    def test_random_needs_seed(self):
        with pytest.raises(ObfuscationError):
            build_encoding(["(role p)"], "random")

    def test_dictionary_two_part_nouns(self):
        emap = build_encoding([game_source("buttons")], "dictionary",
                              dictionary=default_dictionary(), seed=1)
        words = set(default_dictionary())
        for img in emap.pairs.values():
            bare = img.lstrip("?")
            assert any(
                bare.startswith(w) and bare[len(w):] in words
                for w in words
                if bare.startswith(w)
            ), bare

    def test_dictionary_exhaustion(self):
        with pytest.raises(DictionaryExhausted):
            build_encoding(["(role aa)(f bb cc dd ee)"], "dictionary",
                           dictionary=["oak", "elm"])

    def test_keywords_never_in_domain(self):
        emap = build_encoding([game_source("chess")], "placeholder")
        assert not (set(emap.pairs) & GDL_KEYWORDS)

    def test_json_property_name_lint(self):
        with pytest.raises(ReservedSymbolCollision):
            build_encoding(["(role p)(<= (legal p (move 1 2)) (role p))"],
                           "placeholder")


class TestEncodingMap:
    def test_bijection_enforced(self):
        with pytest.raises(ObfuscationError):
            EncodingMap({"a": "x", "b": "x"}, "placeholder")

    def test_variable_marker_mismatch_rejected(self):
        with pytest.raises(ObfuscationError):
            EncodingMap({"?a": "x"}, "placeholder")

    def test_keyword_image_rejected(self):
        with pytest.raises(ObfuscationError):
            EncodingMap({"a": "legal"}, "placeholder")

    def test_reserved_domain_rejected(self):
        with pytest.raises(ObfuscationError):
            EncodingMap({"not": "x"}, "placeholder")

    def test_text_round_trip(self):
        emap = EncodingMap({"cell": "term12", "?color": "?term13", "opponent": "term14"},
                           "placeholder")
        text = emap.to_text()
        assert "cell term12" in text.splitlines()
        assert "?color ?term13" in text.splitlines()
        back = EncodingMap.from_text(text, "placeholder")
        assert back.pairs == emap.pairs

    def test_malformed_lines_rejected(self):
        with pytest.raises(ObfuscationError):
            EncodingMap.from_text("cell term12 extra")
        with pytest.raises(ObfuscationError):
            EncodingMap.from_text("cell t1\ncell t2")


class TestApply:
    def test_manual_mapping_example(self):
        emap = EncodingMap({"white": "term3", "move": "term4", "1": "term5",
                            "2": "term6"}, "placeholder")
        out = obfuscate("(legal white (move 1 2))", emap)
        assert out == "(legal term3 (term4 term5 term6))"

    def test_whole_token_replacement_only(self):
        emap = EncodingMap({"cell": "zz", "cellar": "yy"}, "placeholder")
        assert obfuscate("(cell cellar cell)", emap) == "(zz yy zz)"

    def test_layout_and_comments_preserved(self):
        emap = EncodingMap({"f": "qq", "a": "rr"}, "placeholder")
        src = "; keep me, f stays here\n( f   a )\n\n(f a) ; tail\n"
        out = obfuscate(src, emap)
        assert out == "; keep me, f stays here\n( qq   rr )\n\n(qq rr) ; tail\n"

    def test_unmapped_symbol(self):
        emap = EncodingMap({"f": "qq"}, "placeholder")
        with pytest.raises(UnmappedSymbol):
            obfuscate("(f mystery)", emap)

    def test_deobfuscate_unknown_token_warns(self, caplog):
        emap = EncodingMap({"f": "qq"}, "placeholder")
        with caplog.at_level(logging.WARNING, logger="ggpbench.obfuscator"):
            assert deobfuscate("(qq stray)", emap) == "(f stray)"
        assert any("stray" in m for m in caplog.messages)

    @pytest.mark.parametrize("name", ["tictactoe", "chess", "qyshinsu"])
    def test_corpus_round_trip_identity(self, name):
        text = game_source(name)
        emap = build_encoding([text], "random", seed=11)
        assert deobfuscate(obfuscate(text, emap), emap) == text

    def test_map_term(self):
        emap = EncodingMap({"cell": "t1", "1": "t2", "b": "t3"}, "placeholder")
        assert map_term(("cell", "1", "1", "b"), emap) == ("t1", "t2", "t2", "t3")


class TestIsomorphism:
    def test_identity_map_trivially_isomorphic(self):
        ttt = load_game("tictactoe")
        emap = EncodingMap({}, "placeholder")
        report = verify_isomorphism(ttt, ttt, emap, seeds=[0, 1], max_steps=9)
        assert report.ok

    def test_obfuscated_game_behaves_identically(self):
        name = "checkersTiny"
        text = game_source(name)
        emap = build_encoding([text], "dictionary", dictionary=default_dictionary())
        obf = parse_description(obfuscate(text, emap), source_name=name)
        report = verify_isomorphism(load_game(name), obf, emap, seeds=range(4),
                                    max_steps=12)
        assert report.ok, report.divergences

    def test_divergence_is_reported_not_raised(self):
        ttt = load_game("tictactoe")
        text = game_source("tictactoe")
        emap = build_encoding([text], "placeholder")
        # a deliberately wrong twin: x and o swapped in one next rule
        broken = text.replace("(<= (next (cell ?m ?n x))\n    (does xplayer (mark ?m ?n))",
                              "(<= (next (cell ?m ?n o))\n    (does xplayer (mark ?m ?n))")
        obf = parse_description(obfuscate(broken, emap), source_name="tictactoe")
        report = verify_isomorphism(ttt, obf, emap, seeds=[0], max_steps=9)
        assert not report.ok
        assert report.divergences[0][0] == 0  # seed of first divergence
