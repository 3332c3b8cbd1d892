"""Symbol obfuscation: placeholder terms, dictionary words, random strings.

An encoding is one global bijection from original symbols to images,
applied by whole-token replacement so that layout and comments survive and
de-obfuscation is the exact inverse. GDL keywords are never touched and
the harness's JSON property names are linted against so they can never
collide with game symbols.
"""

from __future__ import annotations

import logging
import random
import re
import string
from dataclasses import dataclass, field

from .kif import GDL_KEYWORDS, GameDescription, Term

log = logging.getLogger(__name__)

PLACEHOLDER = "placeholder"
DICTIONARY = "dictionary"
RANDOM = "random"
VARIANTS = (PLACEHOLDER, DICTIONARY, RANDOM)

# Property names written into instance/sequence/result JSON documents. The
# lint refuses to build an encoding over a corpus that uses one of these as
# a game symbol, because logs and games must deobfuscate with one table.
JSON_LOG_PROPERTY_NAMES = frozenset(
    {
        "game", "id", "game_state", "move", "legal_moves", "next_state",
        "moves", "step", "joint_move", "llm_state", "llm_legal_moves",
        "task", "model", "variant", "prompt_sha256", "raw_response",
        "parse_status", "timestamp", "temperature", "horizon",
    }
)


class ObfuscationError(Exception):
    pass


class DictionaryExhausted(ObfuscationError):
    pass


class UnmappedSymbol(ObfuscationError):
    def __init__(self, token: str):
        self.token = token
        super().__init__(f"no encoding entry for symbol {token!r}")


class ReservedSymbolCollision(ObfuscationError):
    """Lint failure: a game symbol collides with a JSON log property name."""


_PIECE_RE = re.compile(r"(;[^\n]*)|(\s+)|([()])|([^\s();]+)")


def _pieces(text: str):
    """(kind, text) pieces covering the whole input: comment / space /
    paren / symbol."""
    for m in _PIECE_RE.finditer(text):
        comment, space, paren, symbol = m.groups()
        if comment is not None:
            yield "comment", comment
        elif space is not None:
            yield "space", space
        elif paren is not None:
            yield "paren", paren
        else:
            yield "symbol", symbol


# ---------------------------------------------------------------------------
# Encoding maps
# ---------------------------------------------------------------------------

@dataclass
class EncodingMap:
    pairs: dict
    variant: str
    reserved: frozenset = field(default_factory=lambda: frozenset(GDL_KEYWORDS))

    def __post_init__(self):
        images = list(self.pairs.values())
        if len(set(images)) != len(images):
            raise ObfuscationError("encoding is not a bijection: duplicate image")
        overlap = self.reserved & set(self.pairs)
        if overlap:
            raise ObfuscationError(f"reserved symbols in encoding domain: {sorted(overlap)}")
        for orig, img in self.pairs.items():
            if orig.startswith("?") != img.startswith("?"):
                raise ObfuscationError(f"variable marker mismatch: {orig} -> {img}")
            if img in self.reserved or img in GDL_KEYWORDS:
                raise ObfuscationError(f"image {img!r} is a reserved keyword")

    @property
    def inverse(self) -> dict:
        return {v: k for k, v in self.pairs.items()}

    def to_text(self) -> str:
        return "\n".join(f"{orig} {img}" for orig, img in self.pairs.items()) + "\n"

    @classmethod
    def from_text(cls, text: str, variant: str = "unknown") -> "EncodingMap":
        pairs = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ObfuscationError(f"encoding line {lineno} is not '<orig> <obf>': {raw!r}")
            orig, img = parts
            if orig in pairs:
                raise ObfuscationError(f"duplicate original symbol {orig!r} on line {lineno}")
            pairs[orig] = img
        return cls(pairs, variant)


def _symbol_stream(sources):
    """Symbols in first-encounter order across all sources."""
    for text in sources:
        for kind, piece in _pieces(text):
            if kind == "symbol":
                yield piece


def _lint_sources(symbols):
    bad = sorted(set(symbols) & JSON_LOG_PROPERTY_NAMES)
    if bad:
        raise ReservedSymbolCollision(
            f"game symbols collide with JSON log property names: {bad}"
        )


def _collect_symbols(sources) -> list:
    """Unique non-reserved symbols, order of first encounter."""
    seen = []
    seen_set = set()
    for sym in _symbol_stream(sources):
        if sym in GDL_KEYWORDS or sym in seen_set:
            continue
        seen_set.add(sym)
        seen.append(sym)
    _lint_sources(seen)
    return seen


def _image_ok(img: str, used: set) -> bool:
    return img not in used and img not in GDL_KEYWORDS and not img.startswith("?")


def build_encoding(
    sources,
    variant: str,
    seed: int | None = None,
    dictionary: list | None = None,
) -> EncodingMap:
    """One global encoding covering every non-reserved symbol in `sources`
    (an iterable of GDL texts; pass the files of a whole directory so the
    same symbol maps identically across games)."""
    if variant not in VARIANTS:
        raise ObfuscationError(f"unknown variant {variant!r}")
    symbols = _collect_symbols(list(sources))

    images: list = []
    used: set = set()
    if variant == PLACEHOLDER:
        for i in range(1, len(symbols) + 1):
            images.append(f"term{i}")
    elif variant == DICTIONARY:
        if not dictionary:
            raise ObfuscationError("dictionary variant needs a word list")
        words = [w.strip().lower() for w in dictionary if w.strip()]
        combos = [(a, b) for a in words for b in words if a != b]
        if len(combos) < len(symbols):
            raise DictionaryExhausted(
                f"{len(symbols)} symbols need more than {len(combos)} two-part nouns"
            )
        rng = random.Random(0 if seed is None else seed)
        rng.shuffle(combos)
        it = iter(combos)
        while len(images) < len(symbols):
            try:
                a, b = next(it)
            except StopIteration:
                raise DictionaryExhausted("ran out of unique two-part nouns")
            img = a + b
            if _image_ok(img, used):
                images.append(img)
                used.add(img)
    else:  # random strings
        if seed is None:
            raise ObfuscationError("random variant needs a seed")
        rng = random.Random(seed)
        alphabet = string.ascii_letters + string.digits
        while len(images) < len(symbols):
            img = "".join(rng.choice(alphabet) for _ in range(rng.randint(5, 8)))
            if img.isdigit() or not _image_ok(img, used):
                continue
            images.append(img)
            used.add(img)

    pairs = {}
    for sym, img in zip(symbols, images):
        pairs[sym] = "?" + img if sym.startswith("?") else img
    return EncodingMap(pairs, variant)


# ---------------------------------------------------------------------------
# Applying encodings
# ---------------------------------------------------------------------------

def obfuscate(text: str, emap: EncodingMap) -> str:
    """Whole-token symbol replacement; reserved keywords, comments and layout
    pass through unchanged. Unknown symbols are an error."""
    out = []
    for kind, piece in _pieces(text):
        if kind != "symbol" or piece in GDL_KEYWORDS:
            out.append(piece)
            continue
        img = emap.pairs.get(piece)
        if img is None:
            raise UnmappedSymbol(piece)
        out.append(img)
    return "".join(out)


def deobfuscate(text: str, emap: EncodingMap) -> str:
    """Inverse of obfuscate; unknown tokens pass through with a warning."""
    inverse = emap.inverse
    out = []
    for kind, piece in _pieces(text):
        if kind != "symbol" or piece in GDL_KEYWORDS:
            out.append(piece)
            continue
        orig = inverse.get(piece)
        if orig is None:
            log.warning("deobfuscate: unknown token %r passed through", piece)
            orig = piece
        out.append(orig)
    return "".join(out)


def map_term(t: Term, emap: EncodingMap):
    """Apply the encoding to a parsed term."""
    if isinstance(t, str):
        if t in GDL_KEYWORDS:
            return t
        return emap.pairs.get(t, t)
    return tuple(map_term(x, emap) for x in t)


# ---------------------------------------------------------------------------
# Behavioural isomorphism
# ---------------------------------------------------------------------------

@dataclass
class IsomorphismReport:
    game: str
    variant: str
    seeds_checked: tuple
    divergences: tuple  # (seed, step, message)

    @property
    def ok(self) -> bool:
        return not self.divergences


def verify_isomorphism(
    desc: GameDescription,
    obfuscated: GameDescription,
    emap: EncodingMap,
    seeds,
    max_steps: int = 25,
) -> IsomorphismReport:
    """Replay original playouts on the obfuscated game through the mapping
    and record the first divergence per seed, if any."""
    from . import engine
    from .simulator import random_playout

    divergences = []
    for seed in seeds:
        playout = random_playout(desc, seed, max_steps)
        state = engine.initial_state(obfuscated)
        expected0 = frozenset(map_term(f, emap) for f in engine.initial_state(desc))
        if state != expected0:
            divergences.append((seed, 0, "initial states differ under mapping"))
            continue
        for step, (orig_state, joint) in enumerate(playout.steps):
            mapped_joint = {
                emap.pairs.get(r, r): map_term(a, emap) for r, a in joint.items()
            }
            legal = engine.legal_moves(obfuscated, state)
            bad = [
                r for r, a in mapped_joint.items() if a not in legal.get(r, frozenset())
            ]
            if bad:
                divergences.append(
                    (seed, step, f"mapped move illegal for roles {sorted(bad)}")
                )
                break
            state = engine.next_state(obfuscated, state, mapped_joint)
            expected = frozenset(
                map_term(f, emap)
                for f in engine.next_state(desc, orig_state, joint)
            )
            if state != expected:
                divergences.append((seed, step, "successor states differ under mapping"))
                break
    return IsomorphismReport(
        game=desc.source_name,
        variant=emap.variant,
        seeds_checked=tuple(seeds),
        divergences=tuple(divergences),
    )
