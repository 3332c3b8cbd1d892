"""Prompt rendering, model querying, and response parsing.

Prompts are deterministic instantiations of four fixed templates; the only
moving parts are the substituted fields, so identical requests produce
identical bytes. Response parsing never raises: anything that cannot be
turned into the task's answer shape is recorded as unparseable and scores
zero downstream. A results directory plus the fixture directory fully
determines every score with no network access.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .kif import Unparseable, parse_fact_set_relaxed, parse_terms

log = logging.getLogger(__name__)


class HarnessError(Exception):
    pass


class MissingPlaceholderInput(HarnessError):
    pass


class HttpError(HarnessError):
    def __init__(self, status: int, body: str = ""):
        self.status = status
        super().__init__(f"HTTP {status}: {body[:200]}")


class RetriesExhausted(HarnessError):
    pass


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

TASK1_TEMPLATE = """You are a game logic expert. Your task is to predict the next game state.

Here is the game definition in GDL (Game Description Language). GDL was used in General Game Playing competition. Ignore the Init part; the current state will be provided later:
- - - GAME DEFINITION - - -
{game_definition}
- - - - - - - - - - - - - - - - - - - - - - -

Here is the current game state:
- - - GAME STATE - - -
{game_state}
- - - - - - - - - - - - - - - - - -

The following move is being executed:
- - - MOVE - - -
{move}
- - - - - - - - - - - -

What will be the **exact** game state after this move?
Respond **only** in JSON format using the following fields:
- "llm_state": string, the complete new game state in the same format as the input state, each fact separated by new line symbol

Do not add any explanations, comments, or markdown formatting.
Your response must start with {{."""

TASK2_TEMPLATE = """You are a game logic expert. Your task is to determine all legal moves available for all players in the current state.

Here is the game definition in GDL (Game Description Language):
- - - GAME DEFINITION - - -
{game_definition}
- - - - - - - - - - - - - - - - - - - - - - -

Here is the current game state:
- - - GAME STATE - - -
{game_state}
- - - - - - - - - - - - - - - - - -

List **all** legal moves for this state based on the GDL rules.
Respond **only** in JSON format using the following field:
- "llm_legal_moves": string which contains all possible valid GDL moves (role + action) separated by new line symbol, each move should be in round brackets

Do not add any explanations, comments, or markdown formatting. Don't put GDL syntactic elements like "legal", "does" in the moves.
Your response must start with {{."""

TASK3_TEMPLATE = """You are a game logic expert. Your task is to predict the game state after a specific sequence of moves.

Here is the game definition in GDL (Game Description Language).
The game starts from the initial state defined in this GDL (look for 'init' relations).
- - - GAME DEFINITION - - -
{game_definition}
- - - - - - - - - - - - - - - - - - - - - - -

Starting from the initial state defined above, apply the following sequence of {n} moves in order:
- - - MOVE SEQUENCE - - -
{move_sequence}
- - - - - - - - - - - - - - - - - - - - -

What will be the **exact** game state after these {n} moves have been executed?
Respond **only** in JSON format using the following fields:
- "llm_state": string, the complete new game state in GDL format, each fact separated by new line symbol.

Do not add any explanations, comments, or markdown formatting.
Your response must start with {{."""

TASK4_TEMPLATE = """You are a game logic expert. Your task is to play the game for {n} steps and predict the resulting state.
Moves don't need to be optimal, they can be random but each of them have to be legal.

Here is the game definition in GDL (Game Description Language).
The game starts from the initial state defined in this GDL (look for 'init' relations).
- - - GAME DEFINITION - - -
{game_definition}
- - - - - - - - - - - - - - - - - - - - - - -

**Task:**
1. Starting from the initial state, generate a valid sequence of {n} moves.
2. Calculate the exact game state after these {n} moves.

**Move Format:**
Your generated moves must follow this specific string format (example from this game):
{move_example}

**Output:**
Respond **only** in JSON format using the following structure:
{{
    "moves": [
        {{ "step": "0", "joint_move": "..." }},
        {{ "step": "1", "joint_move": "..." }}
    ],
    "llm_state": "string containing the complete new game state in GDL format"
}}

Do not add any explanations, comments, or markdown formatting.
Your response must start with {{."""

TEMPLATES = {1: TASK1_TEMPLATE, 2: TASK2_TEMPLATE, 3: TASK3_TEMPLATE, 4: TASK4_TEMPLATE}

TASK_DIRS = {
    1: "Next State Generation",
    2: "Legal Actions Generation",
    3: "Multistep State Generation n={n}",
    4: "Multistep Action-State Generation n={n}",
}


def task_dir(task: int, horizon: Optional[int] = None) -> str:
    name = TASK_DIRS[task]
    if "{n}" in name:
        if horizon is None:
            raise MissingPlaceholderInput(f"task {task} needs a horizon")
        name = name.format(n=horizon)
    return name


@dataclass
class EvalRequest:
    task: int
    game: str
    variant: str = "original"
    instance_id: str = ""
    horizon: Optional[int] = None
    move_example: Optional[str] = None


def render_prompt(req: EvalRequest, game_definition: str, fields: dict) -> str:
    """Instantiate the task template; `fields` carries the task-specific
    pieces (game_state / move / move_sequence) as already-rendered text."""
    values = dict(fields)
    values["game_definition"] = game_definition
    if req.task in (3, 4):
        if req.horizon is None:
            raise MissingPlaceholderInput("tasks 3 and 4 need a horizon")
        values["n"] = req.horizon
    if req.task == 4:
        if req.move_example is None:
            raise MissingPlaceholderInput("task 4 needs a move_example")
        values["move_example"] = req.move_example
    template = TEMPLATES[req.task]
    try:
        return template.format(**values)
    except KeyError as exc:
        raise MissingPlaceholderInput(f"missing prompt field: {exc}") from exc


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Model access
# ---------------------------------------------------------------------------

@dataclass
class ModelConfig:
    endpoint: str
    model: str
    temperature: float = 0.2
    timeout: float = 120.0
    max_retries: int = 3
    parallelism: int = 4
    profile: str = "openai-chat"
    extra: dict = field(default_factory=dict)
    api_key_env: Optional[str] = None


def _build_payload(cfg: ModelConfig, prompt: str) -> dict:
    if cfg.profile == "openai-chat":
        payload = {
            "model": cfg.model,
            "temperature": cfg.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
    elif cfg.profile == "raw":
        payload = {"model": cfg.model, "temperature": cfg.temperature, "prompt": prompt}
    else:
        raise HarnessError(f"unknown provider profile {cfg.profile!r}")
    payload.update(cfg.extra)
    return payload


def _extract_text(cfg: ModelConfig, doc: dict) -> str:
    if cfg.profile == "openai-chat":
        return doc["choices"][0]["message"]["content"]
    return doc["text"]


def query_model(cfg: ModelConfig, prompt: str) -> str:
    """POST the prompt to the configured endpoint, retrying transport errors
    and retryable statuses with linear backoff."""
    import os

    import requests

    headers = {"Content-Type": "application/json"}
    if cfg.api_key_env:
        key = os.environ.get(cfg.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
    payload = _build_payload(cfg, prompt)
    last_error: Optional[str] = None
    for attempt in range(1, cfg.max_retries + 1):
        started = time.time()
        try:
            resp = requests.post(
                cfg.endpoint, json=payload, headers=headers, timeout=cfg.timeout
            )
            elapsed = time.time() - started
            if resp.status_code in (429, 500, 502, 503, 504):
                last_error = f"HTTP {resp.status_code}"
                log.warning("attempt %d: %s, retrying", attempt, last_error)
                time.sleep(min(2.0 * attempt, 10.0))
                continue
            if resp.status_code != 200:
                raise HttpError(resp.status_code, resp.text)
            doc = resp.json()
            usage = doc.get("usage", {})
            log.info(
                "model reply in %.1fs (tokens: %s)", elapsed, usage or "n/a"
            )
            return _extract_text(cfg, doc)
        except requests.RequestException as exc:
            last_error = str(exc)
            log.warning("attempt %d transport error: %s", attempt, last_error)
            time.sleep(min(2.0 * attempt, 10.0))
    raise RetriesExhausted(f"gave up after {cfg.max_retries} attempts: {last_error}")


# ---------------------------------------------------------------------------
# Response parsing
# ---------------------------------------------------------------------------

@dataclass
class ParsedAnswer:
    task: int
    parse_status: str  # "ok" | "unparseable"
    raw: str
    fact_set: frozenset = frozenset()
    move_pairs: frozenset = frozenset()
    joints: tuple = ()


_FENCE_LINE = re.compile(r"^```[\w-]*\s*$", re.MULTILINE)
_TRAILING_COMMA = re.compile(r",(\s*[}\]])")


def _json_candidates(raw: str):
    text = _FENCE_LINE.sub("", raw)
    decoder = json.JSONDecoder()
    for variant in (text, _TRAILING_COMMA.sub(r"\1", text).replace("'", '"')):
        start = variant.find("{")
        while start != -1:
            try:
                doc, _ = decoder.raw_decode(variant[start:])
            except ValueError:
                start = variant.find("{", start + 1)
                continue
            if isinstance(doc, dict):
                yield doc
            start = variant.find("{", start + 1)


def _first_json(raw: str) -> Optional[dict]:
    for doc in _json_candidates(raw):
        return doc
    return None


def _parse_move_pairs(text: str) -> frozenset:
    pairs = set()
    for line in text.splitlines():
        line = line.strip().replace(",", " ")
        if not line or _FENCE_LINE.match(line):
            continue
        terms = parse_terms(line)
        for t in terms:
            if not isinstance(t, tuple) or len(t) < 2:
                raise Unparseable(line, "move is not a (role action) pair")
            action = t[1] if len(t) == 2 else tuple(t[1:])
            pairs.add((t[0], action))
    return frozenset(pairs)


def _parse_joint_string(text: str) -> dict:
    joint = {}
    for t in parse_terms(text.replace(",", " ")):
        if not isinstance(t, tuple) or len(t) < 2:
            raise Unparseable(text, "joint move entry is not a (role action) pair")
        role = t[0]
        action = t[1] if len(t) == 2 else tuple(t[1:])
        if role in joint:
            raise Unparseable(text, f"duplicate role {role}")
        joint[role] = action
    if not joint:
        raise Unparseable(text, "empty joint move")
    return joint


def parse_response(task: int, raw: str) -> ParsedAnswer:
    """Tolerant extraction of the task answer from arbitrary model output.

    Strips markdown fences, takes the first syntactically complete JSON
    object (repairing trailing commas and single quotes if needed), pulls
    the task fields, and applies relaxed fact parsing. Any failure yields
    parse_status="unparseable" rather than an exception.
    """

    def unparseable():
        return ParsedAnswer(task=task, parse_status="unparseable", raw=raw)

    doc = _first_json(raw)
    if doc is None:
        return unparseable()
    try:
        if task in (1, 3):
            state = doc.get("llm_state")
            if not isinstance(state, str):
                return unparseable()
            return ParsedAnswer(
                task=task, parse_status="ok", raw=raw,
                fact_set=parse_fact_set_relaxed(state),
            )
        if task == 2:
            movestr = doc.get("llm_legal_moves")
            if not isinstance(movestr, str):
                return unparseable()
            return ParsedAnswer(
                task=task, parse_status="ok", raw=raw,
                move_pairs=_parse_move_pairs(movestr),
            )
        if task == 4:
            moves = doc.get("moves")
            state = doc.get("llm_state")
            if not isinstance(moves, list) or not isinstance(state, str):
                return unparseable()
            joints = []
            for entry in moves:
                if not isinstance(entry, dict) or "joint_move" not in entry:
                    return unparseable()
                joints.append(_parse_joint_string(str(entry["joint_move"])))
            return ParsedAnswer(
                task=task, parse_status="ok", raw=raw,
                fact_set=parse_fact_set_relaxed(state),
                joints=tuple(joints),
            )
    except (Unparseable, ValueError):
        return unparseable()
    raise HarnessError(f"unknown task {task}")


# ---------------------------------------------------------------------------
# Result records
# ---------------------------------------------------------------------------

@dataclass
class ResultRecord:
    instance_id: str
    game: str
    task: int
    model: str
    variant: str
    horizon: Optional[int]
    prompt_sha256: str
    raw_response: str
    parse_status: str
    temperature: float
    timestamp: str

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ResultRecord":
        return cls(**json.loads(line))


def write_results(path, records: Sequence[ResultRecord]) -> None:
    """Append-only JSON-lines output, sorted by instance id."""
    ordered = sorted(records, key=lambda r: r.instance_id)
    with open(path, "a", encoding="utf-8") as fh:
        for rec in ordered:
            fh.write(rec.to_json() + "\n")


def read_results(path) -> list:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(ResultRecord.from_json(line))
    return records


def run_requests(
    cfg: ModelConfig,
    jobs: Sequence[tuple],
    client: Optional[Callable[[str, EvalRequest], str]] = None,
) -> list:
    """Run (request, prompt) jobs concurrently up to the parallelism bound.

    `client` defaults to HTTP via query_model; tests and offline runs pass a
    callable. Output order is canonical (sorted by instance id), so the
    concurrency level never shows in artifacts.
    """
    if client is None:
        client = lambda prompt, req: query_model(cfg, prompt)

    def one(job):
        req, prompt = job
        raw = client(prompt, req)
        answer = parse_response(req.task, raw)
        return ResultRecord(
            instance_id=req.instance_id,
            game=req.game,
            task=req.task,
            model=cfg.model,
            variant=req.variant,
            horizon=req.horizon,
            prompt_sha256=prompt_sha256(prompt),
            raw_response=raw,
            parse_status=answer.parse_status,
            temperature=cfg.temperature,
            timestamp=time.strftime("%Y-%m-%dT%H:%M:%S"),
        )

    with ThreadPoolExecutor(max_workers=max(1, cfg.parallelism)) as pool:
        records = list(pool.map(one, jobs))
    return sorted(records, key=lambda r: r.instance_id)
