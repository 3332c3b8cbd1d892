"""Filesystem pipeline: the directory contract and command plumbing.

Layout produced and consumed here mirrors the benchmark distribution:

    <root>/
      No-Obfuscation/
        Games/<game>.kif
        Problem Instances/Next State and Legal Actions Generation/<game>/*.json
        Problem Instances/Multistep State Generation/<game>/*.json
        Results/<task dir>/<model>/<game>.jsonl
      Obfuscation-1/   (placeholder terms;  adds encoding.txt)
      Obfuscation-2/   (dictionary words;   adds encoding.txt)
      Obfuscation-3/   (random strings;     adds encoding.txt)

Every command is deterministic given (inputs, manifest, seed) and never
mutates its inputs; scoring needs no network.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import engine, features, harness, metrics, obfuscator, simulator
from .games import BENCHMARK_GAMES, game_source
from .kif import GameDescription, parse_description, render
from .published import OBFUSCATION_TABLES

log = logging.getLogger(__name__)

GAMES_DIR = "Games"
INSTANCES_DIR = "Problem Instances"
STEP_INSTANCES_DIR = "Next State and Legal Actions Generation"
MULTISTEP_DIR = "Multistep State Generation"
RESULTS_DIR = "Results"

VARIANT_DIRS = {
    "original": "No-Obfuscation",
    "placeholder": "Obfuscation-1",
    "dictionary": "Obfuscation-2",
    "random": "Obfuscation-3",
}


class PipelineError(Exception):
    pass


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass
class RunManifest:
    games: list = field(default_factory=lambda: list(BENCHMARK_GAMES))
    tasks: list = field(default_factory=lambda: [1, 2, 3, 4])
    horizons: list = field(default_factory=lambda: [5])
    variants: list = field(default_factory=lambda: ["original"])
    models: list = field(default_factory=list)  # dicts accepted by ModelConfig
    seed: int = 0
    count: int = 20
    sequence_length: int = 15
    out: str = "runs"

    @classmethod
    def from_file(cls, path) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise PipelineError(f"unknown manifest keys: {sorted(unknown)}")
        return cls(**doc)

    def sha256(self) -> str:
        canonical = json.dumps(self.__dict__, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_provenance(out_dir: Path, manifest: RunManifest, command: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, "manifest_sha256": manifest.sha256()}
    (out_dir / "provenance.json").write_text(json.dumps(doc, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# Games on disk
# ---------------------------------------------------------------------------

def export_games(variant_root: Path, names) -> list:
    games_dir = variant_root / GAMES_DIR
    games_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name in names:
        path = games_dir / f"{name}.kif"
        path.write_text(game_source(name), encoding="utf-8")
        written.append(path)
    return written


def load_games_dir(variant_root: Path) -> dict:
    games_dir = variant_root / GAMES_DIR
    if not games_dir.is_dir():
        raise PipelineError(f"missing {games_dir}")
    out = {}
    for path in sorted(games_dir.glob("*.kif")):
        out[path.stem] = parse_description(
            path.read_text(encoding="utf-8"), source_name=path.stem
        )
    if not out:
        raise PipelineError(f"no .kif files under {games_dir}")
    return out


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def validate_game(desc: GameDescription, playouts: int = 5, max_steps: int = 25) -> list:
    """Safety and stratification checks plus smoke playouts; returns a list
    of failure messages (empty means the game passed)."""
    problems = []
    try:
        engine.compile_game(desc)
    except engine.EngineError as exc:
        return [f"stratification: {exc}"]
    if not desc.init_facts:
        problems.append("no init facts")
    try:
        for seed in range(playouts):
            playout = simulator.random_playout(desc, seed, max_steps)
            for state in playout.states:
                rendered = render(state)
                from .kif import parse_fact_set_strict

                if parse_fact_set_strict(rendered) != state:
                    problems.append(f"seed {seed}: state does not reparse canonically")
                    break
    except simulator.DeadEnd as exc:
        problems.append(str(exc))
    except engine.EngineError as exc:
        problems.append(f"evaluation: {exc}")
    return problems


def validate_paths(paths) -> dict:
    """path/name -> list of problems; parse errors come back as problems."""
    report = {}
    for path in paths:
        path = Path(path)
        try:
            desc = parse_description(path.read_text(encoding="utf-8"), source_name=path.stem)
        except Exception as exc:
            report[path.stem] = [f"parse: {exc}"]
            continue
        report[path.stem] = validate_game(desc)
    return report


# ---------------------------------------------------------------------------
# genbench
# ---------------------------------------------------------------------------

def genbench(variant_root: Path, manifest: RunManifest) -> dict:
    """Generate step instances and move sequences for every game under the
    variant root's Games/ directory."""
    games = load_games_dir(variant_root)
    counts = {}
    for name, desc in games.items():
        if manifest.games and name not in manifest.games:
            continue
        step_dir = variant_root / INSTANCES_DIR / STEP_INSTANCES_DIR / name
        seq_dir = variant_root / INSTANCES_DIR / MULTISTEP_DIR / name
        step_dir.mkdir(parents=True, exist_ok=True)
        seq_dir.mkdir(parents=True, exist_ok=True)
        instances = simulator.generate_step_instances(
            desc, count=manifest.count, seed=manifest.seed
        )
        for inst in instances:
            (step_dir / f"{inst.instance_id}.json").write_text(
                simulator.instance_to_json(inst, desc.roles), encoding="utf-8"
            )
        sequences = simulator.generate_sequences(
            desc,
            count=manifest.count,
            length=manifest.sequence_length,
            seed=manifest.seed,
        )
        for seq in sequences:
            (seq_dir / f"{seq.sequence_id}.json").write_text(
                simulator.sequence_to_json(seq, desc.roles), encoding="utf-8"
            )
        counts[name] = (len(instances), len(sequences))
        log.info("%s: %d instances, %d sequences", name, *counts[name])
    return counts


def load_instances(variant_root: Path, game: str, roles) -> list:
    step_dir = variant_root / INSTANCES_DIR / STEP_INSTANCES_DIR / game
    out = []
    for path in sorted(step_dir.glob("*.json")):
        out.append(simulator.instance_from_json(path.read_text(encoding="utf-8"), roles))
    return out


def load_sequences(variant_root: Path, game: str, roles) -> list:
    seq_dir = variant_root / INSTANCES_DIR / MULTISTEP_DIR / game
    out = []
    for path in sorted(seq_dir.glob("*.json")):
        out.append(simulator.sequence_from_json(path.read_text(encoding="utf-8"), roles))
    return out


# ---------------------------------------------------------------------------
# obfuscate
# ---------------------------------------------------------------------------

def default_dictionary() -> list:
    path = resources.files("ggpbench.data") / "dictionary_words.txt"
    return [w.strip() for w in path.read_text(encoding="utf-8").splitlines() if w.strip()]


def default_annotations() -> dict:
    """The bundled human annotations for the benchmark corpus."""
    path = resources.files("ggpbench.data") / "annotations.json"
    return json.loads(path.read_text(encoding="utf-8"))


def obfuscate_tree(
    src_root: Path,
    dst_root: Path,
    variant: str,
    seed: int = 0,
    dictionary: list | None = None,
) -> obfuscator.EncodingMap:
    """Mirror src_root/Games into dst_root/Games under a fresh global
    encoding; writes encoding.txt next to the mirrored games."""
    src_games = sorted((src_root / GAMES_DIR).glob("*.kif"))
    if not src_games:
        raise PipelineError(f"no games under {src_root / GAMES_DIR}")
    texts = [p.read_text(encoding="utf-8") for p in src_games]
    if variant == obfuscator.DICTIONARY and dictionary is None:
        dictionary = default_dictionary()
    emap = obfuscator.build_encoding(texts, variant, seed=seed, dictionary=dictionary)
    out_dir = dst_root / GAMES_DIR
    out_dir.mkdir(parents=True, exist_ok=True)
    for path, text in zip(src_games, texts):
        (out_dir / path.name).write_text(obfuscator.obfuscate(text, emap), encoding="utf-8")
    (dst_root / "encoding.txt").write_text(emap.to_text(), encoding="utf-8")
    return emap


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------

def features_table(
    descs: dict,
    annotations: dict | None = None,
    playout_count: int = 20,
    max_steps: int = 25,
    seed: int = 0,
) -> list:
    rows = []
    for name in sorted(descs):
        desc = descs[name]
        ann = (annotations or {}).get(name)
        rows.append(
            features.game_features(
                desc, annotations=ann, playout_count=playout_count,
                max_steps=max_steps, seed=seed,
            )
        )
    return rows


def rows_to_csv(rows: list) -> str:
    if not rows:
        return ""
    columns = ["Game"] + sorted({k for row in rows for k in row} - {"Game"})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, restval="", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        formatted = {
            k: (f"{v:.4f}".rstrip("0").rstrip(".") if isinstance(v, float) else v)
            for k, v in row.items()
        }
        writer.writerow(formatted)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def build_jobs(variant_root: Path, variant: str, task: int, manifest: RunManifest) -> list:
    """(EvalRequest, prompt) pairs for one task over the manifest's games."""
    games = load_games_dir(variant_root)
    jobs = []
    for name in sorted(games):
        if manifest.games and name not in manifest.games:
            continue
        desc = games[name]
        definition = (variant_root / GAMES_DIR / f"{name}.kif").read_text(encoding="utf-8")
        if task in (1, 2):
            for inst in load_instances(variant_root, name, desc.roles):
                req = harness.EvalRequest(
                    task=task, game=name, variant=variant, instance_id=inst.instance_id
                )
                fields = {"game_state": render(inst.game_state)}
                if task == 1:
                    fields["move"] = simulator.render_joint(inst.move, desc.roles)
                jobs.append((req, harness.render_prompt(req, definition, fields)))
        elif task == 3:
            for n in manifest.horizons:
                for seq in load_sequences(variant_root, name, desc.roles):
                    if len(seq.joints) < n:
                        continue
                    req = harness.EvalRequest(
                        task=3, game=name, variant=variant,
                        instance_id=seq.sequence_id, horizon=n,
                    )
                    lines = "\n".join(
                        simulator.render_joint(j, desc.roles) for j in seq.joints[:n]
                    )
                    fields = {"move_sequence": lines}
                    jobs.append((req, harness.render_prompt(req, definition, fields)))
        elif task == 4:
            legal = engine.legal_moves(desc, engine.initial_state(desc))
            example = simulator.render_joint(
                {r: sorted(legal[r], key=render)[0] for r in desc.roles}, desc.roles
            )
            for n in manifest.horizons:
                for k in range(manifest.count):
                    req = harness.EvalRequest(
                        task=4, game=name, variant=variant,
                        instance_id=f"{name}_gen_{k:03d}", horizon=n,
                        move_example=example,
                    )
                    jobs.append((req, harness.render_prompt(req, definition, {})))
    return jobs


def run_task(
    variant_root: Path,
    variant: str,
    task: int,
    manifest: RunManifest,
    cfg: harness.ModelConfig,
    client=None,
) -> list:
    """Query the model for every job of one task and persist JSON-lines
    results under Results/<task dir>/<model>/<game>.jsonl."""
    jobs = build_jobs(variant_root, variant, task, manifest)
    written = []
    horizons = manifest.horizons if task in (3, 4) else [None]
    for n in horizons:
        subset = [j for j in jobs if j[0].horizon == n]
        if not subset:
            continue
        records = harness.run_requests(cfg, subset, client=client)
        out_dir = variant_root / RESULTS_DIR / harness.task_dir(task, n) / cfg.model
        out_dir.mkdir(parents=True, exist_ok=True)
        by_game: dict = {}
        for rec in records:
            by_game.setdefault(rec.game, []).append(rec)
        for game, recs in sorted(by_game.items()):
            # reruns get fresh files instead of mutating earlier output
            path = out_dir / f"{game}.jsonl"
            serial = 1
            while path.exists():
                serial += 1
                path = out_dir / f"{game}.{serial}.jsonl"
            harness.write_results(path, recs)
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------

def _expected_for(task, variant_root, desc, record, sequences_by_id):
    if task in (1, 2):
        instances = {
            i.instance_id: i for i in load_instances(variant_root, record.game, desc.roles)
        }
        inst = instances.get(record.instance_id)
        if inst is None:
            raise PipelineError(f"no fixture for {record.instance_id}")
        if task == 1:
            return inst.next_state
        return frozenset(
            (r, a) for r, acts in inst.legal_moves.items() for a in acts
        )
    if task == 3:
        seq = sequences_by_id.get(record.instance_id)
        if seq is None:
            raise PipelineError(f"no sequence fixture for {record.instance_id}")
        return simulator.replay(desc, seq, record.horizon)
    return None  # task 4 grounds against the answer's own moves


def score_tree(variant_root: Path, manifest: RunManifest) -> list:
    """Re-parse every stored raw response and score it against the fixtures;
    returns flat per-instance rows ready for aggregation. Pure function of
    the on-disk results + fixtures (no network, no model access)."""
    games = load_games_dir(variant_root)
    results_root = variant_root / RESULTS_DIR
    if not results_root.is_dir():
        raise PipelineError(f"no results under {variant_root}")
    rows = []
    for task_dir_path in sorted(results_root.iterdir()):
        if not task_dir_path.is_dir():
            continue
        for model_dir in sorted(task_dir_path.iterdir()):
            if not model_dir.is_dir():
                continue
            for res_file in sorted(model_dir.glob("*.jsonl")):
                game = res_file.stem.split(".")[0]
                desc = games.get(game)
                if desc is None:
                    raise PipelineError(f"results for unknown game {game}")
                seqs = {
                    s.sequence_id: s
                    for s in load_sequences(variant_root, game, desc.roles)
                } if (variant_root / INSTANCES_DIR / MULTISTEP_DIR / game).is_dir() else {}
                for record in harness.read_results(res_file):
                    answer = harness.parse_response(record.task, record.raw_response)
                    expected = _expected_for(
                        record.task, variant_root, desc, record, seqs
                    )
                    score = metrics.score_instance(
                        record.task, expected, answer,
                        desc=desc, horizon=record.horizon,
                        instance_id=record.instance_id,
                    )
                    rows.append(
                        {
                            "task": record.task,
                            "model": record.model,
                            "variant": record.variant,
                            "horizon": record.horizon,
                            "game": game,
                            "instance": record.instance_id,
                            "ji": score.ji,
                            "exact": score.exact,
                            "zero_reason": score.zero_reason,
                            "missing": score.missing,
                            "superfluous": score.superfluous,
                        }
                    )
    return rows


def aggregate_rows(rows: list) -> list:
    return metrics.aggregate(rows, ["task", "model", "variant", "horizon", "game"])


def aggregate_to_csv(table: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["task", "model", "variant", "horizon", "game", "ji", "pct_s", "n"])
    for row in table:
        writer.writerow(
            [
                row["task"],
                row["model"],
                row["variant"],
                row["horizon"] if row["horizon"] is not None else "",
                row["game"],
                f"{row['ji']:.3f}",
                f"{row['pct_s']:.3f}",
                row["n"],
            ]
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# stats
# ---------------------------------------------------------------------------

def stats_report(results: dict, features_table: dict) -> dict:
    """Obfuscation signed-rank comparisons and feature correlations over a
    published-results-shaped table."""
    from . import published

    report: dict = {"wilcoxon": {}, "pearson": {}}
    variants = list(OBFUSCATION_TABLES)
    for model in published.MODELS:
        entry = {}
        for i, a in enumerate(variants):
            for b in variants[i + 1 :]:
                try:
                    stat = published.obfuscation_wilcoxon(results, model, a, b)
                    entry[f"{a} vs {b}"] = {
                        "p": round(stat.p_value, 6),
                        "n_effective": stat.n_effective,
                    }
                except metrics.AllZeroDifferences:
                    entry[f"{a} vs {b}"] = {"p": None, "n_effective": 0}
        report["wilcoxon"][model] = entry
    feature_names = sorted(next(iter(features_table.values())).keys())
    report["pearson"] = published.feature_correlations(
        results, features_table, feature_names
    )
    return report
