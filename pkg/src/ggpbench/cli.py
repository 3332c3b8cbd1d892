"""Command-line entry point.

Subcommands cover the whole workflow: validate game files, generate
benchmark fixtures, obfuscate a corpus, extract features, query models,
score stored results, and run the statistics. Every command is idempotent
given identical inputs and seeds.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness, pipeline, published
from .games import BENCHMARK_GAMES, game_source


def _add_common(p):
    p.add_argument("--games", nargs="*", default=None, help="restrict to these games")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("runs"))
    p.add_argument("--jobs", type=int, default=4, help="worker pool bound")


def _manifest_from_args(args) -> pipeline.RunManifest:
    if getattr(args, "manifest", None):
        manifest = pipeline.RunManifest.from_file(args.manifest)
    else:
        manifest = pipeline.RunManifest()
    if args.games:
        manifest.games = list(args.games)
    if getattr(args, "tasks", None):
        manifest.tasks = [int(t) for t in args.tasks]
    if getattr(args, "n", None):
        manifest.horizons = [int(n) for n in args.n]
    if getattr(args, "seed", None) is not None:
        manifest.seed = args.seed
    if getattr(args, "count", None):
        manifest.count = args.count
    return manifest


def cmd_validate(args) -> int:
    if args.files:
        report = pipeline.validate_paths(args.files)
    else:
        import tempfile

        names = args.games or list(BENCHMARK_GAMES)
        with tempfile.TemporaryDirectory() as tmp:
            paths = []
            for name in names:
                p = Path(tmp) / f"{name}.kif"
                p.write_text(game_source(name), encoding="utf-8")
                paths.append(p)
            report = pipeline.validate_paths(paths)
    failed = 0
    for name in sorted(report):
        problems = report[name]
        if problems:
            failed += 1
            print(f"FAIL {name}")
            for msg in problems:
                print(f"     {msg}")
        else:
            print(f"ok   {name}")
    print(f"{len(report) - failed}/{len(report)} games valid")
    return 1 if failed else 0


def cmd_genbench(args) -> int:
    manifest = _manifest_from_args(args)
    root = args.out / pipeline.VARIANT_DIRS[args.variant]
    if not (root / pipeline.GAMES_DIR).is_dir():
        if args.variant != "original":
            print(f"error: {root}/Games missing; run obfuscate first", file=sys.stderr)
            return 1
        pipeline.export_games(root, manifest.games)
    counts = pipeline.genbench(root, manifest)
    pipeline.write_provenance(root, manifest, "genbench")
    for game, (ni, ns) in sorted(counts.items()):
        print(f"{game}: {ni} instances, {ns} sequences")
    return 0


def cmd_obfuscate(args) -> int:
    manifest = _manifest_from_args(args)
    src = args.out / pipeline.VARIANT_DIRS["original"]
    if not (src / pipeline.GAMES_DIR).is_dir():
        pipeline.export_games(src, manifest.games)
    dst = args.out / pipeline.VARIANT_DIRS[args.variant]
    emap = pipeline.obfuscate_tree(src, dst, args.variant, seed=args.seed)
    pipeline.write_provenance(dst, manifest, f"obfuscate:{args.variant}")
    print(f"{len(emap.pairs)} symbols encoded -> {dst}")
    return 0


def cmd_features(args) -> int:
    manifest = _manifest_from_args(args)
    if args.dir:
        descs = pipeline.load_games_dir(Path(args.dir))
    else:
        from .kif import parse_description

        descs = {
            name: parse_description(game_source(name), source_name=name)
            for name in manifest.games
        }
    if args.annotations:
        from .features import load_annotations

        annotations = load_annotations(args.annotations)
    else:
        annotations = pipeline.default_annotations()
    rows = pipeline.features_table(descs, annotations=annotations, seed=manifest.seed)
    csv_text = pipeline.rows_to_csv(rows)
    if args.csv:
        Path(args.csv).write_text(csv_text, encoding="utf-8")
        print(f"wrote {args.csv}")
    else:
        print(csv_text, end="")
    return 0


def cmd_run(args) -> int:
    manifest = pipeline.RunManifest.from_file(args.manifest)
    if args.games:
        manifest.games = list(args.games)
    if not manifest.models:
        print("error: manifest lists no models", file=sys.stderr)
        return 1
    for variant in manifest.variants:
        root = args.out / pipeline.VARIANT_DIRS[variant]
        for model_doc in manifest.models:
            cfg = harness.ModelConfig(**model_doc)
            cfg.parallelism = args.jobs
            for task in manifest.tasks:
                written = pipeline.run_task(root, variant, task, manifest, cfg)
                for path in written:
                    print(path)
        pipeline.write_provenance(root, manifest, "run")
    return 0


def cmd_score(args) -> int:
    manifest = _manifest_from_args(args)
    root = args.out / pipeline.VARIANT_DIRS[args.variant]
    rows = pipeline.score_tree(root, manifest)
    table = pipeline.aggregate_rows(rows)
    csv_text = pipeline.aggregate_to_csv(table)
    out_csv = Path(args.csv) if args.csv else (root / "scores.csv")
    out_csv.write_text(csv_text, encoding="utf-8")
    out_json = out_csv.with_suffix(".json")
    out_json.write_text(json.dumps(table, indent=1, sort_keys=True), encoding="utf-8")
    print(f"{len(rows)} instances scored -> {out_csv} / {out_json.name}")
    return 0


def cmd_stats(args) -> int:
    results = published.load_results() if args.published else json.loads(
        Path(args.results).read_text(encoding="utf-8")
    )
    feats = published.load_features() if args.published else json.loads(
        Path(args.features).read_text(encoding="utf-8")
    )
    report = pipeline.stats_report(results, feats)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.json_out:
        Path(args.json_out).write_text(text, encoding="utf-8")
        print(f"wrote {args.json_out}")
    else:
        print(text)
    return 0


def cmd_report(args) -> int:
    manifest = _manifest_from_args(args)
    root = args.out / pipeline.VARIANT_DIRS[args.variant]
    rows = pipeline.score_tree(root, manifest)
    table = pipeline.aggregate_rows(rows)
    by_key: dict = {}
    for row in table:
        key = (row["task"], row["model"], row["horizon"])
        by_key.setdefault(key, []).append(row)
    for (task, model, horizon), group in sorted(by_key.items(), key=str):
        ji = sum(r["ji"] for r in group) / len(group)
        ps = sum(r["pct_s"] for r in group) / len(group)
        hz = f" n={horizon}" if horizon is not None else ""
        print(f"task {task}{hz} {model}: JI {ji:.3f}  %S {ps:.3f}  ({len(group)} games)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ggpbench",
        description="GDL reasoning workbench: simulate, benchmark, obfuscate, score.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse, stratify and smoke-test game files")
    p.add_argument("files", nargs="*", help="explicit .kif files (default: bundled games)")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("genbench", help="generate benchmark instances and sequences")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--variant", choices=list(pipeline.VARIANT_DIRS), default="original")
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--n", nargs="*", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_genbench)

    p = sub.add_parser("obfuscate", help="mirror the corpus under a symbol encoding")
    p.add_argument("--manifest", type=Path)
    p.add_argument(
        "--variant", choices=[v for v in pipeline.VARIANT_DIRS if v != "original"],
        required=True,
    )
    _add_common(p)
    p.set_defaults(func=cmd_obfuscate)

    p = sub.add_parser("features", help="structural/empirical feature table")
    p.add_argument("--dir", help="Games directory root (default: bundled games)")
    p.add_argument("--annotations", help="annotation JSON file")
    p.add_argument("--csv", help="output CSV path (default: stdout)")
    _add_common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("run", help="query models over generated fixtures")
    p.add_argument("--manifest", type=Path, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", help="score stored results against fixtures")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--variant", choices=list(pipeline.VARIANT_DIRS), default="original")
    p.add_argument("--csv", help="output CSV path")
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stats", help="Wilcoxon and Pearson reports")
    p.add_argument("--published", action="store_true", help="use bundled fixtures")
    p.add_argument("--results", help="results JSON (published_results shape)")
    p.add_argument("--features", help="features JSON (published_features shape)")
    p.add_argument("--json-out", dest="json_out")
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="per-task per-model summary of a scored run")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--variant", choices=list(pipeline.VARIANT_DIRS), default="original")
    _add_common(p)
    p.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
