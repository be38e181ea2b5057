"""Command-line entry point: ``topolink <subcommand> ...``.

Exit codes: 0 success, 2 validation error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import graph_store as gs
from .evaluate import DRIFT_COLUMNS, drift_report, format_table
from .pipeline import ConfigError, RunConfig, StageError, run, score
from .synthetic import GROWTH_RULES, gen_synthetic

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3


def _common(p):
    p.add_argument("--config", help="run config JSON file")
    p.add_argument("--seed", type=int, help="override the global seed")
    p.add_argument("--threads", type=int, help="worker threads")
    p.add_argument("--output-dir", help="override the output directory")
    p.add_argument("--format", choices=("csv", "binary"), help="output file format")


def _load_config(args):
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    cfg = RunConfig.load(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.output_dir is not None:
        overrides["output_dir"] = str(Path(args.output_dir).resolve())
    if args.format is not None:
        overrides["format"] = args.format
    return replace(cfg, **overrides).validate()


def _input_format(path, given):
    if given:
        return given
    with open(path, "rb") as fh:
        if fh.read(4) == gs.EDGE_MAGIC:
            return "binary"
    return "tsv" if str(path).endswith(".tsv") else "csv"


def cmd_ingest(args):
    edges = gs.ingest(args.edges, _input_format(args.edges, args.input_format))
    summary = edges.summary()
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        if (args.format or "binary") == "binary":
            gs.write_binary_edges(edges, out / "edges.lfel")
        else:
            gs.write_csv_edges(edges, out / "edges.csv")
        (out / "ingest.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))


def cmd_snapshot_stats(args):
    edges = gs.ingest(args.edges, _input_format(args.edges, args.input_format))
    cutoffs = args.cutoff or [edges.t_max if len(edges) else 0]
    rows = [gs.snapshot(edges, c).stats() for c in cutoffs]
    print(json.dumps(rows, indent=1))


def _stage_cmd(stage):
    def cmd(args):
        manifest = run(_load_config(args), until=stage)
        print(json.dumps(manifest.to_dict(), indent=1, sort_keys=True))

    return cmd


def cmd_drift(args):
    cfg = _load_config(args)
    if not cfg.drift:
        raise ConfigError("config has no 'drift' section")
    edges = gs.ingest(cfg.edge_path, cfg.edge_format)
    rows = drift_report(edges, cfg.drift["train_windows"], cfg.drift["eval_windows"], cfg, cfg.out_path)
    print(format_table(rows, DRIFT_COLUMNS))


def cmd_score(args):
    if args.config:
        cfg = _load_config(args)
        window = cfg.eval_window or cfg.train_window
        cutoffs, _ = window.resolve(cfg.years)
        min_degree, edges_path, edge_format = cfg.sampling.min_degree, cfg.edge_path, cfg.edge_format
        two_band, threads = cfg.sampling.two_band, cfg.threads
    else:
        if not (args.cutoffs and args.edges):
            raise ConfigError("score needs --config or both --edges and --cutoffs")
        cutoffs = [int(c) for c in args.cutoffs.split(",")]
        edges_path = args.edges
        edge_format = _input_format(args.edges, args.input_format)
        min_degree, two_band, threads = args.min_degree, False, args.threads or 1
    if args.edges:
        edges_path = args.edges
    n = score(args.model, edges_path, cutoffs, args.output, min_degree=min_degree,
              edge_format=edge_format, threads=threads, two_band=two_band)
    print(json.dumps({"scored_pairs": n, "output": str(args.output)}))


def cmd_synth(args):
    edges = gen_synthetic(args.nodes, args.steps, args.growth, args.seed or 0)
    if (args.format or "csv") == "binary":
        gs.write_binary_edges(edges, args.output)
    else:
        gs.write_csv_edges(edges, args.output)
    print(json.dumps(edges.summary(), sort_keys=True))


def build_parser():
    parser = argparse.ArgumentParser(prog="topolink", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate an edge file and print its summary")
    p.add_argument("edges")
    p.add_argument("--input-format", choices=("csv", "tsv", "binary"))
    _common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("snapshot-stats", help="node/edge/degree statistics per cutoff")
    p.add_argument("edges")
    p.add_argument("--cutoff", type=int, action="append")
    p.add_argument("--input-format", choices=("csv", "tsv", "binary"))
    _common(p)
    p.set_defaults(func=cmd_snapshot_stats)

    for stage, text in (
        ("sample", "build the balanced train/holdout pair sample"),
        ("extract", "extract the 45 window features"),
        ("reduce", "fit grouped PCA and standardization"),
        ("train", "train the classifier"),
        ("evaluate", "compute holdout and eval-window AUC"),
        ("run", "run every stage"),
    ):
        p = sub.add_parser(stage, help=text)
        _common(p)
        p.set_defaults(func=_stage_cmd("evaluate" if stage == "run" else stage))

    p = sub.add_parser("drift", help="train/eval AUC table across windows")
    _common(p)
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("score", help="score candidate pairs with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--edges")
    p.add_argument("--cutoffs", help="comma-separated feature cutoffs (three)")
    p.add_argument("--min-degree", type=int, default=10)
    p.add_argument("--input-format", choices=("csv", "tsv", "binary"))
    p.add_argument("--output", required=True)
    _common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("synth", help="generate a synthetic temporal edge list")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--growth", choices=GROWTH_RULES, default="preferential")
    p.add_argument("--output", required=True)
    _common(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, gs.GraphError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as exc:
        cause = exc.__cause__
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION if isinstance(cause, (gs.GraphError, FileNotFoundError)) else EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
