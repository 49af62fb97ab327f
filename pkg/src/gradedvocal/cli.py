"""Command-line entry point: ``gradedvocal [global options] <subcommand> [options]``.

Exit status is 0 on success. On failure a single JSON object
``{"error": ..., "message": ..., ["producer", "hint"]}`` is written to stderr
and the exit status is 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import describe_defaults, load_config
from .pipeline import AUDIO_CHAIN, STAGES, PipelineError, run_stage

# subcommand -> (help, [(flag, config key, extra argparse kwargs)])
SUBCOMMANDS = {
    "ingest": ("validate the annotation table and drop excluded contexts", []),
    "segment": ("split recordings (or annotated units) into syllables", [
        ("--entry", "segment.entry", {"choices": ["recording", "units"]}),
        ("--method", "segment.method", {"choices": ["dynamic", "fixed"]}),
    ]),
    "featurize": ("MFCC and coarse mel features per syllable", []),
    "label": ("DTW distances and hierarchical clustering into syllable types", [
        ("--grouping", "label.grouping", {"choices": ["emitter", "global"]}),
        ("--q", "label.q", {}),
    ]),
    "encode": ("turn labelled syllables into one symbol sequence per recording", []),
    "seqfeat": ("sequence predictors a..r and syllable frequency table", []),
    "mr": ("maximal-repeat inventories and length summaries", [
        ("--grouping", "maxrep.grouping", {"choices": ["context", "emitter"]}),
        ("--min-support", "maxrep.min_support", {}),
        ("--min-length", "maxrep.min_length", {}),
    ]),
    "fit": ("fit exponential / power-law / truncated power-law to repeat lengths", [
        ("--xmin", "stats.xmin", {}),
        ("--xmin-scan", "stats.xmin_scan", {"action": "store_const", "const": "true"}),
    ]),
    "test-hp1": ("classifier F1 on original vs order-shuffled sequences", [
        ("--scope", "classify.permutation_scope", {"choices": ["within", "corpus"]}),
    ]),
    "test-hp2": ("pairwise Wilcoxon tests on per-context syllable frequencies", []),
    "classify": ("cross-validated random-forest context classifier", [
        ("--k-folds", "classify.k_folds", {}),
    ]),
    "network": ("per-context transition graphs and small-world metrics", []),
    "synth": ("write a synthetic fixture (symbolic labels or audio + annotations)", [
        ("--mode", "synth.mode", {"choices": ["symbolic", "audio"]}),
        ("--corpus", "synth.corpus", {"choices": ["associative", "combinatorial"]}),
        ("--n-seqs", "synth.n_seqs", {}),
    ]),
    "report": ("collect result tables into report.json and report.csv", []),
}
assert set(SUBCOMMANDS) == set(STAGES)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradedvocal",
        description="Syllable segmentation, labelling and sequence analysis of vocal recordings.",
        epilog="config keys and defaults:\n" + describe_defaults()
               + "\n\nA typical audio run: " + " -> ".join(AUDIO_CHAIN),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-c", "--config", help="sectioned key=value config file")
    parser.add_argument("-w", "--workdir", default=".", help="directory holding all artifacts")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
    parser.add_argument("--seed", type=int, help="shorthand for --set run.master_seed=N")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")
    for name, (help_text, flags) in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        for flag, key, kw in flags:
            p.add_argument(flag, dest=key, default=None, help=f"sets {key}", **kw)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"run.master_seed={args.seed}")
    for _, key, _ in SUBCOMMANDS[args.command][1]:
        val = getattr(args, key, None)
        if val is not None:
            overrides.append(f"{key}={val}")
    try:
        cfg = load_config(args.config, overrides)
        summary = run_stage(args.command, cfg, args.workdir)
    except PipelineError as exc:
        err = exc.to_dict()
    except (ValueError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
    else:
        print(json.dumps({"stage": args.command, **summary}, sort_keys=True, default=str))
        return 0
    err["subcommand"] = args.command
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
