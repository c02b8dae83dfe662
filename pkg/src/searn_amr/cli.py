"""Command-line front end: align, train, parse and eval."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .corpus import (
    LoadError, Span, force_align, format_alignment, format_corpus_entry, load_corpus,
    load_date_patterns, load_sentences, write_blocks,
)
from .evaluate import concept_eval, macro_average, micro_average, smatch
from .graph import (
    NULL, ConceptLabel, GraphError, GraphFragment, PenmanError, is_acyclic, is_connected,
    is_rooted, parse_penman, read_penman_blocks,
)
from .learner import (
    FORMAT_VERSION, FULLY_AUTOMATIC, ONE_BEST_CONCEPTS, ORACLE_CONCEPTS, ModelError,
    OraclePolicy, PolicyModel, SearnConfig, TrainingError, load_model, parse_example,
    save_model, searn_train,
)

log = logging.getLogger("searn_amr")

EXIT_OK, EXIT_PIPELINE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments or unusable input files (exit code 2)."""


def _require(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise UsageError(f"no such file: {p}")


# -- align -------------------------------------------------------------------------

def cmd_align(args) -> int:
    _require(args.corpus, args.annotations, args.alignments)
    examples = load_corpus(args.corpus, args.annotations, args.alignments)
    completed = force_align(examples)
    added = sum(len(new.alignment) - len(old.alignment) for old, new in zip(examples, completed))
    write_blocks(args.output, (format_alignment(ex) for ex in completed))
    print(f"added {added} alignment(s) over {len(examples)} sentence(s)")
    return EXIT_OK


# -- train -------------------------------------------------------------------------

_CONFIG_FLAGS = ("C", "iterations", "beta", "seed", "hash_bits", "dep_cutoff", "eta0", "decay",
                 "passes", "restarts")


def cmd_train(args) -> int:
    _require(args.corpus, args.annotations, args.alignments, args.config)
    overrides = {k: getattr(args, k) for k in _CONFIG_FLAGS}
    try:
        config = SearnConfig.from_file(args.config, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    examples = load_corpus(args.corpus, args.annotations, args.alignments,
                           load_date_patterns(config.date_patterns_path))
    model = searn_train(examples, config)
    save_model(model, args.output)
    log.info("wrote %s", args.output)
    return EXIT_OK


# -- parse -------------------------------------------------------------------------

def _span_lines(example, result) -> List[str]:
    return [f"# ::span {span}\t{c.surface}" for span, c in zip(example.sentence.spans, result.concepts)]


def cmd_parse(args) -> int:
    mode = ORACLE_CONCEPTS if args.oracle else ONE_BEST_CONCEPTS if args.one_best else FULLY_AUTOMATIC
    _require(args.model, args.corpus, args.annotations, args.alignments)
    if args.oracle and (args.corpus is None or args.alignments is None):
        raise UsageError("--oracle needs the gold corpus and its alignments")
    if args.model is None and not args.oracle:
        raise UsageError("--model is required unless --oracle is given")
    model = load_model(args.model) if args.model is not None else None
    patterns = model.compiled_date_patterns() if model is not None else load_date_patterns()
    if args.corpus is not None:
        examples = load_corpus(args.corpus, args.annotations, args.alignments, patterns)
    else:
        examples = load_sentences(args.annotations, patterns)

    policy = None
    if model is None:
        # no learned model: follow the oracle for every decision
        model = PolicyModel.from_examples(examples, SearnConfig())
        policy = OraclePolicy()
    blocks = []
    for ex in examples:
        graph, result = parse_example(model, ex, mode, policy=policy)
        if not (is_rooted(graph) and is_connected(graph) and is_acyclic(graph)):
            raise GraphError(f"{ex.id}: post-processed graph is not a rooted DAG")
        blocks.append(format_corpus_entry(ex, graph, _span_lines(ex, result)))
    write_blocks(args.output, blocks)
    log.info("parsed %d sentence(s) in %s mode", len(examples), mode)
    return EXIT_OK


# -- eval --------------------------------------------------------------------------

def _read_graphs(path):
    out = []
    for meta, body in read_penman_blocks(Path(path).read_text(encoding="utf-8")):
        try:
            out.append((meta, parse_penman(body)))
        except PenmanError as exc:
            raise LoadError(meta.get("id", "?"), f"{path}: {exc}") from None
    return out


def _concept_from_surface(text: str):
    if text == NULL.surface:
        return NULL
    if text.startswith("("):
        return GraphFragment.from_surface(text)
    return ConceptLabel.parse(text)


def _predicted_concepts(meta):
    pairs = []
    for ln in meta.get("span", "").split("\n"):
        if not ln:
            continue
        span, _, concept = ln.partition("\t")
        pairs.append((Span.parse(span), _concept_from_surface(concept)))
    return pairs


def cmd_eval(args) -> int:
    _require(args.predicted, args.gold, args.annotations, args.alignments)
    pred = _read_graphs(args.predicted)
    gold = _read_graphs(args.gold)
    if len(pred) != len(gold):
        raise UsageError(f"{args.predicted} has {len(pred)} graph(s), {args.gold} has {len(gold)}")
    for (pm, _), (gm, _) in zip(pred, gold):
        if "id" in pm and "id" in gm and pm["id"] != gm["id"]:
            raise UsageError(f"example order differs: {pm['id']} vs {gm['id']}")

    if args.concepts:
        if args.annotations is None or args.alignments is None:
            raise UsageError("--concepts needs --annotations and --alignments for the gold file")
        gold_examples = {ex.id: ex for ex in load_corpus(args.gold, args.annotations, args.alignments)}
        reports = []
        for pm, _ in pred:
            eid = pm.get("id")
            if eid not in gold_examples:
                raise UsageError(f"no gold example for {eid!r}")
            concepts = _predicted_concepts(pm)
            if not concepts:
                raise UsageError(f"{eid}: predicted file has no '# ::span' lines")
            try:
                reports.append((eid, concept_eval(concepts, gold_examples[eid])))
            except ValueError as exc:
                raise LoadError(eid, str(exc)) from None
    else:
        reports = [(pm.get("id", str(k + 1)), smatch(pg, gg, restarts=args.restarts, seed=args.seed))
                   for k, ((pm, pg), (_, gg)) in enumerate(zip(pred, gold))]

    for eid, r in reports:
        print(f"{eid} {r.line()}")
    rs = [r for _, r in reports]
    print(f"corpus {micro_average(rs).line()}")
    p, r, f = macro_average(rs)
    print(f"corpus-macro {p:.4f} {r:.4f} {f:.4f}")
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="searn-amr", description=__doc__)
    ap.add_argument("--version", action="version", version=f"model format {FORMAT_VERSION}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("align", parents=[common], help="complete alignments by forced alignment")
    a.add_argument("corpus")
    a.add_argument("annotations")
    a.add_argument("alignments")
    a.add_argument("-o", "--output", required=True)
    a.set_defaults(func=cmd_align)

    t = sub.add_parser("train", parents=[common], help="train a parser with SEARN")
    t.add_argument("corpus")
    t.add_argument("annotations")
    t.add_argument("alignments")
    t.add_argument("-o", "--output", required=True, help="model file to write")
    t.add_argument("--config", help="key=value settings file")
    t.add_argument("--C", type=int, dest="C")
    t.add_argument("--iterations", type=int)
    t.add_argument("--beta", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--hash-bits", type=int, dest="hash_bits")
    t.add_argument("--dep-cutoff", type=int, dest="dep_cutoff")
    t.add_argument("--eta0", type=float)
    t.add_argument("--decay", type=float)
    t.add_argument("--passes", type=int)
    t.add_argument("--restarts", type=int)
    t.set_defaults(func=cmd_train)

    p = sub.add_parser("parse", parents=[common], help="parse sentences into AMRs")
    p.add_argument("--model")
    p.add_argument("--corpus", help="gold corpus (needed for --oracle)")
    p.add_argument("--annotations", required=True)
    p.add_argument("--alignments")
    p.add_argument("-o", "--output", required=True)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--oracle", action="store_true", help="gold concepts")
    mode.add_argument("--one-best", action="store_true", help="most frequent concept per span")
    mode.add_argument("--auto", action="store_true", help="predicted concepts")
    p.set_defaults(func=cmd_parse)

    e = sub.add_parser("eval", parents=[common], help="Smatch or concept scores")
    e.add_argument("predicted")
    e.add_argument("gold")
    e.add_argument("--concepts", action="store_true", help="score '# ::span' concepts")
    e.add_argument("--annotations")
    e.add_argument("--alignments")
    e.add_argument("--restarts", type=int, default=4)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LoadError, TrainingError, ModelError, PenmanError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
