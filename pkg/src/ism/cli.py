"""Command-line front end.

Exit status is 0 on success, 1 on a usage error and 2 on a data error.
``mine`` logs one line per structural iteration to stderr::

    ism iteration=<i> candidates=<evaluated> accepted=<n> patterns=<|I|> objective=<mean log-prob>
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence as Seq

from . import io
from .core import SequenceDatabase
from .evaluation import (
    RECALL_LEVELS,
    feature_matrix,
    interpolated_precision_11pt,
    pr_curve,
    precision_recall_at_k,
    rank_patterns,
    redundancy_metrics,
)
from .generator import parallel_process_db, sample_database
from .inference import CoverageError
from .learning import EmConfig, Miner

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ism", description="Mine interesting sequential patterns with a probabilistic model.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    p.add_argument("-q", "--quiet", action="store_true", help="no progress lines")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def db_args(sp):
        sp.add_argument("--input", "-i", required=True, help="sequence database")
        sp.add_argument("--format", choices=io.FORMATS, default="plain")

    m = sub.add_parser("mine", help="learn a model and rank its patterns")
    db_args(m)
    m.add_argument("--output", "-o", required=True, help="ranked pattern TSV")
    m.add_argument("--model-out", help="also write the model as JSON")
    m.add_argument("--iterations", type=_positive, default=1000)
    m.add_argument("--queue-size", type=_positive, default=100_000)
    m.add_argument("--tolerance", type=float, default=1e-5)
    m.add_argument("--em-interval", type=_positive, default=1)
    m.add_argument("--max-em-iterations", type=_positive, default=100)
    m.add_argument("--threads", type=_positive, default=1)
    m.add_argument("--seed", type=int, default=0, help="recorded; the search itself is deterministic")

    r = sub.add_parser("rank", help="rank a stored model's patterns on a database")
    db_args(r)
    r.add_argument("--model", required=True)
    r.add_argument("--output", "-o", required=True)
    r.add_argument("--threads", type=_positive, default=1)

    g = sub.add_parser("generate", help="sample a database from a stored model")
    g.add_argument("--model", required=True)
    g.add_argument("--rows", type=_positive, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", choices=io.FORMATS, default="plain")
    g.add_argument("--output", "-o", required=True)

    s = sub.add_parser("synth-parallel", help="interleaved cyclic processes")
    s.add_argument("--processes", type=_positive, default=5)
    s.add_argument("--process-items", type=_positive, default=5)
    s.add_argument("--total-length", type=_positive, default=1_000_000)
    s.add_argument("--row-length", type=_positive, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--format", choices=io.FORMATS, default="plain")
    s.add_argument("--output", "-o", required=True)
    s.add_argument("--generating-out", help="write the true per-process patterns here")

    e = sub.add_parser("evaluate", help="precision/recall of mined against generating patterns")
    e.add_argument("--mined", required=True, help="ranked TSV or one pattern per line")
    e.add_argument("--generating", required=True, help="one pattern per line")
    e.add_argument("--non-singletons", action="store_true", help="drop length-1 mined patterns first")

    d = sub.add_parser("redundancy", help="ISD, CS and unique items of a pattern list")
    d.add_argument("--patterns", required=True)
    d.add_argument("--top-k", type=_positive)

    f = sub.add_parser("features", help="binary pattern-occurrence matrix")
    db_args(f)
    f.add_argument("--patterns", required=True)
    f.add_argument("--top-k", type=_positive)
    f.add_argument("--labels", help="one label per row, passed through as the first column")
    f.add_argument("--delimiter", default=",")
    f.add_argument("--output", "-o", required=True)
    return p


def _token_patterns(path: str) -> list[tuple[str, ...]]:
    """Patterns as token tuples, from a ranked TSV or a plain list."""
    lines = io.read_lines(path)
    if lines and tuple(lines[0].split("\t")) == io.PATTERN_COLUMNS:
        lines = [line.split("\t")[0] for line in lines[1:]]
    return [tuple(line.split()) for line in lines if line.strip()]


def _mine(args) -> int:
    db, vocab = io.parse_database(args.input, args.format)
    cfg = EmConfig(tolerance=args.tolerance, max_em_iterations=args.max_em_iterations,
                   structural_iterations=args.iterations, em_interval=args.em_interval,
                   queue_capacity=args.queue_size, workers=args.threads)
    model, coverings = Miner(db, cfg).run()
    io.write_patterns(rank_patterns(model, coverings, db), vocab, args.output)
    if args.model_out:
        io.serialize_model(model, vocab, args.model_out)
    return EXIT_OK


def _rank(args) -> int:
    model, vocab = io.deserialize_model(args.model)
    db, _ = io.parse_database(args.input, args.format, vocab=io.Vocabulary(list(vocab.id_to_token)))
    if db.vocab_size > model.vocab_size:
        raise io.DataError(f"{args.input}: tokens outside the model vocabulary")
    db = SequenceDatabase(db.rows, model.vocab_size)
    miner = Miner(db, EmConfig(workers=args.threads), model)
    coverings = miner._full_e_step()
    io.write_patterns(rank_patterns(model, coverings, db), vocab, args.output)
    return EXIT_OK


def _generate(args) -> int:
    model, vocab = io.deserialize_model(args.model)
    db = sample_database(model, args.rows, seed=args.seed)
    io.write_database(db, vocab, args.output, args.format)
    return EXIT_OK


def _synth_parallel(args) -> int:
    if args.total_length % args.row_length:
        raise UsageError("--row-length must divide --total-length")
    db, generating = parallel_process_db(args.processes, args.process_items, args.total_length,
                                         args.row_length, seed=args.seed)
    vocab = io.Vocabulary.identity(db.vocab_size)
    io.write_database(db, vocab, args.output, args.format)
    if args.generating_out:
        Path(args.generating_out).write_text("".join(" ".join(vocab.tokens(s)) + "\n" for s in sorted(generating)))
    return EXIT_OK


def _evaluate(args) -> int:
    mined = _token_patterns(args.mined)
    if args.non_singletons:
        mined = [s for s in mined if len(s) > 1]
    generating = set(_token_patterns(args.generating))
    if not mined:
        raise io.DataError(f"{args.mined}: no patterns")
    if not generating:
        raise io.DataError(f"{args.generating}: no patterns")
    out = sys.stdout
    out.write("k\tprecision\trecall\n")
    for k in range(1, len(mined) + 1):
        p, r = precision_recall_at_k(mined, generating, k)
        out.write(f"{k}\t{p:.6f}\t{r:.6f}\n")
    out.write("recall_level\tinterpolated_precision\n")
    for level, p in zip(RECALL_LEVELS, interpolated_precision_11pt(pr_curve(mined, generating))):
        out.write(f"{level:.1f}\t{p:.6f}\n")
    return EXIT_OK


def _redundancy(args) -> int:
    isd, cs, unique = redundancy_metrics(_token_patterns(args.patterns), args.top_k)
    sys.stdout.write(f"isd\t{isd:.6f}\ncs\t{cs:.6f}\nunique_items\t{unique}\n")
    return EXIT_OK


def _features(args) -> int:
    db, vocab = io.parse_database(args.input, args.format)
    patterns = []
    for s in _token_patterns(args.patterns):
        # a pattern using an unseen token can never occur; intern it anyway for the header
        patterns.append(tuple(vocab.intern(t) for t in s))
    k = args.top_k if args.top_k is not None else len(patterns)
    if k > len(patterns):
        raise UsageError(f"--top-k {k} exceeds the {len(patterns)} patterns available")
    labels = None
    if args.labels:
        labels = [line.strip() for line in io.read_lines(args.labels)]
    matrix = feature_matrix(db, patterns, k)
    io.write_feature_matrix(matrix, patterns, vocab, args.output, labels, args.delimiter)
    return EXIT_OK


COMMANDS = {
    "mine": _mine,
    "rank": _rank,
    "generate": _generate,
    "synth-parallel": _synth_parallel,
    "evaluate": _evaluate,
    "redundancy": _redundancy,
    "features": _features,
}


def run_cli(argv: Seq[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(message)s", stream=sys.stderr, force=True)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ism {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (io.DataError, CoverageError, ValueError) as exc:
        print(f"ism {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"ism {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
