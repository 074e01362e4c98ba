"""Reading and writing databases, ranked patterns and models.

Model files are JSON::

    {"format": "ism-model", "version": 1,
     "vocabulary": ["a", "b", ...],
     "patterns": [{"tokens": ["a", "b"], "probs": [0.25, 0.75]}, ...]}

Floats are written with ``repr`` so they reload bit-for-bit.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence as Seq

import numpy as np

from .core import Sequence, SequenceDatabase
from .evaluation import RankedPattern
from .inference import Model, MultiplicityDistribution

MODEL_FORMAT = "ism-model"
MODEL_VERSION = 1
PATTERN_COLUMNS = ("pattern", "interestingness", "inclusion_probability", "support", "explained_rows")
FORMATS = ("plain", "spmf")


class DataError(ValueError):
    """Malformed input; the message names the file and record at fault."""


@dataclass
class Vocabulary:
    """Token <-> dense item id, in first-appearance order."""

    id_to_token: list[str] = field(default_factory=list)
    token_to_id: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.token_to_id:
            self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("vocabulary tokens must be distinct")

    def intern(self, token: str) -> int:
        i = self.token_to_id.get(token)
        if i is None:
            i = self.token_to_id[token] = len(self.id_to_token)
            self.id_to_token.append(token)
        return i

    def lookup(self, token: str) -> int:
        try:
            return self.token_to_id[token]
        except KeyError:
            raise DataError(f"unknown token {token!r}") from None

    def tokens(self, seq: Iterable[int]) -> list[str]:
        return [self.id_to_token[x] for x in seq]

    def __len__(self) -> int:
        return len(self.id_to_token)

    @classmethod
    def identity(cls, size: int) -> Vocabulary:
        return cls([str(i) for i in range(size)])


def read_lines(path: str | Path) -> list[str]:
    try:
        return Path(path).read_text().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _spmf_tokens(line: str, where: str) -> list[str]:
    parts = line.split()
    if not parts or parts[-1] != "-2":
        raise DataError(f"{where}: SPMF record must end with -2")
    out = []
    itemset: list[str] = []
    for tok in parts[:-1]:
        if tok == "-1":
            if len(itemset) != 1:
                raise DataError(f"{where}: itemsets of size {len(itemset)} are not supported, need exactly 1")
            out.append(itemset[0])
            itemset = []
        elif tok == "-2":
            raise DataError(f"{where}: -2 before the end of the record")
        else:
            itemset.append(tok)
    if itemset:
        if len(itemset) != 1:
            raise DataError(f"{where}: itemsets of size {len(itemset)} are not supported, need exactly 1")
        out.append(itemset[0])
    return out


def parse_database(path: str | Path, fmt: str = "plain",
                   vocab: Vocabulary | None = None) -> tuple[SequenceDatabase, Vocabulary]:
    """One sequence per line; blank lines are skipped.

    ``plain`` is whitespace-separated tokens; ``spmf`` is items separated by
    ``-1`` and terminated by ``-2``, one item per itemset.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")
    vocab = vocab if vocab is not None else Vocabulary()
    rows = []
    for lineno, line in enumerate(read_lines(path), 1):
        if not line.strip() or (fmt == "spmf" and line.lstrip().startswith(("#", "@"))):
            continue
        tokens = line.split() if fmt == "plain" else _spmf_tokens(line, f"{path}:{lineno}")
        rows.append(tuple(vocab.intern(t) for t in tokens))
    if not rows:
        raise DataError(f"{path}: no sequences")
    return SequenceDatabase(rows, len(vocab)), vocab


def format_row(row: Seq[int], vocab: Vocabulary, fmt: str = "plain") -> str:
    tokens = vocab.tokens(row)
    if fmt == "plain":
        return " ".join(tokens)
    return " -1 ".join(tokens) + " -1 -2"


def write_database(db: SequenceDatabase | Iterable[Seq[int]], vocab: Vocabulary,
                   path: str | Path, fmt: str = "plain") -> None:
    with open(path, "w") as fh:
        for row in db:
            fh.write(format_row(row, vocab, fmt) + "\n")


def write_patterns(ranked: Iterable[RankedPattern], vocab: Vocabulary, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(PATTERN_COLUMNS)
        for r in ranked:
            w.writerow((" ".join(vocab.tokens(r.pattern)), f"{r.interestingness:.6f}",
                        repr(r.inclusion_probability), r.support, r.explained_rows))


def read_patterns(path: str | Path, vocab: Vocabulary) -> list[RankedPattern]:
    lines = read_lines(path)
    if not lines or tuple(lines[0].split("\t")) != PATTERN_COLUMNS:
        raise DataError(f"{path}:1: expected header {' '.join(PATTERN_COLUMNS)}")
    out = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        cols = line.split("\t")
        try:
            tokens, score, incl, supp, expl = cols
            out.append(RankedPattern(tuple(vocab.lookup(t) for t in tokens.split()),
                                     float(score), float(incl), int(supp), int(expl)))
        except (ValueError, DataError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


def read_pattern_list(path: str | Path, vocab: Vocabulary) -> list[Sequence]:
    """Patterns from a ranked TSV file, or one space-separated pattern per line."""
    lines = read_lines(path)
    if lines and tuple(lines[0].split("\t")) == PATTERN_COLUMNS:
        return [r.pattern for r in read_patterns(path, vocab)]
    out = []
    for lineno, line in enumerate(lines, 1):
        if line.strip():
            try:
                out.append(tuple(vocab.lookup(t) for t in line.split()))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


def serialize_model(model: Model, vocab: Vocabulary, path: str | Path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "vocabulary": vocab.id_to_token,
        "patterns": [{"tokens": vocab.tokens(s), "probs": list(d.probs)} for s, d in model.dists.items()],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def deserialize_model(path: str | Path) -> tuple[Model, Vocabulary]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load model {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise DataError(f"{path}: not an {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise DataError(f"{path}: model version {doc.get('version')!r}, expected {MODEL_VERSION}")
    try:
        vocab = Vocabulary(list(doc["vocabulary"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: bad vocabulary: {exc}") from exc
    dists = {}
    for k, entry in enumerate(doc.get("patterns", [])):
        where = f"{path}: pattern #{k}"
        try:
            tokens, probs = entry["tokens"], entry["probs"]
        except (KeyError, TypeError):
            raise DataError(f"{where}: needs 'tokens' and 'probs'") from None
        if not tokens:
            raise DataError(f"{where}: empty pattern")
        s = tuple(vocab.lookup(t) for t in tokens)
        if s in dists:
            raise DataError(f"{where}: duplicate pattern {tokens}")
        if not all(isinstance(p, (int, float)) and math.isfinite(p) for p in probs):
            raise DataError(f"{where}: probabilities must be finite numbers")
        try:
            dists[s] = MultiplicityDistribution(tuple(probs))
        except ValueError as exc:
            raise DataError(f"{where}: {exc}") from exc
    return Model(dists, len(vocab)), vocab


def write_feature_matrix(matrix: np.ndarray, patterns: Seq[Sequence], vocab: Vocabulary, path: str | Path,
                         labels: Seq[str] | None = None, delimiter: str = ",") -> None:
    """Header names each pattern column; an optional label column comes first."""
    if labels is not None and len(labels) != matrix.shape[0]:
        raise DataError(f"{len(labels)} labels for {matrix.shape[0]} rows")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        head = [" ".join(vocab.tokens(p)) for p in patterns[:matrix.shape[1]]]
        w.writerow((["label"] if labels is not None else []) + head)
        for i, row in enumerate(matrix.tolist()):
            w.writerow(([labels[i]] if labels is not None else []) + row)
