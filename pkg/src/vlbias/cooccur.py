"""Group x target-noun co-occurrence counts over text contexts."""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DataError, DomainError, ShapeError
from .labels import GROUP_NAMES
from .lexicon import TargetNounList, default_stopwords

log = logging.getLogger(__name__)


@dataclass
class CooccurrenceMatrix:
    """``counts[g, t]``: contexts where group ``g`` and target ``t`` co-occur.

    With ``multiplicity`` each context adds the number of distinct group
    words instead of 1.
    """

    targets: TargetNounList
    counts: np.ndarray
    contexts_seen: int = 0
    multiplicity: bool = False
    groups: tuple = GROUP_NAMES
    group_contexts: np.ndarray = None
    target_contexts: np.ndarray = None

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.group_contexts is None:
            self.group_contexts = np.zeros(len(self.groups), dtype=np.int64)
        if self.target_contexts is None:
            self.target_contexts = np.zeros(len(self.targets), dtype=np.int64)
        self.group_contexts = np.asarray(self.group_contexts, dtype=np.int64)
        self.target_contexts = np.asarray(self.target_contexts, dtype=np.int64)
        if self.counts.shape != (len(self.groups), len(self.targets)):
            raise ShapeError(
                f"counts shape {self.counts.shape} != ({len(self.groups)}, {len(self.targets)})")
        if (self.counts < 0).any():
            raise DataError("co-occurrence counts must be nonnegative")

    @classmethod
    def zeros(cls, targets, multiplicity=False):
        return cls(targets, np.zeros((len(GROUP_NAMES), len(targets)), dtype=np.int64),
                   0, multiplicity)

    def get(self, group, target):
        return int(self.counts[self.groups.index(group), self.targets.index[target]])

    def __add__(self, other):
        return merge(self, other)

    def __eq__(self, other):
        if not isinstance(other, CooccurrenceMatrix):
            return NotImplemented
        return (self.groups == other.groups and tuple(self.targets) == tuple(other.targets)
                and self.multiplicity == other.multiplicity
                and self.contexts_seen == other.contexts_seen
                and np.array_equal(self.counts, other.counts)
                and np.array_equal(self.group_contexts, other.group_contexts)
                and np.array_equal(self.target_contexts, other.target_contexts))

    def to_event_table(self):
        """Data-side EventTable (for ``y_at``) built from binary counts."""
        from .metrics import EventTable

        if self.multiplicity:
            raise DataError("probabilities need binary (non-multiplicity) counts")
        table = EventTable(self.groups, self.targets.nouns)
        table.total = self.contexts_seen
        table.data_attr = self.group_contexts.copy()
        table.data_task = self.target_contexts.copy()
        table.data_joint = self.counts.copy()
        return table

    # -- serialization: CSV (rows = groups) + JSON sidecar ---------------
    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", *self.targets.nouns])
        for g, row in zip(self.groups, self.counts):
            w.writerow([g, *(int(x) for x in row)])
        return buf.getvalue()

    def sidecar(self, **extra):
        meta = {"corpus_id": self.targets.corpus_id, "contexts_seen": self.contexts_seen,
                "multiplicity": self.multiplicity, "groups": list(self.groups),
                "n_targets": len(self.targets), "excluded_targets": list(self.targets.excluded),
                "group_contexts": self.group_contexts.tolist(),
                "target_contexts": self.target_contexts.tolist()}
        meta.update(extra)
        return meta

    def save(self, csv_path, **extra):
        csv_path = Path(csv_path)
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        sidecar = csv_path.with_suffix(".json")
        sidecar.write_text(json.dumps(self.sidecar(**extra), indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
        return csv_path, sidecar

    @classmethod
    def load(cls, csv_path):
        csv_path = Path(csv_path)
        meta = json.loads(csv_path.with_suffix(".json").read_text(encoding="utf-8"))
        rows = list(csv.reader(csv_path.read_text(encoding="utf-8").splitlines()))
        if not rows or rows[0][:1] != ["group"]:
            raise DataError(f"{csv_path}: missing 'group' header")
        nouns = tuple(rows[0][1:])
        groups = tuple(r[0] for r in rows[1:])
        try:
            counts = np.array([[int(x) for x in r[1:]] for r in rows[1:]], dtype=np.int64)
        except ValueError as exc:
            raise DataError(f"{csv_path}: {exc}") from None
        targets = TargetNounList(meta.get("corpus_id", csv_path.stem), nouns,
                                 tuple(meta.get("excluded_targets", ())))
        return cls(targets, counts.reshape(len(groups), len(nouns)),
                   int(meta["contexts_seen"]), bool(meta["multiplicity"]), groups,
                   meta.get("group_contexts"), meta.get("target_contexts"))


def _target_ids(lexicon, targets):
    """Kernel table covering both gender terms and target nouns."""
    table, group_of = lexicon.scan_table
    table = dict(table)
    group_of = list(group_of)
    target_of = [-1] * len(group_of)
    for t, noun in enumerate(targets.nouns):
        if noun in table:
            target_of[table[noun]] = t
        else:
            table[noun] = len(group_of)
            group_of.append(-1)
            target_of.append(t)
    return table, np.array(group_of, dtype=np.int8), np.array(target_of, dtype=np.intc)


def build_matrix(lexicon, targets, contexts, multiplicity=False, chunk_size=8192):
    """Accumulate co-occurrence counts over a stream of contexts."""
    if len(targets) == 0:
        raise DomainError("target list is empty")
    table, group_of, target_of = _target_ids(lexicon, targets)
    m = CooccurrenceMatrix.zeros(targets, multiplicity)
    it = iter(contexts)
    while True:
        chunk = list(itertools.islice(it, chunk_size))
        if not chunk:
            break
        m.contexts_seen += kernels.count_batch(chunk, table, group_of, target_of,
                                               m.counts, None, multiplicity,
                                               m.group_contexts, m.target_contexts)
    return m


def merge(m1, m2):
    if (m1.groups != m2.groups or tuple(m1.targets) != tuple(m2.targets)
            or m1.multiplicity != m2.multiplicity):
        raise ShapeError("cannot merge matrices with different groups, targets or modes")
    return CooccurrenceMatrix(m1.targets, m1.counts + m2.counts,
                              m1.contexts_seen + m2.contexts_seen, m1.multiplicity, m1.groups,
                              m1.group_contexts + m2.group_contexts,
                              m1.target_contexts + m2.target_contexts)


def candidate_counts(lexicon, corpus, noun_oracle=None, stopwords=None):
    """Per token: number of gender-bearing contexts containing it."""
    stop = default_stopwords() if stopwords is None else frozenset(stopwords)
    gender = lexicon.male_terms | lexicon.female_terms | lexicon.neutral_terms
    oracle = None if noun_oracle is None else {n.lower() for n in noun_oracle}
    table, _ = lexicon.scan_table
    counts = Counter()
    for text in corpus:
        tokens = set()
        has_gender = False
        for m in kernels.WORD_RE.finditer(text):
            tok = m.group().lower()
            if kernels.lookup(table, tok) is not None:
                has_gender = True
                continue
            if tok.endswith(("'s", "’s")):
                tok = tok[:-2]
            tokens.add(tok)
        if not has_gender:
            continue
        for tok in tokens:
            if tok in gender:
                continue
            if oracle is not None:
                if tok in oracle:
                    counts[tok] += 1
            elif len(tok) >= 3 and tok.isalpha() and tok not in stop:
                counts[tok] += 1
    return counts


def select_targets(lexicon, corpus, k, noun_oracle=None, corpus_id="selected", stopwords=None):
    """The ``k`` most frequent nouns co-occurring with gender terms.

    Ties are broken lexicographically, so the result does not depend on the
    order of the corpus.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    counts = candidate_counts(lexicon, corpus, noun_oracle, stopwords)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if len(ranked) < k:
        warnings.warn(f"only {len(ranked)} candidate nouns for k={k}", stacklevel=2)
    return TargetNounList(corpus_id, tuple(tok for tok, _ in ranked[:k]))
