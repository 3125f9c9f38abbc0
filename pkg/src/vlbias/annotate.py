"""Gender labels for texts and for images described by several captions."""
from __future__ import annotations

import itertools
import logging
import multiprocessing
from collections import Counter, OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import DataError, DomainError
from .labels import GROUPS, DiscardReason, GenderLabel, Verdict

log = logging.getLogger(__name__)

UNIT_KINDS = ("image", "text")


@dataclass
class TextGenderEvidence:
    male_hits: int = 0
    female_hits: int = 0
    neutral_hits: int = 0
    # (token index, token, label); None when only counts were collected
    tokens_matched: Optional[List[Tuple[int, str, GenderLabel]]] = field(default_factory=list)

    @property
    def hits(self):
        return (self.male_hits, self.female_hits, self.neutral_hits)

    @property
    def total(self):
        return self.male_hits + self.female_hits + self.neutral_hits

    def to_dict(self):
        d = {"male": self.male_hits, "female": self.female_hits, "neutral": self.neutral_hits}
        if self.tokens_matched is not None:
            d["matched"] = [[i, tok, lab.value] for i, tok, lab in self.tokens_matched]
        return d


@dataclass
class LabeledExample:
    example_id: str
    label: GenderLabel
    reason: Optional[DiscardReason]
    evidence: List[TextGenderEvidence]
    source: str  # caption-majority | question | sentence

    def __post_init__(self):
        if (self.label is GenderLabel.DISCARDED) != (self.reason is not None):
            raise ValueError("a discard reason is required exactly for Discarded labels")

    @property
    def verdict(self):
        return Verdict(self.label, self.reason)

    def to_dict(self, with_evidence=True):
        d = {"id": self.example_id, "label": self.label.value,
             "reason": None if self.reason is None else self.reason.value,
             "source": self.source}
        if with_evidence:
            d["evidence"] = [e.to_dict() for e in self.evidence]
        return d


def scan_text(lexicon, text):
    """Count lexicon hits per gender group in one text."""
    ev = TextGenderEvidence()
    for i, m in enumerate(kernels.WORD_RE.finditer(text)):
        label = lexicon.classify(m.group())
        if label is GenderLabel.MALE:
            ev.male_hits += 1
        elif label is GenderLabel.FEMALE:
            ev.female_hits += 1
        elif label is GenderLabel.NEUTRAL:
            ev.neutral_hits += 1
        else:
            continue
        ev.tokens_matched.append((i, m.group(), label))
    return ev


def decide(per_text_hits: Sequence[Sequence[int]]) -> Verdict:
    """Unit-level decision from per-text ``(male, female, neutral)`` hit counts.

    Male needs a strict majority of texts with a male term and no text with a
    female term (symmetrically for Female).  A gender majority spoiled by the
    other gender is discarded as mixed; units without any person mention are
    discarded; everything else is Neutral.
    """
    n = len(per_text_hits)
    if n == 0:
        raise DomainError("a unit needs at least one text")
    male = female = 0
    person = False
    for m, f, nn in per_text_hits:
        male += m > 0
        female += f > 0
        person = person or (m > 0 or f > 0 or nn > 0)
    if not person:
        return Verdict(GenderLabel.DISCARDED, DiscardReason.NO_PERSON)
    male_major = 2 * male > n
    female_major = 2 * female > n
    if male_major and female == 0:
        return Verdict(GenderLabel.MALE)
    if female_major and male == 0:
        return Verdict(GenderLabel.FEMALE)
    if male_major or female_major:
        return Verdict(GenderLabel.DISCARDED, DiscardReason.MIXED)
    return Verdict(GenderLabel.NEUTRAL)


def label_single_text(lexicon, text) -> Verdict:
    return decide([scan_text(lexicon, text).hits])


def label_image(lexicon, captions, example_id=""):
    if not captions:
        raise DataError(f"image {example_id!r} has no captions")
    evidence = [scan_text(lexicon, c) for c in captions]
    label, reason = decide([e.hits for e in evidence])
    return LabeledExample(example_id, label, reason, evidence, "caption-majority")


# --------------------------------------------------------------------------
# corpora


@dataclass
class LabelSummary:
    counts: Counter = field(default_factory=Counter)
    reasons: Counter = field(default_factory=Counter)

    def add(self, verdict):
        self.counts[verdict.label.value] += 1
        if verdict.reason is not None:
            self.reasons[verdict.reason.value] += 1

    def merge(self, other):
        return LabelSummary(self.counts + other.counts, self.reasons + other.reasons)

    @property
    def units(self):
        return sum(self.counts.values())

    @property
    def retained(self):
        return sum(self.counts[g.value] for g in GROUPS)

    def to_dict(self):
        d = {g.value: self.counts[g.value] for g in (*GROUPS, GenderLabel.DISCARDED)}
        d["retained"] = self.retained
        d["total"] = self.units
        d["discarded_by_reason"] = {r.value: self.reasons[r.value] for r in DiscardReason}
        return d


RECENT_IMAGE_WINDOW = 4096


def group_units(records, unit="image"):
    """Group caption records into ``(unit_id, [texts])``.

    For ``unit="image"`` the records must be contiguous per image id.  A
    split block is detected when the image reappears within the last
    ``RECENT_IMAGE_WINDOW`` images, which keeps memory flat on huge inputs.
    """
    if unit not in UNIT_KINDS:
        raise DomainError(f"unit must be one of {UNIT_KINDS}")
    if unit == "text":
        for r in records:
            yield r.caption_id, [r.text]
        return
    recent = OrderedDict()
    for image_id, group in itertools.groupby(records, key=lambda r: r.image_id):
        if image_id in recent:
            raise DataError(
                f"image {image_id!r} appears in separate blocks; sort captions by image id")
        recent[image_id] = None
        if len(recent) > RECENT_IMAGE_WINDOW:
            recent.popitem(last=False)
        yield image_id, [r.text for r in group]


def _label_chunk(args):
    lexicon, chunk, source = args
    table, group_of = lexicon.scan_table
    texts = [t for _, ts in chunk for t in ts]
    hits = np.zeros((len(texts), 3), dtype=np.int64)
    kernels.count_batch(texts, table, group_of, np.full(len(group_of), -1, dtype=np.intc),
                        None, hits)
    out = []
    row = 0
    for uid, ts in chunk:
        h = hits[row:row + len(ts)]
        row += len(ts)
        label, reason = decide(h.tolist())
        ev = [TextGenderEvidence(int(a), int(b), int(c), None) for a, b, c in h]
        out.append(LabeledExample(str(uid), label, reason, ev, source))
    return out


def label_corpus(lexicon, records, unit="image", source=None, summary=None,
                 jobs=1, stable_order=True, chunk_size=4096):
    """Label every unit of a caption/question stream.

    Yields :class:`LabeledExample` (evidence carries counts only) and adds
    each verdict to ``summary`` when one is given.  With ``jobs > 1`` chunks
    are labeled in worker processes; output order then follows completion
    unless ``stable_order`` is set.
    """
    if source is None:
        source = "caption-majority" if unit == "image" else "question"
    units = group_units(records, unit)
    chunks = ((lexicon, chunk, source) for chunk in _chunked(units, chunk_size))
    if jobs <= 1:
        results = map(_label_chunk, chunks)
        pool = None
    else:
        pool = multiprocessing.Pool(jobs)
        results = (pool.imap if stable_order else pool.imap_unordered)(_label_chunk, chunks)
    try:
        for batch in results:
            for ex in batch:
                if summary is not None:
                    summary.add(ex.verdict)
                yield ex
    finally:
        if pool is not None:
            pool.terminate()


def _chunked(iterable, size):
    it = iter(iterable)
    while True:
        chunk = list(itertools.islice(it, size))
        if not chunk:
            return
        yield chunk


def annotate_texts(lexicon, texts: Iterable[str]):
    """Verdicts for single texts (questions, sentences), in input order."""
    for chunk in _chunked(texts, 4096):
        for ex in _label_chunk((lexicon, [(i, [t]) for i, t in enumerate(chunk)], "question")):
            yield ex.verdict
