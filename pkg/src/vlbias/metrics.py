"""Directional bias amplification, group scores and fairness statistics.

BiasAmp follows Wang & Russakovsky's directional definition.  For attribute
``a`` and task ``t``::

    y_at   = 1  iff  P(A_a=1, T_t=1) > P(A_a=1) P(T_t=1)   (reference data)
    A->T:  delta_at = P(T^_t=1 | A_a=1) - P(T_t=1 | A_a=1)
    T->A:  delta_at = P(A^_a=1 | T_t=1) - P(A_a=1 | T_t=1)
    BiasAmp = mean over measurable pairs of  y_at*delta_at - (1-y_at)*delta_at

Pairs whose conditioning marginal is zero are skipped and reported.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError, DomainError, MetricError
from .labels import GROUP_NAMES, GROUPS, GenderLabel, parse_label


class Direction(str, Enum):
    A_TO_T = "A->T"
    T_TO_A = "T->A"

    def __str__(self):
        return self.value


def _direction(d):
    if isinstance(d, Direction):
        return d
    s = str(d).strip().replace("→", "->").upper()
    for member in Direction:
        if s == member.value:
            return member
    raise ValueError(f"unknown direction {d!r}")


class EventTable:
    """Mergeable counts of attribute/task events in data and predictions.

    Each record carries gold attribute and task sets plus predicted ones.
    ``reference`` (training data) decides ``y_at`` when attached.
    """

    def __init__(self, groups=GROUP_NAMES, tasks=()):
        self.groups = tuple(groups)
        self.tasks = tuple(tasks)
        self._gi = {g: i for i, g in enumerate(self.groups)}
        self._ti = {t: i for i, t in enumerate(self.tasks)}
        A, T = len(self.groups), len(self.tasks)
        self.total = 0
        self.data_attr = np.zeros(A, dtype=np.int64)
        self.data_task = np.zeros(T, dtype=np.int64)
        self.data_joint = np.zeros((A, T), dtype=np.int64)
        self.pred_attr = np.zeros(A, dtype=np.int64)
        self.pred_task = np.zeros(T, dtype=np.int64)
        self.pred_joint_at = np.zeros((A, T), dtype=np.int64)  # gold attr & predicted task
        self.pred_joint_ta = np.zeros((A, T), dtype=np.int64)  # predicted attr & gold task
        self.reference: Optional[EventTable] = None

    def _idx(self, items, lookup):
        out = set()
        for x in items:
            if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
                out.add(int(x))
            else:
                key = x.value if isinstance(x, GenderLabel) else x
                if key in lookup:
                    out.add(lookup[key])
                else:
                    raise DataError(f"unknown event {x!r}")
        return sorted(out)

    def add(self, gold_attrs, gold_tasks, pred_attrs=None, pred_tasks=None):
        """Add one record; names or indices.  Predictions default to gold."""
        ga = self._idx(gold_attrs, self._gi)
        gt = self._idx(gold_tasks, self._ti)
        pa = ga if pred_attrs is None else self._idx(pred_attrs, self._gi)
        pt = gt if pred_tasks is None else self._idx(pred_tasks, self._ti)
        self.total += 1
        self.data_attr[ga] += 1
        self.data_task[gt] += 1
        self.pred_attr[pa] += 1
        self.pred_task[pt] += 1
        for a in ga:
            self.data_joint[a, gt] += 1
            self.pred_joint_at[a, pt] += 1
        for a in pa:
            self.pred_joint_ta[a, gt] += 1
        return self

    @classmethod
    def from_records(cls, groups, tasks, records):
        table = cls(groups, tasks)
        for rec in records:
            table.add(*rec)
        return table

    def merge(self, other):
        if self.groups != other.groups or self.tasks != other.tasks:
            raise DataError("event tables have different axes")
        out = EventTable(self.groups, self.tasks)
        for name in ("total", "data_attr", "data_task", "data_joint", "pred_attr",
                     "pred_task", "pred_joint_at", "pred_joint_ta"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        out.reference = self.reference
        return out

    __add__ = merge

    def with_reference(self, reference):
        if reference.groups != self.groups or reference.tasks != self.tasks:
            raise DataError("reference table has different axes")
        self.reference = reference
        return self

    def group_index(self, a):
        if isinstance(a, (int, np.integer)):
            return int(a)
        return self._gi[a.value if isinstance(a, GenderLabel) else a]

    def task_index(self, t):
        if isinstance(t, (int, np.integer)):
            return int(t)
        return self._ti[t]

    def to_dict(self):
        return {"groups": list(self.groups), "tasks": list(self.tasks), "total": int(self.total),
                "data_attr": self.data_attr.tolist(), "data_task": self.data_task.tolist(),
                "data_joint": self.data_joint.tolist(),
                "pred_joint_at": self.pred_joint_at.tolist(),
                "pred_joint_ta": self.pred_joint_ta.tolist()}


def y_indicator(table, a, t):
    """1 when ``a`` and ``t`` are positively correlated in the reference data."""
    src = table.reference if table.reference is not None else table
    ai, ti = table.group_index(a), table.task_index(t)
    if src.total <= 0:
        raise DomainError("reference data is empty")
    # integer form of P(a,t) > P(a)P(t); exact ties give 0
    return int(int(src.data_joint[ai, ti]) * int(src.total)
               > int(src.data_attr[ai]) * int(src.data_task[ti]))


def delta_at(table, a, t, direction):
    """Prediction-minus-data conditional probability, or None if unmeasurable."""
    direction = _direction(direction)
    ai, ti = table.group_index(a), table.task_index(t)
    if direction is Direction.A_TO_T:
        base = int(table.data_attr[ai])
        pred = int(table.pred_joint_at[ai, ti])
    else:
        base = int(table.data_task[ti])
        pred = int(table.pred_joint_ta[ai, ti])
    if base == 0:
        return None
    return (pred - int(table.data_joint[ai, ti])) / base


@dataclass
class PairAmp:
    delta: float
    y: int
    contribution: float


@dataclass
class BiasAmpResult:
    direction: Direction
    per_pair: Dict[Tuple[str, str], PairAmp]
    per_group: Dict[str, Optional[float]]
    aggregate: float
    skipped: Dict[Tuple[str, str], str] = field(default_factory=dict)

    @property
    def n_pairs(self):
        return len(self.per_pair)

    def to_dict(self):
        return {
            "direction": self.direction.value,
            "aggregate": self.aggregate,
            "per_group": dict(self.per_group),
            "n_pairs": len(self.per_pair),
            "skipped_pairs": len(self.skipped),
            "per_pair": [
                {"group": a, "task": t, "delta": p.delta, "y": p.y, "contribution": p.contribution}
                for (a, t), p in self.per_pair.items()
            ],
            "skipped": [{"group": a, "task": t, "reason": r} for (a, t), r in self.skipped.items()],
        }


def biasamp(table, direction):
    direction = _direction(direction)
    per_pair = {}
    skipped = {}
    for a in table.groups:
        for t in table.tasks:
            d = delta_at(table, a, t, direction)
            if d is None:
                skipped[a, t] = "zero conditioning marginal"
                continue
            y = y_indicator(table, a, t)
            per_pair[a, t] = PairAmp(d, y, y * d - (1 - y) * d)
    if not per_pair:
        raise MetricError("no measurable pairs")
    per_group = {}
    for a in table.groups:
        vals = [p.contribution for (g, _), p in per_pair.items() if g == a]
        per_group[a] = math.fsum(vals) / len(vals) if vals else None
    aggregate = math.fsum(p.contribution for p in per_pair.values()) / len(per_pair)
    return BiasAmpResult(direction, per_pair, per_group, aggregate, skipped)


def bootstrap_biasamp(groups, tasks, records, direction, n_resamples=1000, seed=0, alpha=0.05,
                      reference=None):
    """Percentile bootstrap interval of the aggregate over resampled records."""
    records = list(records)
    if not records:
        raise MetricError("no records to resample")
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(n_resamples):
        idx = rng.integers(0, len(records), len(records))
        table = EventTable.from_records(groups, tasks, (records[i] for i in idx))
        if reference is not None:
            table.with_reference(reference)
        try:
            values.append(biasamp(table, direction).aggregate)
        except MetricError:
            continue
    if not values:
        raise MetricError("no resample had measurable pairs")
    lo, hi = np.quantile(values, [alpha / 2, 1 - alpha / 2])
    return float(lo), float(hi)


# --------------------------------------------------------------------------
# masked-language-model scoring

MLM_STRATEGIES = ("top1-strict", "first-lexicon-hit")


def _check_sorted(candidates):
    if not candidates:
        raise DataError("candidate list is empty")
    probs = [float(p) for _, p in candidates]
    if any(b > a for a, b in zip(probs, probs[1:])):
        raise DataError("candidates must be sorted by nonincreasing probability")


def mlm_gender_of_prediction(lexicon, candidates, strategy="top1-strict"):
    """Gender class of an MLM prediction from its ranked candidates."""
    _check_sorted(candidates)
    if strategy == "top1-strict":
        return lexicon.classify(candidates[0][0])
    if strategy == "first-lexicon-hit":
        for token, _ in candidates:
            label = lexicon.classify(token)
            if label is not GenderLabel.OTHER:
                return label
        return GenderLabel.OTHER
    raise ValueError(f"strategy must be one of {MLM_STRATEGIES}")


def gender_probability_mass(lexicon, candidates):
    """Summed candidate probability per gender class (diagnostic only)."""
    mass = {g.value: 0.0 for g in (*GROUPS, GenderLabel.OTHER)}
    for token, p in candidates:
        mass[lexicon.classify(token).value] += float(p)
    return mass


@dataclass
class Score:
    precision: float
    recall: float
    f1: float
    support: int

    def to_dict(self):
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "support": self.support}


def _f1(p, r):
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


@dataclass
class GroupScores:
    scores: Dict[str, Score]
    confusion: Dict[str, Dict[str, int]]
    credit_neutral: bool
    evaluated: int

    def to_dict(self):
        return {"credit_neutral": self.credit_neutral, "evaluated": self.evaluated,
                "scores": {g: s.to_dict() for g, s in self.scores.items()},
                "confusion": self.confusion}


def group_scores_mlm(gold, predicted, credit_neutral=True):
    """Per-group precision/recall/F1 where a Neutral prediction always counts as correct.

    ``credit_neutral=False`` gives plain exact-match scoring.  Precision of a
    group that was never predicted is 0.
    """
    gold = [parse_label(g) for g in gold]
    predicted = [parse_label(p) for p in predicted]
    if len(gold) != len(predicted):
        raise DataError(f"length mismatch: {len(gold)} gold vs {len(predicted)} predictions")
    pred_cols = (*GROUPS, GenderLabel.OTHER)
    confusion = {g.value: {p.value: 0 for p in pred_cols} for g in GROUPS}
    for g, p in zip(gold, predicted):
        if g not in GROUPS:
            raise DataError(f"gold label must be Male, Female or Neutral, got {g.value}")
        if p not in pred_cols:
            raise DataError(f"prediction must be a group or Other, got {p.value}")
        confusion[g.value][p.value] += 1

    def correct(g, p):
        return p == g or (credit_neutral and p == GenderLabel.NEUTRAL.value)

    scores = {}
    for grp in GROUP_NAMES:
        support = sum(confusion[grp].values())
        hit_recall = sum(c for p, c in confusion[grp].items() if correct(grp, p))
        predicted_as = sum(confusion[g][grp] for g in GROUP_NAMES)
        hit_precision = sum(confusion[g][grp] for g in GROUP_NAMES if correct(g, grp))
        r = hit_recall / support if support else 0.0
        p = hit_precision / predicted_as if predicted_as else 0.0
        scores[grp] = Score(p, r, _f1(p, r), support)
    return GroupScores(scores, confusion, credit_neutral, len(gold))


# --------------------------------------------------------------------------
# question answering

YES_NO = frozenset({"yes", "no"})
NUMBER_WORDS = frozenset(
    "zero one two three four five six seven eight nine ten eleven twelve thirteen "
    "fourteen fifteen sixteen seventeen eighteen nineteen twenty".split())


def normalize_answer(ans):
    return " ".join(str(ans).lower().strip().split())


def is_numeric_answer(ans):
    a = normalize_answer(ans)
    if a in NUMBER_WORDS:
        return True
    try:
        float(a.replace(",", ""))
    except ValueError:
        return False
    return True


def canonical_answer(gold):
    """A single answer string; for annotator lists, the most common answer."""
    if isinstance(gold, str):
        return normalize_answer(gold)
    counts = Counter(normalize_answer(g) for g in gold)
    if not counts:
        raise DataError("empty gold answer list")
    return min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def vqa_accuracy(predicted, gold):
    """Exact match for a single gold answer; min(#matches/3, 1) for annotator lists."""
    p = normalize_answer(predicted)
    if isinstance(gold, str):
        return float(p == normalize_answer(gold))
    matches = sum(normalize_answer(g) == p for g in gold)
    return min(matches / 3.0, 1.0)


def answer_gender_counts(training_pairs, lexicon):
    """Per answer: number of training questions that contain a lexicon term."""
    from .annotate import scan_text

    counts = Counter()
    for question, answer in training_pairs:
        if scan_text(lexicon, question).total > 0:
            counts[canonical_answer(answer)] += 1
    return counts


def filter_vqa_answers(training_pairs, lexicon, min_count=50):
    """Answer categories used for VQA bias amplification.

    Keeps answers seen with a gender term in at least ``min_count`` training
    questions, minus yes/no and numeric answers.
    """
    counts = answer_gender_counts(training_pairs, lexicon)
    return {a for a, c in counts.items()
            if c >= min_count and a not in YES_NO and not is_numeric_answer(a)}


def vqa_bias_table(labeled_questions: Mapping[str, object], gold_answers: Mapping[str, object],
                   predicted_answers: Mapping[str, str], categories, reference=None):
    """EventTable for BiasAmp A->T over gendered questions and kept categories.

    Gold answers give the data events, model answers the prediction events; a
    correct answer therefore adds the same event to both sides.
    """
    missing = sorted(q for q in gold_answers if q not in predicted_answers)
    if missing:
        raise DataError(f"missing predictions for {len(missing)} question(s): {missing[:20]}")
    tasks = tuple(sorted(categories))
    table = EventTable(GROUP_NAMES, tasks)
    kept = set(tasks)
    for qid, gold in gold_answers.items():
        label = labeled_questions.get(qid)
        if label is None:
            continue
        label = parse_label(label[0] if isinstance(label, tuple) else label)
        if label not in GROUPS:
            continue
        g = canonical_answer(gold)
        if g not in kept:
            continue
        p = normalize_answer(predicted_answers[qid])
        table.add([label.value], [g], None, [p] if p in kept else [])
    if reference is not None:
        table.with_reference(reference)
    return table


# --------------------------------------------------------------------------
# fairness


def group_disparity(per_group_scores: Mapping[str, float]):
    """Max minus min score across groups."""
    if len(per_group_scores) < 2:
        raise DomainError("group disparity needs at least two groups")
    vals = [float(v) for v in per_group_scores.values()]
    return max(vals) - min(vals)


def format_disparity(value):
    return f"{value:.1f}"


RETRIEVED_BUCKETS = ("Male", "Female", "Neutral", "Mixed", "NoPerson")


def retrieved_bucket(verdict):
    """Map a verdict of a retrieved item to a distribution bucket."""
    from .labels import DiscardReason, Verdict

    if not isinstance(verdict, Verdict):
        label = parse_label(verdict)
        return label.value if label in GROUPS else "NoPerson"
    if verdict.label in GROUPS:
        return verdict.label.value
    return "Mixed" if verdict.reason is DiscardReason.MIXED else "NoPerson"


@dataclass
class RetrievalDistribution:
    counts: Dict[str, Dict[str, int]]
    amplifying: Dict[str, int]

    def percentages(self, query_gender):
        row = self.counts[query_gender]
        n = sum(row.values())
        return {b: (100.0 * c / n if n else 0.0) for b, c in row.items()}

    def person_rate(self, query_gender):
        row = self.counts[query_gender]
        n = sum(row.values())
        return 100.0 * (n - row["NoPerson"]) / n if n else 0.0

    def to_dict(self):
        out = {}
        for q, row in self.counts.items():
            n = sum(row.values())
            out[q] = {"n": n, "counts": dict(row), "percent": self.percentages(q),
                      "person_rate": self.person_rate(q), "amplifying": self.amplifying[q],
                      "non_amplifying": n - self.amplifying[q]}
        return out


def is_amplifying(query_gender, retrieved):
    """A retrieval amplifies unless it is neutral, gender-matched or shows no person."""
    return retrieved not in ("Neutral", "NoPerson", query_gender)


def retrieval_distribution(queries: Iterable[Tuple[object, object]]):
    counts = {g: {b: 0 for b in RETRIEVED_BUCKETS} for g in GROUP_NAMES}
    amplifying = {g: 0 for g in GROUP_NAMES}
    for query_gender, retrieved in queries:
        q = parse_label(query_gender)
        if q not in GROUPS:
            raise DataError(f"query gender must be Male, Female or Neutral, got {q.value}")
        b = retrieved if retrieved in RETRIEVED_BUCKETS else retrieved_bucket(retrieved)
        counts[q.value][b] += 1
        amplifying[q.value] += is_amplifying(q.value, b)
    return RetrievalDistribution(counts, amplifying)
