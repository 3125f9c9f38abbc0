"""Audit report assembly and rendering (JSON, Markdown tables, CSV plot data)."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import kernels
from .annotate import label_image, label_single_text
from .errors import DataError, UnsupportedTaskError
from .labels import GROUP_NAMES, GROUPS, GenderLabel
from .metrics import (
    RETRIEVED_BUCKETS, Direction, EventTable, biasamp, bootstrap_biasamp, canonical_answer,
    filter_vqa_answers, group_disparity, group_scores_mlm, mlm_gender_of_prediction,
    normalize_answer, retrieval_distribution, retrieved_bucket, vqa_accuracy, vqa_bias_table,
)
from .rewrite import DEFAULT_MASK, mask_text

log = logging.getLogger(__name__)

EXTRINSIC_TASKS = ("vqa", "gqa", "nlvr2", "retrieval-ir", "retrieval-tr")
RENDER_FORMATS = ("json", "markdown", "csv-plots")
RUN_FILES = {"json": "report.json", "markdown": "report.md", "csv-plots": "plots.csv"}

TASK_TITLES = {"vqa": "VQAv2-style question answering", "gqa": "GQA-style question answering",
               "nlvr2": "NLVR2-style visual reasoning",
               "retrieval-ir": "image retrieval (caption query)",
               "retrieval-tr": "text retrieval (image query)"}

VQA_NOTE = ("event table: gold answers give data events, model answers give prediction "
            "events; correct answers add the same event to both sides")


def _version():
    from . import __version__
    return __version__


def run_metadata(lexicon, seed=0, **flags):
    return {"tool_version": _version(), "lexicon_fingerprint": lexicon.fingerprint,
            "conflict_policy": lexicon.conflict_policy, "seed": seed,
            "flags": {k: v for k, v in sorted(flags.items())}}


@dataclass
class AuditReport:
    metadata: dict
    intrinsic: Optional[dict] = None
    extrinsic: dict = field(default_factory=dict)

    def to_dict(self):
        return {"metadata": self.metadata, "intrinsic": self.intrinsic,
                "extrinsic": {k: self.extrinsic[k] for k in sorted(self.extrinsic)}}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, obj):
        if not isinstance(obj, dict) or "metadata" not in obj:
            raise DataError("not an audit report (missing 'metadata')")
        return cls(obj["metadata"], obj.get("intrinsic"), dict(obj.get("extrinsic") or {}))

    @classmethod
    def load(cls, path):
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid report JSON: {exc}") from None
        return cls.from_dict(obj)

    def merge(self, other):
        """Combine sections of two runs made with the same lexicon."""
        mine = self.metadata.get("lexicon_fingerprint")
        theirs = other.metadata.get("lexicon_fingerprint")
        if mine != theirs:
            raise DataError(f"reports use different lexicons ({mine} vs {theirs})")
        if self.intrinsic is not None and other.intrinsic is not None:
            raise DataError("both reports have an intrinsic section")
        clash = sorted(set(self.extrinsic) & set(other.extrinsic))
        if clash:
            raise DataError(f"both reports have extrinsic sections for {clash}")
        meta = dict(self.metadata)
        if other.metadata != self.metadata:
            meta["merged_from"] = sorted((self.metadata, other.metadata),
                                         key=lambda m: json.dumps(m, sort_keys=True))
        return AuditReport(meta, self.intrinsic if self.intrinsic is not None else other.intrinsic,
                           {**self.extrinsic, **other.extrinsic})


# --------------------------------------------------------------------------
# intrinsic: masked-language-model probes


def _targets_in(targets, text):
    found = set()
    index = targets.index
    for m in kernels.WORD_RE.finditer(text):
        t = kernels.lookup(index, m.group().lower())
        if t is not None:
            found.add(t)
    return sorted(found)


def _sample(ids, k=5):
    return ", ".join(repr(i) for i in ids[:k]) + (" ..." if len(ids) > k else "")


def cmd_intrinsic(lexicon, targets, captions, predictions, strategy="top1-strict",
                  mask_token=DEFAULT_MASK, credit_neutral=True, reference=None,
                  bootstrap=0, seed=0):
    """Score MLM predictions on masked captions: group P/R/F1 and BiasAmp T->A.

    ``captions`` yields CaptionRecord; each caption with lexicon terms is one
    probe whose id is the caption id.  ``predictions`` yields
    MlmPredictionRecord.  ``reference`` is an optional training EventTable
    (e.g. from a co-occurrence matrix) deciding the correlation signs.
    """
    probes = {}
    n_captions = n_masks = 0
    for rec in captions:
        n_captions += 1
        probe = mask_text(lexicon, rec.text, mask_token)
        if not probe.gold_labels:
            continue
        if rec.caption_id in probes:
            raise DataError(f"duplicate probe id {rec.caption_id!r}")
        probes[rec.caption_id] = ([g.value for g in probe.gold_labels],
                                  _targets_in(targets, rec.text))
        n_masks += len(probe.gold_labels)

    gold, pred, records = [], [], []
    unknown, bad_index, seen = [], [], set()
    predicted_as = Counter({g: 0 for g in (*GROUP_NAMES, GenderLabel.OTHER.value)})
    n_pred = 0
    for p in predictions:
        n_pred += 1
        entry = probes.get(p.probe_id)
        if entry is None:
            unknown.append(p.probe_id)
            continue
        golds, tasks = entry
        if not 0 <= p.mask_index < len(golds):
            bad_index.append(f"{p.probe_id}#{p.mask_index}")
            continue
        key = (p.probe_id, p.mask_index)
        if key in seen:
            raise DataError(f"duplicate prediction for probe {p.probe_id!r} mask {p.mask_index}")
        seen.add(key)
        g = golds[p.mask_index]
        label = mlm_gender_of_prediction(lexicon, p.candidates, strategy).value
        predicted_as[label] += 1
        gold.append(g)
        pred.append(label)
        records.append(([g], tasks, [label] if label in GROUP_NAMES else []))
    if n_pred == 0:
        raise DataError("prediction file is empty")
    if unknown:
        raise DataError(f"{len(unknown)} prediction(s) reference unknown probe ids: "
                        f"{_sample(unknown)}")
    if bad_index:
        raise DataError(f"{len(bad_index)} prediction(s) have a mask index out of range: "
                        f"{_sample(bad_index)}")

    table = EventTable.from_records(GROUP_NAMES, targets.nouns, records)
    if reference is not None:
        table.with_reference(reference)
    amp = biasamp(table, Direction.T_TO_A)
    section = {
        "strategy": strategy, "credit_neutral": credit_neutral, "mask_token": mask_token,
        "y_source": "reference" if reference is not None else "evaluation",
        "counts": {"captions": n_captions, "probes": len(probes), "masks": n_masks,
                   "predictions": n_pred, "scored": len(gold),
                   "unpredicted_masks": n_masks - len(gold),
                   "predicted_as": dict(sorted(predicted_as.items()))},
        "scores": group_scores_mlm(gold, pred, credit_neutral).to_dict(),
        "scores_strict": group_scores_mlm(gold, pred, False).to_dict(),
        "biasamp": amp.to_dict(),
    }
    if bootstrap:
        lo, hi = bootstrap_biasamp(GROUP_NAMES, targets.nouns, records, Direction.T_TO_A,
                                   bootstrap, seed, reference=reference)
        section["biasamp"]["ci95"] = [lo, hi]
        section["biasamp"]["bootstrap_resamples"] = bootstrap
    return section


# --------------------------------------------------------------------------
# extrinsic: downstream tasks


def _group_block(values_by_group, scale=100.0):
    groups = {}
    for g in GROUP_NAMES:
        vals = values_by_group.get(g, [])
        groups[g] = {"score": scale * sum(vals) / len(vals) if vals else None,
                     "support": len(vals)}
    present = {g: b["score"] for g, b in groups.items() if b["support"]}
    disparity = group_disparity(present) if len(present) >= 2 else None
    return groups, disparity


def _qa_section(task, lexicon, qa, training, categories, min_count, want_biasamp,
                bootstrap, seed):
    labels, gold_answers, predicted, per_group = {}, {}, {}, {}
    label_counts = Counter()
    n = 0
    for rec in qa:
        n += 1
        if rec.question_id in gold_answers:
            raise DataError(f"duplicate question id {rec.question_id!r}")
        verdict = label_single_text(lexicon, rec.question)
        label_counts[str(verdict)] += 1
        labels[rec.question_id] = verdict.label
        gold_answers[rec.question_id] = rec.gold
        predicted[rec.question_id] = rec.predicted
        if verdict.label in GROUPS:
            per_group.setdefault(verdict.label.value, []).append(
                vqa_accuracy(rec.predicted, rec.gold))
    if n == 0:
        raise DataError(f"no {task} records")
    groups, disparity = _group_block(per_group)
    section = {"task": task, "metric": "accuracy", "groups": groups, "disparity": disparity,
               "counts": {"examples": n, "labels": dict(sorted(label_counts.items()))}}
    if task == "nlvr2":
        return section

    if want_biasamp is False:
        return section
    training = list(training) if training is not None else None
    if categories is None and training is not None:
        categories = filter_vqa_answers(training, lexicon, min_count)
        section["category_source"] = f"training pairs, min_count={min_count}"
    elif categories is not None:
        categories = {normalize_answer(c) for c in categories}
        section["category_source"] = "explicit list"
    if categories is None:
        if want_biasamp:
            raise DataError(f"BiasAmp for {task} needs answer categories: "
                            "pass training pairs or a category list")
        return section
    section["categories"] = len(categories)
    if not categories:
        raise DataError("answer-category filter kept no categories")
    reference = None
    if training is not None:
        reference = EventTable(GROUP_NAMES, tuple(sorted(categories)))
        for question, answer in training:
            v = label_single_text(lexicon, question)
            a = canonical_answer(answer)
            if v.label in GROUPS and a in categories:
                reference.add([v.label.value], [a])
    table = vqa_bias_table(labels, gold_answers, predicted, categories, reference)
    amp = biasamp(table, Direction.A_TO_T)
    section["biasamp"] = amp.to_dict()
    section["y_source"] = "reference" if reference is not None else "evaluation"
    section["notes"] = [VQA_NOTE]
    section["counts"]["biasamp_examples"] = int(table.total)
    if bootstrap:
        kept = set(table.tasks)
        records = []
        for qid, gold in gold_answers.items():
            lab = labels[qid]
            g = canonical_answer(gold)
            if lab in GROUPS and g in kept:
                p = normalize_answer(predicted[qid])
                records.append(([lab.value], [g], None, [p] if p in kept else []))
        lo, hi = bootstrap_biasamp(GROUP_NAMES, table.tasks, records, Direction.A_TO_T,
                                   bootstrap, seed, reference=reference)
        section["biasamp"]["ci95"] = [lo, hi]
        section["biasamp"]["bootstrap_resamples"] = bootstrap
    return section


def _top1(task, retrieval):
    kind = "caption" if task == "retrieval-ir" else "image"
    top1, queries = {}, set()
    for rec in retrieval:
        if rec.kind != kind:
            continue
        queries.add(rec.query_id)
        if rec.rank == 1:
            top1[rec.query_id] = rec.retrieved_id
    if not queries:
        raise DataError(f"no {kind}-query retrieval records for {task}")
    no_top1 = sorted(queries - set(top1))
    if no_top1:
        raise DataError(f"{len(no_top1)} queries have no rank-1 result: {_sample(no_top1)}")
    return top1


def cmd_extrinsic(task, lexicon, qa=None, retrieval=None, captions=None, training=None,
                  categories=None, min_count=50, biasamp=None, bootstrap=0, seed=0):
    """Per-group task scores, group disparity and (for QA) BiasAmp A->T.

    ``biasamp`` None means "when answer categories are available".
    """
    if task not in EXTRINSIC_TASKS:
        raise DataError(f"task must be one of {EXTRINSIC_TASKS}")
    if biasamp and task == "nlvr2":
        raise UnsupportedTaskError(
            "BiasAmp is not defined for nlvr2: its protocol evaluates group disparity only")
    if biasamp and task.startswith("retrieval"):
        raise UnsupportedTaskError(
            f"BiasAmp is not defined for {task}: retrieval reports recall@1 disparity "
            "and the retrieved-gender distribution")
    if task in ("vqa", "gqa", "nlvr2"):
        if qa is None:
            raise DataError(f"{task} needs a prediction file")
        return _qa_section(task, lexicon, qa, training, categories, min_count, biasamp,
                           bootstrap, seed)
    if retrieval is None or captions is None:
        raise DataError(f"{task} needs retrieval predictions and the caption file")
    return score_retrieval(task, lexicon, retrieval, captions)


def score_retrieval(task, lexicon, retrieval, captions):
    """Recall@1 per query gender plus the gender distribution of rank-1 results."""
    image_of, text_of, by_image = {}, {}, {}
    for rec in captions:
        if rec.caption_id in image_of:
            raise DataError(f"duplicate caption id {rec.caption_id!r}")
        image_of[rec.caption_id] = rec.image_id
        text_of[rec.caption_id] = rec.text
        by_image.setdefault(rec.image_id, []).append(rec.text)
    if not image_of:
        raise DataError("retrieval scoring needs the caption file of the evaluation split")
    top1 = _top1(task, retrieval)
    image_verdict = {img: label_image(lexicon, caps, img).verdict
                     for img, caps in by_image.items()}

    per_group, pairs, unknown = {}, [], []
    query_labels = Counter()
    for q in sorted(top1):
        hit = top1[q]
        if task == "retrieval-ir":
            missing = [x for x, ok in ((q, q in image_of), (hit, hit in image_verdict)) if not ok]
            if missing:
                unknown += missing
                continue
            qv, rv = label_single_text(lexicon, text_of[q]), image_verdict[hit]
            correct = hit == image_of[q]
        else:
            missing = [x for x, ok in ((q, q in image_verdict), (hit, hit in image_of)) if not ok]
            if missing:
                unknown += missing
                continue
            qv, rv = image_verdict[q], label_single_text(lexicon, text_of[hit])
            correct = image_of[hit] == q
        query_labels[str(qv)] += 1
        if qv.label not in GROUPS:
            continue
        per_group.setdefault(qv.label.value, []).append(float(correct))
        pairs.append((qv.label, retrieved_bucket(rv)))
    if unknown:
        raise DataError(f"{len(unknown)} retrieval id(s) not in the caption file: "
                        f"{_sample(unknown)}")
    groups, disparity = _group_block(per_group)
    return {"task": task, "metric": "recall@1", "groups": groups, "disparity": disparity,
            "counts": {"examples": len(top1), "labels": dict(sorted(query_labels.items()))},
            "distribution": retrieval_distribution(pairs).to_dict()}


# --------------------------------------------------------------------------
# rendering


def _f(value, spec):
    return "n/a" if value is None else format(value, spec)


def _signed(value):
    return "n/a" if value is None else format(value, "+.4f")


def _md_table(header, rows):
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return lines


def render_markdown(report):
    meta = report.metadata
    out = ["# Gender bias audit", ""]
    rows = [["tool version", str(meta.get("tool_version"))],
            ["lexicon fingerprint", str(meta.get("lexicon_fingerprint"))],
            ["conflict policy", str(meta.get("conflict_policy"))],
            ["seed", str(meta.get("seed"))]]
    rows += [[f"flag: {k}", str(v)] for k, v in (meta.get("flags") or {}).items()]
    out += _md_table(["Run", "Value"], rows) + [""]

    sec = report.intrinsic
    if sec is not None:
        c = sec["counts"]
        out += ["## Intrinsic bias: masked language modelling", "",
                f"Strategy `{sec['strategy']}`, neutral predictions credited: "
                f"{'yes' if sec['credit_neutral'] else 'no'}.  "
                f"{c['scored']} of {c['masks']} masks scored over {c['probes']} probes.", ""]
        amp = sec["biasamp"]
        rows = []
        for g in GROUP_NAMES:
            s = sec["scores"]["scores"][g]
            rows.append([g, _f(s["precision"], ".4f"), _f(s["recall"], ".4f"),
                         _f(s["f1"], ".4f"), str(s["support"]),
                         _signed(amp["per_group"].get(g))])
        rows.append(["All", "", "", "", str(sec["scores"]["evaluated"]),
                     _signed(amp["aggregate"])])
        out += _md_table(["Group", "Precision", "Recall", "F1", "Support", "BiasAmp T->A"], rows)
        out += ["", f"Pairs measured: {amp['n_pairs']}, skipped: {amp['skipped_pairs']} "
                f"(correlation signs from {sec['y_source']} counts)."]
        if "ci95" in amp:
            lo, hi = amp["ci95"]
            out += [f"Bootstrap 95% interval: [{_signed(lo)}, {_signed(hi)}] "
                    f"({amp['bootstrap_resamples']} resamples)."]
        out += [""]

    if report.extrinsic:
        out += ["## Extrinsic bias: downstream tasks", ""]
        tasks = sorted(report.extrinsic)
        header = ["Task", "Metric", *GROUP_NAMES, "Disparity"]
        rows = []
        for t in tasks:
            sec = report.extrinsic[t]
            rows.append([t, sec["metric"],
                         *(_f(sec["groups"][g]["score"], ".1f") for g in GROUP_NAMES),
                         _f(sec["disparity"], ".1f")])
        out += _md_table(header, rows) + [""]
        for t in tasks:
            sec = report.extrinsic[t]
            out += [f"### {t}: {TASK_TITLES.get(t, t)}", ""]
            support = ", ".join(f"{g} {sec['groups'][g]['support']}" for g in GROUP_NAMES)
            out += [f"Examples: {sec['counts']['examples']} (per group: {support})."]
            if "biasamp" in sec:
                amp = sec["biasamp"]
                per = ", ".join(f"{g} {_signed(amp['per_group'].get(g))}" for g in GROUP_NAMES)
                out += [f"BiasAmp A->T: {_signed(amp['aggregate'])} over "
                        f"{sec['categories']} answer categories ({per}; "
                        f"{amp['skipped_pairs']} pairs skipped)."]
                if "ci95" in amp:
                    lo, hi = amp["ci95"]
                    out += [f"Bootstrap 95% interval: [{_signed(lo)}, {_signed(hi)}]."]
            for note in sec.get("notes", []):
                out += [f"Note: {note}."]
            if "distribution" in sec:
                out += ["", "Retrieved gender (% of rank-1 results):", ""]
                rows = []
                for g in GROUP_NAMES:
                    d = sec["distribution"][g]
                    rows.append([g, str(d["n"]), *(_f(d["percent"][b], ".1f")
                                                   for b in RETRIEVED_BUCKETS),
                                 _f(d["person_rate"], ".1f"), str(d["amplifying"])])
                out += _md_table(["Query", "n", *RETRIEVED_BUCKETS, "Person rate",
                                  "Amplifying"], rows)
            out += [""]
    return "\n".join(out).rstrip("\n") + "\n"


def plot_rows(report):
    """``(section, group, metric, value)`` rows for plotting."""
    rows = []
    sec = report.intrinsic
    if sec is not None:
        for g in GROUP_NAMES:
            s = sec["scores"]["scores"][g]
            for metric in ("precision", "recall", "f1"):
                rows.append(("intrinsic", g, metric, s[metric]))
            rows.append(("intrinsic", g, "biasamp_t2a", sec["biasamp"]["per_group"].get(g)))
        rows.append(("intrinsic", "All", "biasamp_t2a", sec["biasamp"]["aggregate"]))
    for t in sorted(report.extrinsic):
        sec = report.extrinsic[t]
        name = f"extrinsic:{t}"
        for g in GROUP_NAMES:
            rows.append((name, g, sec["metric"], sec["groups"][g]["score"]))
        rows.append((name, "All", "disparity", sec["disparity"]))
        if "biasamp" in sec:
            for g in GROUP_NAMES:
                rows.append((name, g, "biasamp_a2t", sec["biasamp"]["per_group"].get(g)))
            rows.append((name, "All", "biasamp_a2t", sec["biasamp"]["aggregate"]))
        if "distribution" in sec:
            for g in GROUP_NAMES:
                d = sec["distribution"][g]
                for b in RETRIEVED_BUCKETS:
                    rows.append((name, g, f"retrieved_{b}_pct", d["percent"][b]))
                rows.append((name, g, "person_rate", d["person_rate"]))
    return rows


def render_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "group", "metric", "value"])
    for section, group, metric, value in plot_rows(report):
        w.writerow([section, group, metric, "" if value is None else repr(float(value))])
    return buf.getvalue()


def render(report, format="json"):
    if format == "json":
        return report.to_json()
    if format == "markdown":
        return render_markdown(report)
    if format == "csv-plots":
        return render_csv(report)
    raise ValueError(f"format must be one of {RENDER_FORMATS}")


def write_run(report, out_dir, formats=RENDER_FORMATS):
    """Write the rendered report into ``out_dir`` plus a sha256 manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for fmt in formats:
        data = render(report, fmt).encode("utf-8")
        (out / RUN_FILES[fmt]).write_bytes(data)
        files[RUN_FILES[fmt]] = hashlib.sha256(data).hexdigest()
    manifest = {"tool_version": report.metadata.get("tool_version"), "files": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    return out / "manifest.json"
