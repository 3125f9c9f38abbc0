"""Readers for caption corpora and model prediction files.

Line-delimited JSON schemas (one object per line, UTF-8):

captions  ``{"image_id": str, "caption_id": str, "text": str}``
mlm       ``{"probe_id": str, "mask_index": int, "candidates": [[token, prob], ...]}``
vqa       ``{"question_id": str, "question": str, "gold": str | [str], "predicted": str}``
retrieval ``{"query_id": str, "kind": "caption" | "image", "retrieved_id": str, "rank": int}``

Caption files may also be COCO annotation JSON (or VQA question JSON) and
CC3M-style TSV (``caption<TAB>url``).
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

from .errors import ParseError, SchemaError

log = logging.getLogger(__name__)

CAPTION_FORMATS = ("coco-json", "tsv", "jsonl")
PREDICTION_KINDS = ("mlm", "vqa", "retrieval")
MAX_KEPT_ERRORS = 100


@dataclass
class ParseStats:
    consumed: int = 0
    yielded: int = 0
    skipped: int = 0
    errors: List[str] = field(default_factory=list)

    def to_dict(self):
        return {"consumed": self.consumed, "yielded": self.yielded, "skipped": self.skipped}


@dataclass(frozen=True)
class CaptionRecord:
    image_id: str
    caption_id: str
    text: str

    def to_json(self):
        return json.dumps(asdict(self), ensure_ascii=False)


@dataclass(frozen=True)
class MlmPredictionRecord:
    probe_id: str
    mask_index: int
    candidates: Tuple[Tuple[str, float], ...]

    def to_json(self):
        return json.dumps({"probe_id": self.probe_id, "mask_index": self.mask_index,
                           "candidates": [[t, p] for t, p in self.candidates]},
                          ensure_ascii=False)


@dataclass(frozen=True)
class QaRecord:
    question_id: str
    question: str
    gold: Union[str, Tuple[str, ...]]
    predicted: Optional[str] = None

    def to_json(self):
        gold = self.gold if isinstance(self.gold, str) else list(self.gold)
        d = {"question_id": self.question_id, "question": self.question, "gold": gold}
        if self.predicted is not None:
            d["predicted"] = self.predicted
        return json.dumps(d, ensure_ascii=False)


@dataclass(frozen=True)
class RetrievalRecord:
    query_id: str
    kind: str
    retrieved_id: str
    rank: int

    def to_json(self):
        return json.dumps(asdict(self), ensure_ascii=False)


# --------------------------------------------------------------------------
# low-level line reading


def _decode(raw, path, lineno, lossy):
    try:
        return raw.decode("utf-8", errors="replace" if lossy else "strict")
    except UnicodeDecodeError as exc:
        raise ParseError(f"invalid UTF-8 ({exc.reason})", path=path, line=lineno) from None


def _lines(path, lossy):
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, 1):
            text = _decode(raw, path, lineno, lossy).rstrip("\r\n")
            if text.strip():
                yield lineno, text


def _guarded(records, stats, skip_bad):
    """Apply ``--skip-bad`` semantics to a stream of (lineno, thunk) items."""
    for lineno, build in records:
        stats.consumed += 1
        try:
            rec = build()
        except ParseError as exc:
            if not skip_bad:
                raise
            stats.skipped += 1
            if len(stats.errors) < MAX_KEPT_ERRORS:
                stats.errors.append(str(exc))
            log.warning("skipping bad record: %s", exc)
            continue
        stats.yielded += 1
        yield rec


def _json_line(text, path, lineno, index):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=lineno, offset=exc.pos, index=index) from None
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", path=path, line=lineno, index=index)
    return obj


def _field(obj, name, kinds, path, lineno, index, record_id=None, required=True):
    if name not in obj:
        if required:
            raise SchemaError("missing", field=name, record_id=record_id, path=path,
                              line=lineno, index=index)
        return None
    value = obj[name]
    kinds = kinds if isinstance(kinds, tuple) else (kinds,)
    if (isinstance(value, bool) and bool not in kinds) or not isinstance(value, kinds):
        raise SchemaError(f"wrong type {type(value).__name__}", field=name,
                          record_id=record_id, path=path, line=lineno, index=index)
    return value


def _id(value):
    return str(value)


# --------------------------------------------------------------------------
# captions


def detect_caption_format(path):
    name = str(path).lower()
    if name.endswith((".tsv", ".tsv.txt")):
        return "tsv"
    if name.endswith((".jsonl", ".ndjson")):
        return "jsonl"
    with open(path, "rb") as fh:
        head = fh.read(4096).lstrip()
    if head.startswith(b"{"):
        # one object per line vs. a single document
        first = head.split(b"\n", 1)[0]
        try:
            obj = json.loads(first)
        except json.JSONDecodeError:
            return "coco-json"
        # a whole document written on one line
        if isinstance(obj, dict) and ("annotations" in obj or "questions" in obj):
            return "coco-json"
        return "jsonl"
    if head.startswith(b"["):
        return "coco-json"
    return "tsv"


def parse_captions(path, format=None, skip_bad=False, lossy_utf8=False, stats=None):
    """Stream :class:`CaptionRecord` from a caption file."""
    path = Path(path)
    fmt = format or detect_caption_format(path)
    if fmt not in CAPTION_FORMATS:
        raise ValueError(f"caption format must be one of {CAPTION_FORMATS}")
    stats = ParseStats() if stats is None else stats
    if fmt == "coco-json":
        return _guarded(_coco_items(path, lossy_utf8), stats, skip_bad)
    if fmt == "tsv":
        return _guarded(_tsv_items(path, lossy_utf8), stats, skip_bad)
    return _guarded(_jsonl_caption_items(path, lossy_utf8), stats, skip_bad)


def _tsv_items(path, lossy):
    for index, (lineno, text) in enumerate(_lines(path, lossy)):
        caption = text.split("\t", 1)[0]

        def build(caption=caption, index=index):
            return CaptionRecord(str(index), str(index), caption)
        if not caption.strip():
            log.warning("%s:%d: empty caption", path, lineno)
        yield lineno, build


def _jsonl_caption_items(path, lossy):
    for index, (lineno, text) in enumerate(_lines(path, lossy)):
        def build(text=text, lineno=lineno, index=index):
            obj = _json_line(text, path, lineno, index)
            rid = obj.get("caption_id", obj.get("id"))
            caption = _field(obj, "text", str, path, lineno, index, rid, required=False)
            if caption is None:
                caption = _field(obj, "caption", str, path, lineno, index, rid)
            image = obj.get("image_id", rid if rid is not None else index)
            return CaptionRecord(_id(image), _id(rid if rid is not None else index), caption)
        yield lineno, build


def _coco_items(path, lossy):
    raw = path.read_bytes()
    text = _decode(raw, path, None, lossy)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise ParseError(exc.msg, path=path, line=exc.lineno, offset=offset) from None
    if isinstance(doc, dict) and "annotations" in doc:
        anns = doc["annotations"]
        order = sorted(range(len(anns)), key=lambda i: (str(anns[i].get("image_id")), i)
                       if isinstance(anns[i], dict) else ("", i))
        for index in order:
            ann = anns[index]

            def build(ann=ann, index=index):
                if not isinstance(ann, dict):
                    raise ParseError("annotation is not an object", path=path, index=index)
                rid = ann.get("id", index)
                cap = _field(ann, "caption", str, path, None, index, rid)
                if "image_id" not in ann:
                    raise SchemaError("missing", field="image_id", record_id=rid, path=path,
                                      index=index)
                return CaptionRecord(_id(ann["image_id"]), _id(rid), cap)
            yield None, build
    elif isinstance(doc, dict) and "questions" in doc:
        for index, q in enumerate(doc["questions"]):
            def build(q=q, index=index):
                if not isinstance(q, dict):
                    raise ParseError("question is not an object", path=path, index=index)
                rid = q.get("question_id", index)
                text = _field(q, "question", str, path, None, index, rid)
                return CaptionRecord(_id(q.get("image_id", rid)), _id(rid), text)
            yield None, build
    elif isinstance(doc, list):
        # LXMERT-style entries: {"img_id": ..., "sentf": {"mscoco": [...]}}
        for index, item in enumerate(doc):
            if not isinstance(item, dict) or "img_id" not in item:
                def bad(index=index):
                    raise SchemaError("missing", field="img_id", path=path, index=index)
                yield None, bad
                continue
            sents = [s for src in sorted(item.get("sentf", {})) for s in item["sentf"][src]]
            for k, sent in enumerate(sents):
                rec = CaptionRecord(_id(item["img_id"]), f"{item['img_id']}#{k}", str(sent))
                yield None, (lambda rec=rec: rec)
    else:
        raise ParseError("unrecognized JSON caption document", path=path)


# --------------------------------------------------------------------------
# predictions


def parse_predictions(path, kind, skip_bad=False, lossy_utf8=False, stats=None):
    """Stream validated prediction records of ``kind`` from a JSONL file."""
    if kind not in PREDICTION_KINDS:
        raise ValueError(f"kind must be one of {PREDICTION_KINDS}")
    path = Path(path)
    stats = ParseStats() if stats is None else stats
    builder = {"mlm": _mlm_record, "vqa": _qa_record, "retrieval": _retrieval_record}[kind]
    seen_ranks = set()

    def items():
        for index, (lineno, text) in enumerate(_lines(path, lossy_utf8)):
            def build(text=text, lineno=lineno, index=index):
                obj = _json_line(text, path, lineno, index)
                rec = builder(obj, path, lineno, index)
                if kind == "retrieval":
                    key = (rec.kind, rec.query_id, rec.rank)
                    if key in seen_ranks:
                        raise SchemaError(f"duplicate rank {rec.rank}", field="rank",
                                          record_id=rec.query_id, path=path, line=lineno,
                                          index=index)
                    seen_ranks.add(key)
                return rec
            yield lineno, build

    return _guarded(items(), stats, skip_bad)


def _mlm_record(obj, path, lineno, index):
    pid = _field(obj, "probe_id", (str, int), path, lineno, index)
    mi = _field(obj, "mask_index", int, path, lineno, index, pid)
    cands = _field(obj, "candidates", list, path, lineno, index, pid)
    if not cands:
        raise SchemaError("empty", field="candidates", record_id=pid, path=path, line=lineno,
                          index=index)
    out = []
    for c in cands:
        if isinstance(c, dict):
            tok, p = c.get("token"), c.get("prob", c.get("probability"))
        elif isinstance(c, (list, tuple)) and len(c) == 2:
            tok, p = c
        else:
            tok, p = None, None
        if not isinstance(tok, str) or isinstance(p, bool) or not isinstance(p, (int, float)):
            raise SchemaError("entries must be [token, probability]", field="candidates",
                              record_id=pid, path=path, line=lineno, index=index)
        if not 0.0 <= p <= 1.0:
            raise SchemaError(f"probability {p} outside [0, 1]", field="candidates",
                              record_id=pid, path=path, line=lineno, index=index)
        out.append((tok, float(p)))
    if any(b[1] > a[1] for a, b in zip(out, out[1:])):
        raise SchemaError("not sorted by nonincreasing probability", field="candidates",
                          record_id=pid, path=path, line=lineno, index=index)
    if mi < 0:
        raise SchemaError("must be >= 0", field="mask_index", record_id=pid, path=path,
                          line=lineno, index=index)
    return MlmPredictionRecord(_id(pid), mi, tuple(out))


def _qa_record(obj, path, lineno, index):
    qid = _field(obj, "question_id", (str, int), path, lineno, index)
    question = _field(obj, "question", str, path, lineno, index, qid)
    gold = _field(obj, "gold", (str, list, bool), path, lineno, index, qid)
    pred = _field(obj, "predicted", (str, bool), path, lineno, index, qid)
    if isinstance(gold, list):
        if not gold or not all(isinstance(g, str) for g in gold):
            raise SchemaError("must be a string or a nonempty list of strings", field="gold",
                              record_id=qid, path=path, line=lineno, index=index)
        gold = tuple(gold)
    elif isinstance(gold, bool):
        gold = str(gold).lower()
    if isinstance(pred, bool):
        pred = str(pred).lower()
    return QaRecord(_id(qid), question, gold, pred)


def _retrieval_record(obj, path, lineno, index):
    qid = _field(obj, "query_id", (str, int), path, lineno, index)
    kind = _field(obj, "kind", str, path, lineno, index, qid)
    if kind not in ("caption", "image"):
        raise SchemaError("must be 'caption' or 'image'", field="kind", record_id=qid,
                          path=path, line=lineno, index=index)
    rid = _field(obj, "retrieved_id", (str, int), path, lineno, index, qid)
    rank = _field(obj, "rank", int, path, lineno, index, qid)
    if rank < 1:
        raise SchemaError("must be >= 1", field="rank", record_id=qid, path=path, line=lineno,
                          index=index)
    return RetrievalRecord(_id(qid), kind, _id(rid), rank)


def parse_qa_training(path, skip_bad=False, lossy_utf8=False):
    """(question, gold) pairs from a QA JSONL file; ``predicted`` is optional here."""
    path = Path(path)
    stats = ParseStats()

    def items():
        for index, (lineno, text) in enumerate(_lines(path, lossy_utf8)):
            def build(text=text, lineno=lineno, index=index):
                obj = _json_line(text, path, lineno, index)
                qid = obj.get("question_id", index)
                q = _field(obj, "question", str, path, lineno, index, qid)
                g = _field(obj, "gold", (str, list), path, lineno, index, qid)
                return q, g
            yield lineno, build

    return _guarded(items(), stats, skip_bad)


def write_jsonl(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        n = 0
        for r in records:
            fh.write(r.to_json() if hasattr(r, "to_json") else json.dumps(r, ensure_ascii=False))
            fh.write("\n")
            n += 1
    return n
