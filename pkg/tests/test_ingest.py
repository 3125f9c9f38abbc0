import json

import pytest
from hypothesis import given, strategies as st

from vlbias.errors import ParseError, SchemaError
from vlbias.ingest import (
    CaptionRecord, MlmPredictionRecord, ParseStats, QaRecord, RetrievalRecord,
    detect_caption_format, parse_captions, parse_predictions, parse_qa_training, write_jsonl,
)


def write(tmp_path, name, text):
    p = tmp_path / name
    if isinstance(text, bytes):
        p.write_bytes(text)
    else:
        p.write_text(text, encoding="utf-8")
    return p


def test_coco_json(tmp_path):
    doc = {"images": [{"id": 7}], "annotations": [
        {"id": 2, "image_id": 7, "caption": "A man on a bike."},
        {"id": 1, "image_id": 3, "caption": "A cat."},
        {"id": 3, "image_id": 7, "caption": "A person cycling."}]}
    p = write(tmp_path, "caps.json", json.dumps(doc))
    recs = list(parse_captions(p))
    assert [r.image_id for r in recs] == ["3", "7", "7"]
    assert recs[1] == CaptionRecord("7", "2", "A man on a bike.")


def test_tsv_synthetic_ids(tmp_path):
    p = write(tmp_path, "cc.tsv", "a cat sits\thttp://x/1.jpg\na man runs\thttp://x/2.jpg\n")
    recs = list(parse_captions(p))
    assert recs == [CaptionRecord("0", "0", "a cat sits"), CaptionRecord("1", "1", "a man runs")]


def test_truncated_json_names_offset(tmp_path):
    p = write(tmp_path, "bad.json", '{"annotations": [{"id": 1, "image_id": 2, "caption": "a m')
    with pytest.raises(ParseError) as exc:
        list(parse_captions(p, "coco-json"))
    assert exc.value.offset is not None and "offset" in str(exc.value)
    assert str(p) in str(exc.value)


def test_lxmert_list(tmp_path):
    doc = [{"img_id": "COCO_1", "sentf": {"mscoco": ["A man.", "A dog."], "vg": ["Red car."]}}]
    p = write(tmp_path, "lx.json", json.dumps(doc))
    recs = list(parse_captions(p))
    assert [r.text for r in recs] == ["A man.", "A dog.", "Red car."]
    assert {r.image_id for r in recs} == {"COCO_1"}


def test_detect_format(tmp_path):
    assert detect_caption_format(write(tmp_path, "a.jsonl", '{"text": "x"}\n')) == "jsonl"
    assert detect_caption_format(write(tmp_path, "a.json", '{\n "annotations": []}')) == "coco-json"
    assert detect_caption_format(write(tmp_path, "a.txt", "a cat\turl\n")) == "tsv"
    assert detect_caption_format(write(tmp_path, "b.txt", '{"text": "x"}\n')) == "jsonl"
    assert detect_caption_format(write(tmp_path, "c.txt", json.dumps({"annotations": []}))) == "coco-json"


def test_bad_line_reports_location(tmp_path):
    p = write(tmp_path, "c.jsonl", '{"image_id": 1, "caption_id": 1, "text": "ok"}\n{oops\n')
    with pytest.raises(ParseError) as exc:
        list(parse_captions(p))
    assert exc.value.line == 2 and exc.value.index == 1


def test_skip_bad_counts(tmp_path):
    lines = ['{"image_id": 1, "caption_id": 1, "text": "a"}', "{oops",
             '{"image_id": 1, "caption_id": 2}', '{"image_id": 2, "caption_id": 3, "text": "b"}']
    p = write(tmp_path, "c.jsonl", "\n".join(lines) + "\n")
    stats = ParseStats()
    recs = list(parse_captions(p, skip_bad=True, stats=stats))
    assert len(recs) == 2
    assert (stats.consumed, stats.skipped, stats.yielded) == (4, 2, 2)
    assert stats.yielded == stats.consumed - stats.skipped


def test_invalid_utf8(tmp_path):
    p = write(tmp_path, "c.tsv", b"a man\turl\n\xff\xfe caf\xe9\turl\n")
    with pytest.raises(ParseError, match="UTF-8"):
        list(parse_captions(p))
    recs = list(parse_captions(p, lossy_utf8=True))
    assert "�" in recs[1].text


def test_mlm_valid(tmp_path):
    p = write(tmp_path, "m.jsonl", '{"probe_id": "p1", "mask_index": 0, "candidates": [["person", 0.9]]}\n')
    assert list(parse_predictions(p, "mlm")) == [MlmPredictionRecord("p1", 0, (("person", 0.9),))]


@pytest.mark.parametrize("line,field", [
    ('{"probe_id": "p", "mask_index": 0, "candidates": [["a", 0.1], ["b", 0.5]]}', "candidates"),
    ('{"probe_id": "p", "mask_index": 0, "candidates": []}', "candidates"),
    ('{"probe_id": "p", "mask_index": 0, "candidates": [["a", 1.5]]}', "candidates"),
    ('{"probe_id": "p", "mask_index": -1, "candidates": [["a", 0.5]]}', "mask_index"),
    ('{"probe_id": "p", "mask_index": true, "candidates": [["a", 0.5]]}', "mask_index"),
])
def test_mlm_schema_errors(tmp_path, line, field):
    p = write(tmp_path, "m.jsonl", line + "\n")
    with pytest.raises(SchemaError) as exc:
        list(parse_predictions(p, "mlm"))
    assert exc.value.field == field and exc.value.record_id == "p"


def test_vqa_missing_predicted(tmp_path):
    p = write(tmp_path, "q.jsonl", '{"question_id": 5, "question": "what?", "gold": "red"}\n')
    with pytest.raises(SchemaError) as exc:
        list(parse_predictions(p, "vqa"))
    assert exc.value.field == "predicted" and "predicted" in str(exc.value)
    assert exc.value.record_id == 5


def test_qa_training_allows_missing_prediction(tmp_path):
    p = write(tmp_path, "t.jsonl", '{"question": "what is the man holding?", "gold": ["kite", "kite"]}\n')
    assert list(parse_qa_training(p)) == [("what is the man holding?", ["kite", "kite"])]


def test_retrieval_duplicate_rank(tmp_path):
    lines = ['{"query_id": "q", "kind": "caption", "retrieved_id": "a", "rank": 1}',
             '{"query_id": "q", "kind": "caption", "retrieved_id": "b", "rank": 1}']
    p = write(tmp_path, "r.jsonl", "\n".join(lines) + "\n")
    with pytest.raises(SchemaError) as exc:
        list(parse_predictions(p, "retrieval"))
    assert exc.value.field == "rank"


def test_retrieval_rank_positive(tmp_path):
    p = write(tmp_path, "r.jsonl", '{"query_id": "q", "kind": "image", "retrieved_id": "a", "rank": 0}\n')
    with pytest.raises(SchemaError):
        list(parse_predictions(p, "retrieval"))


ids = st.text(alphabet=st.characters(codec="utf-8", exclude_categories=("Cs", "Cc")), min_size=1,
              max_size=8)
texts = st.text(alphabet=st.characters(codec="utf-8", exclude_categories=("Cs",)), max_size=30)
probs = st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=5).map(
    lambda ps: sorted(ps, reverse=True))

records = st.one_of(
    st.builds(CaptionRecord, ids, ids, texts),
    st.builds(lambda pid, mi, toks, ps: MlmPredictionRecord(pid, mi, tuple(zip(toks, ps))),
              ids, st.integers(0, 9), st.lists(ids, min_size=5, max_size=5), probs),
    st.builds(QaRecord, ids, texts, st.one_of(texts, st.lists(texts, min_size=1, max_size=3).map(tuple)),
              texts),
    st.builds(RetrievalRecord, ids, st.sampled_from(["caption", "image"]), ids, st.integers(1, 50)),
)


@given(records)
def test_round_trip(tmp_path_factory, rec):
    path = tmp_path_factory.mktemp("rt") / "r.jsonl"
    write_jsonl([rec], path)
    if isinstance(rec, CaptionRecord):
        back = list(parse_captions(path, "jsonl"))
    else:
        kind = {MlmPredictionRecord: "mlm", QaRecord: "vqa", RetrievalRecord: "retrieval"}[type(rec)]
        back = list(parse_predictions(path, kind))
    assert back == [rec]
