import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import oracle_hits, simple_tokens
from vlbias import _pure, kernels
from vlbias.cooccur import _target_ids
from vlbias.lexicon import load_lexicon, load_targets

speedups = pytest.importorskip("vlbias._speedups")

LEX = load_lexicon()
TABLE, GROUP_OF = LEX.scan_table
TARGETS = load_targets("coco", LEX)
CTABLE, CGROUP, CTARGET = _target_ids(LEX, TARGETS)

words = st.sampled_from(sorted(LEX.gendered_terms | LEX.neutral_terms)
                        + list(TARGETS.nouns[:20]) + ["pizza", "the", "a"])
glue = st.sampled_from([" ", "  ", ", ", ". ", "'s ", "’s ", "'", "_", "-", "\t", "é", "́",
                        "1", "!", "\n", "''"])
texts = st.one_of(
    st.lists(st.tuples(words, glue), max_size=15).map(lambda ps: "".join(w + g for w, g in ps)),
    st.text(max_size=40),
)


def test_backend_is_compiled():
    assert kernels.BACKEND == "cython"


@given(texts)
@settings(max_examples=400)
def test_token_spans_match(text):
    spans = speedups.token_spans(text)
    assert spans == _pure.token_spans(text)
    assert [text[a:b].lower() for a, b in spans] == simple_tokens(text)


@given(texts)
@settings(max_examples=400)
def test_scan_hits_match_oracle(text):
    got = speedups.scan_hits(text, TABLE, GROUP_OF)
    assert list(got) == list(_pure.scan_hits(text, TABLE, GROUP_OF))
    assert tuple(got) == oracle_hits(text)


@given(st.lists(texts, max_size=20), st.booleans())
@settings(max_examples=200)
def test_count_batch_match(batch, multiplicity):
    out = []
    for impl in (speedups, _pure):
        counts = np.zeros((3, len(TARGETS)), dtype=np.int64)
        hits = np.zeros((len(batch), 3), dtype=np.int64)
        gctx = np.zeros(3, dtype=np.int64)
        tctx = np.zeros(len(TARGETS), dtype=np.int64)
        n = impl.count_batch(batch, CTABLE, CGROUP, CTARGET, counts, hits, multiplicity,
                             gctx, tctx)
        out.append((n, counts, hits, gctx, tctx))
    (n1, *a1), (n2, *a2) = out
    assert n1 == n2 == len(batch)
    for x, y in zip(a1, a2):
        np.testing.assert_array_equal(x, y)


def test_hits_array_too_small_is_rejected():
    with pytest.raises(ValueError):
        speedups.count_batch(["a man", "a woman"], CTABLE, CGROUP, CTARGET, None,
                             np.zeros((1, 3), dtype=np.int64))
