import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import caption_grammar, linear_ramp_mean, oracle_hits
from vlbias.errors import DomainError
from vlbias.labels import GenderLabel
from vlbias.rewrite import (
    ScheduleConfig, Substitution, apply_substitutions, mask_text, rewrite_text, sample_stream,
    schedule_p,
)


@pytest.mark.parametrize("text,expected", [
    ("A woman walking her dog", "A person walking their dog"),
    ("A woman walking her dog.", "A person walking their dog."),
    ("He gave her a ball.", "They gave them a ball."),
    ("The bride and groom", "The newlywed and newlywed"),
    ("A man's hat", "A person's hat"),
    ("Her. Dog", "Them. Dog"),
    ("a landlord", "a landlord"),
    ("MEN at work", "SOMEONE at work"),
])
def test_rewrite_examples(lex, text, expected):
    assert rewrite_text(lex, text).rewritten == expected


def test_substitutions_reproduce_output(lex):
    r = rewrite_text(lex, "A woman walking her dog")
    assert r.substitutions == [Substitution(2, "woman", "person"), Substitution(16, "her", "their")]
    assert apply_substitutions(r.original, r.substitutions) == r.rewritten


def test_mask_examples(lex):
    p = mask_text(lex, "A woman walking her dog")
    assert p.masked == "A [MASK] walking [MASK] dog"
    assert p.gold_labels == [GenderLabel.FEMALE, GenderLabel.FEMALE]
    assert p.mask_positions == [1, 3]
    assert mask_text(lex, "The girl's kite", "<mask>").masked == "The <mask>'s kite"
    assert mask_text(lex, "A person and a cat").gold_labels == [GenderLabel.NEUTRAL]


def _fuzzed(n, seed=0):
    rng = random.Random(seed)
    return [caption_grammar(rng) for _ in range(n)]


def test_rewrite_removes_gender_and_is_idempotent(lex):
    for text in _fuzzed(10_000):
        once = rewrite_text(lex, text).rewritten
        m, f, _ = oracle_hits(once)
        assert (m, f) == (0, 0), (text, once)
        assert rewrite_text(lex, once).rewritten == once


@given(st.text(max_size=60))
@settings(max_examples=300)
def test_rewrite_property_arbitrary_text(text):
    from vlbias.lexicon import load_lexicon
    lex = load_lexicon()
    once = rewrite_text(lex, text).rewritten
    assert oracle_hits(once)[:2] == (0, 0)
    assert rewrite_text(lex, once).rewritten == once


def test_schedule_endpoints_and_monotone():
    cfg = ScheduleConfig(10_000)
    ps = [schedule_p(cfg, s) for s in range(cfg.total_steps)]
    assert ps[0] == 0.15 and ps[-1] == 1.0
    assert all(a <= b for a, b in zip(ps, ps[1:]))


@pytest.mark.parametrize("kw", [dict(p_start=-0.1), dict(p_end=1.5), dict(p_start=0.9, p_end=0.5),
                                dict(total_steps=0)])
def test_schedule_validation(kw):
    args = dict(total_steps=10)
    args.update(kw)
    with pytest.raises(DomainError):
        ScheduleConfig(**args)


def test_schedule_step_out_of_range():
    with pytest.raises(DomainError):
        schedule_p(ScheduleConfig(5), 5)


def test_sample_stream_fraction_and_determinism(lex):
    corpus = ["A woman walking her dog"] * 10_000
    cfg = ScheduleConfig(10_000, seed=0)
    runs = [[s.used_neutral for s in sample_stream(lex, corpus, cfg)] for _ in range(2)]
    assert runs[0] == runs[1]
    frac = sum(runs[0]) / len(runs[0])
    assert abs(frac - linear_ramp_mean(0.15, 1.0, 10_000)) <= 0.02


def test_sample_stream_block_size_does_not_matter(lex):
    corpus = _fuzzed(500, 3)
    cfg = ScheduleConfig(500, seed=11)
    a = list(sample_stream(lex, corpus, cfg, block=7))
    b = list(sample_stream(lex, corpus, cfg, block=4096))
    assert a == b
    assert all(s.text == rewrite_text(lex, t).rewritten for s, t in zip(a, corpus) if s.used_neutral)


def test_sample_stream_length_checks(lex):
    with pytest.raises(DomainError):
        list(sample_stream(lex, ["a man"] * 3, ScheduleConfig(5)))
    with pytest.raises(DomainError):
        list(sample_stream(lex, ["a man"] * 6, ScheduleConfig(5)))
    assert len(list(sample_stream(lex, ["a man"] * 2, ScheduleConfig(5), cycle=True))) == 5
