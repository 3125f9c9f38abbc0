"""Gender term sets, neutral mappings and target-noun lists.

The lexicon file is a small sectioned text format (see
``data/appendix_a.lex`` for the shipped default)::

    [female]
    aunt, bride, ...
    [male]
    ...
    [neutral]
    ...
    [mappings]
    boy | girl | child          # male | female | neutral
    [ambiguous]
    her: them | their           # object form | possessive form

A :class:`GenderLexicon` is immutable once loaded.
"""
from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Optional

import numpy as np

from .errors import DomainError, LexiconError
from .kernels import WORD_RE, lookup
from .labels import GROUP_INDEX, GenderLabel

log = logging.getLogger(__name__)

LEXICON_ENV = "VLBIAS_LEXICON"
SECTIONS = ("male", "female", "neutral", "mappings", "ambiguous")
CONFLICT_POLICIES = ("neutral", "gendered")
SENTENCE_PUNCT = frozenset(".,;:!?")


def _data_path(name):
    return resources.files("vlbias") / "data" / name


def _read_word_file(name):
    words = []
    for line in _data_path(name).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0]
        words.extend(line.split())
    return frozenset(words)


def default_function_words():
    return _read_word_file("function_words.txt")


def default_stopwords():
    return _read_word_file("stopwords.txt")


def normalize_token(token):
    """Lowercase and strip surrounding punctuation (no stemming)."""
    m = WORD_RE.search(token)
    return m.group().lower() if m else ""


@dataclass(frozen=True)
class GenderLexicon:
    male_terms: frozenset
    female_terms: frozenset
    neutral_terms: frozenset
    neutral_map: Mapping[str, str]
    possessive_map: Mapping[str, str] = field(default_factory=dict)
    rows: tuple = ()
    conflicts: tuple = ()
    conflict_policy: str = "neutral"
    function_words: frozenset = field(default_factory=frozenset)
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.conflict_policy not in CONFLICT_POLICIES:
            raise ValueError(f"conflict_policy must be one of {CONFLICT_POLICIES}")
        object.__setattr__(self, "neutral_map", MappingProxyType(dict(self.neutral_map)))
        object.__setattr__(self, "possessive_map", MappingProxyType(dict(self.possessive_map)))

    def __reduce__(self):
        # mapping proxies do not pickle; rebuild from plain dicts
        return (self.__class__, (
            self.male_terms, self.female_terms, self.neutral_terms,
            dict(self.neutral_map), dict(self.possessive_map), self.rows,
            self.conflicts, self.conflict_policy, self.function_words, self.source))

    @property
    def possessive_ambiguous(self):
        return frozenset(self.possessive_map)

    @property
    def gendered_terms(self):
        return self.male_terms | self.female_terms

    @cached_property
    def _classes(self):
        classes = {}
        for t in self.neutral_terms:
            classes[t] = GenderLabel.NEUTRAL
        for t in self.male_terms:
            if t not in self.neutral_terms or self.conflict_policy == "gendered":
                classes[t] = GenderLabel.MALE
        for t in self.female_terms:
            if t not in self.neutral_terms or self.conflict_policy == "gendered":
                classes[t] = GenderLabel.FEMALE
        return classes

    @cached_property
    def scan_table(self):
        """``(table, group_of)`` for the kernels: token -> id, id -> group index."""
        terms = sorted(self._classes)
        table = {t: i for i, t in enumerate(terms)}
        group_of = np.array([GROUP_INDEX[self._classes[t]] for t in terms], dtype=np.int8)
        return table, group_of

    def classify(self, token):
        """Gender class of a single token; ``Other`` when not a lexicon term."""
        label = lookup(self._classes, normalize_token(token))
        return GenderLabel.OTHER if label is None else label

    def is_gendered(self, token):
        return self.classify(token) in (GenderLabel.MALE, GenderLabel.FEMALE)

    def base_form(self, token):
        """Lexicon key matched by ``token`` (possessive 's stripped if needed)."""
        key = normalize_token(token)
        if key in self._classes:
            return key
        if key.endswith(("'s", "’s")) and key[:-2] in self._classes:
            return key[:-2]
        return None

    def neutral_target(self, token, next_token=None):
        """Neutral replacement for a gendered token, keeping its capitalization.

        Tokens listed as ambiguous (``her``) take their possessive form when a
        following word exists that is neither punctuation nor a function word.
        """
        raw = token.strip()
        key = normalize_token(raw)
        suffix = ""
        if key not in self.neutral_map and key.endswith(("'s", "’s")):
            suffix = raw[-2:]
            key = key[:-2]
        if key not in self.neutral_map:
            raise DomainError(f"{token!r} is not a gendered lexicon term")
        if key in self.possessive_map and _reads_possessive(next_token, self.function_words):
            out = self.possessive_map[key]
        else:
            out = self.neutral_map[key]
        return _match_case(raw[: len(raw) - len(suffix)], out) + suffix

    @cached_property
    def fingerprint(self):
        return hashlib.sha256(dump_lexicon(self).encode("utf-8")).hexdigest()[:16]


def _reads_possessive(next_token, function_words):
    if next_token is None:
        return False
    nxt = next_token.strip()
    if not nxt or not any(ch.isalnum() for ch in nxt):
        return False
    return normalize_token(nxt) not in function_words


def _match_case(source, target):
    letters = [c for c in source if c.isalpha()]
    if len(letters) > 1 and all(c.isupper() for c in letters):
        return target.upper()
    if letters and source[:1].isupper():
        return target[:1].upper() + target[1:]
    return target


def classify_token(lexicon, token):
    if not token:
        raise DomainError("token must be nonempty")
    return lexicon.classify(token)


def neutral_target(lexicon, token, next_token=None):
    return lexicon.neutral_target(token, next_token)


# --------------------------------------------------------------------------
# file format


def parse_lexicon(text, source=None, conflict_policy="neutral", function_words=None):
    """Parse lexicon text; raises :class:`LexiconError` with a line number."""
    sets = {"male": [], "female": [], "neutral": []}
    seen_sections = set()
    rows = []
    ambiguous = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise LexiconError(f"unterminated section header {line!r}", lineno, source)
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise LexiconError(f"unknown section [{section}]", lineno, source)
            if section in seen_sections:
                raise LexiconError(f"duplicate section [{section}]", lineno, source)
            seen_sections.add(section)
            continue
        if section is None:
            raise LexiconError("content before the first section header", lineno, source)
        if section in sets:
            for term in line.split(","):
                term = term.strip()
                if not term:
                    continue
                _check_term(term, lineno, source)
                sets[section].append((term, lineno))
        elif section == "mappings":
            cols = [c.strip() for c in line.split("|")]
            if len(cols) != 3 or not all(cols):
                raise LexiconError("mapping rows need 'male | female | neutral'", lineno, source)
            for c in cols:
                _check_term(c, lineno, source)
            rows.append((tuple(cols), lineno))
        else:
            key, sep, rest = line.partition(":")
            forms = [f.strip() for f in rest.split("|")]
            if not sep or len(forms) != 2 or not all(forms):
                raise LexiconError("ambiguous rows need 'token: object | possessive'", lineno, source)
            for t in (key.strip(), *forms):
                _check_term(t, lineno, source)
            ambiguous[key.strip()] = (tuple(forms), lineno)

    missing = {"male", "female", "neutral"} - seen_sections
    if missing:
        raise LexiconError(f"missing section(s): {', '.join(sorted(missing))}", None, source)

    male = frozenset(t for t, _ in sets["male"])
    female = frozenset(t for t, _ in sets["female"])
    neutral = frozenset(t for t, _ in sets["neutral"])
    both = male & female
    if both:
        line = min(ln for t, ln in sets["female"] if t in both)
        raise LexiconError(f"terms in both male and female sets: {sorted(both)}", line, source)

    neutral_map = {}
    mapped_from = {}
    for (m, f, n), lineno in rows:
        if m not in male:
            raise LexiconError(f"mapping key {m!r} is not a male term", lineno, source)
        if f not in female:
            raise LexiconError(f"mapping key {f!r} is not a female term", lineno, source)
        if n not in neutral:
            raise LexiconError(f"mapping target {n!r} is not a neutral term", lineno, source)
        for key in (m, f):
            mapped_from.setdefault(key, set()).add(n)
            neutral_map.setdefault(key, n)

    possessive_map = {}
    for key, ((obj, poss), lineno) in ambiguous.items():
        if key not in male | female:
            raise LexiconError(f"ambiguous token {key!r} is not gendered", lineno, source)
        targets = mapped_from.get(key, set())
        if not targets or not targets <= {obj, poss}:
            raise LexiconError(
                f"ambiguous forms {obj!r}/{poss!r} do not match the mappings {sorted(targets)}",
                lineno, source)
        if obj not in neutral or poss not in neutral:
            raise LexiconError("ambiguous forms must be neutral terms", lineno, source)
        neutral_map[key] = obj
        possessive_map[key] = poss
    for key, targets in mapped_from.items():
        if len(targets) > 1 and key not in possessive_map:
            line = next(ln for (r, ln) in rows if key in r[:2])
            raise LexiconError(
                f"{key!r} maps to several neutral terms {sorted(targets)}; "
                "declare it under [ambiguous]", line, source)

    unmapped = sorted((male | female) - set(neutral_map))
    if unmapped:
        raise LexiconError(f"gendered terms without a neutral mapping: {unmapped}", None, source)

    conflicts = tuple(sorted((male | female) & neutral))
    if conflicts:
        log.info("lexicon conflicts (gendered and neutral): %s", ", ".join(conflicts))
    return GenderLexicon(
        male_terms=male,
        female_terms=female,
        neutral_terms=neutral,
        neutral_map=neutral_map,
        possessive_map=possessive_map,
        rows=tuple(r for r, _ in rows),
        conflicts=conflicts,
        conflict_policy=conflict_policy,
        function_words=default_function_words() if function_words is None else frozenset(function_words),
        source=source,
    )


def _check_term(term, lineno, source):
    if term != term.lower() or any(ch.isspace() for ch in term):
        raise LexiconError(f"term {term!r} must be lowercase without whitespace", lineno, source)


def load_lexicon(source=None, conflict_policy="neutral", function_words=None, lint=False):
    """Load a lexicon file.

    ``source`` defaults to ``$VLBIAS_LEXICON`` and then to the shipped
    Appendix-A lexicon.
    """
    if source is None:
        source = os.environ.get(LEXICON_ENV) or None
    if source is None:
        text = _data_path("appendix_a.lex").read_text(encoding="utf-8")
        name = "appendix_a.lex"
    else:
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise LexiconError(f"not valid UTF-8 ({exc.reason})", None, str(path)) from None
        name = str(path)
    lex = parse_lexicon(text, source=name, conflict_policy=conflict_policy,
                        function_words=function_words)
    if lint:
        for term in lint_lexicon(lex):
            log.warning("lexicon term %r not found in the English word list", term)
    return lex


def dump_lexicon(lex):
    """Serialize to the lexicon file format (sorted, canonical)."""
    out = []
    for name, terms in (("female", lex.female_terms), ("male", lex.male_terms),
                        ("neutral", lex.neutral_terms)):
        out.append(f"[{name}]")
        out.extend(sorted(terms))
        out.append("")
    out.append("[mappings]")
    out.extend(" | ".join(r) for r in lex.rows)
    out.append("")
    if lex.possessive_map:
        out.append("[ambiguous]")
        for key in sorted(lex.possessive_map):
            out.append(f"{key}: {lex.neutral_map[key]} | {lex.possessive_map[key]}")
        out.append("")
    return "\n".join(out)


def lint_lexicon(lex):
    """Terms unknown to ``wordfreq``'s English list (empty if not installed)."""
    try:
        from wordfreq import zipf_frequency
    except ImportError:
        log.debug("wordfreq not installed; lexicon lint skipped")
        return []
    terms = lex.male_terms | lex.female_terms | lex.neutral_terms
    return sorted(t for t in terms if zipf_frequency(t, "en") == 0.0)


# --------------------------------------------------------------------------
# target nouns


@dataclass(frozen=True)
class TargetNounList:
    corpus_id: str
    nouns: tuple
    excluded: tuple = ()

    def __post_init__(self):
        if len(set(self.nouns)) != len(self.nouns):
            raise DomainError("target nouns contain duplicates")
        if len(self.nouns) > 100:
            log.debug("target list %s has %d nouns (more than 100)", self.corpus_id, len(self.nouns))

    def __len__(self):
        return len(self.nouns)

    def __iter__(self):
        return iter(self.nouns)

    @cached_property
    def index(self):
        return {n: i for i, n in enumerate(self.nouns)}


def make_targets(nouns: Iterable[str], lexicon=None, corpus_id="custom", warn=True):
    """Normalize nouns and drop duplicates and gender terms (kept in ``excluded``)."""
    kept, excluded = [], []
    gender = set()
    if lexicon is not None:
        gender = lexicon.male_terms | lexicon.female_terms | lexicon.neutral_terms
    for raw in nouns:
        n = raw.strip().lower()
        if not n or n in kept:
            continue
        if n in gender:
            excluded.append(n)
            continue
        kept.append(n)
    if excluded:
        log.log(logging.WARNING if warn else logging.INFO,
                "target list %s: dropped gender terms %s", corpus_id, excluded)
    return TargetNounList(corpus_id, tuple(kept), tuple(excluded))


def load_targets(source, lexicon=None, corpus_id=None):
    """Load a noun list: one noun per line (commas allowed), ``#`` comments.

    ``source`` is a path or the name of a shipped list (``coco``, ``cc3m``).
    """
    shipped = str(source) in ("coco", "cc3m")
    if shipped:
        text = _data_path(f"targets_{source}.txt").read_text(encoding="utf-8")
        corpus_id = corpus_id or str(source)
    else:
        text = Path(source).read_text(encoding="utf-8")
        corpus_id = corpus_id or Path(source).stem
    nouns = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        nouns.extend(t for t in (s.strip() for s in line.split(",")) if t)
    # the shipped COCO list contains "people", a known neutral term
    return make_targets(nouns, lexicon, corpus_id, warn=not shipped)
