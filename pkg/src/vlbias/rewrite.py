"""Gender-neutral rewriting, masked probes and the scheduled sampling stream."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, NamedTuple, Tuple

import numpy as np

from .errors import DomainError
from .kernels import WORD_RE
from .labels import GenderLabel
from .lexicon import SENTENCE_PUNCT

DEFAULT_MASK = "[MASK]"


class Substitution(NamedTuple):
    start: int  # character offset in the original text
    source: str
    target: str


@dataclass
class RewriteResult:
    original: str
    rewritten: str
    substitutions: List[Substitution] = field(default_factory=list)

    def to_dict(self):
        return {"original": self.original, "rewritten": self.rewritten,
                "substitutions": [list(s) for s in self.substitutions]}


def apply_substitutions(original, substitutions):
    """Rebuild the rewritten text from the original and recorded substitutions."""
    out = []
    pos = 0
    for start, src, dst in sorted(substitutions):
        if original[start:start + len(src)] != src or start < pos:
            raise DomainError(f"substitution {src!r}@{start} does not match the original")
        out.append(original[pos:start])
        out.append(dst)
        pos = start + len(src)
    out.append(original[pos:])
    return "".join(out)


def _tokens_with_next(text):
    """Yield ``(index, match, next_word_or_None)``; sentence punctuation breaks the link."""
    matches = list(WORD_RE.finditer(text))
    for i, m in enumerate(matches):
        nxt = None
        if i + 1 < len(matches):
            gap = text[m.end():matches[i + 1].start()]
            if not any(ch in SENTENCE_PUNCT for ch in gap):
                nxt = matches[i + 1].group()
        yield i, m, nxt


def rewrite_text(lexicon, text):
    """Replace every male/female term by its neutral counterpart."""
    subs = []
    for _, m, nxt in _tokens_with_next(text):
        tok = m.group()
        if lexicon.classify(tok) in (GenderLabel.MALE, GenderLabel.FEMALE):
            new = lexicon.neutral_target(tok, nxt)
            if new != tok:
                subs.append(Substitution(m.start(), tok, new))
    return RewriteResult(text, apply_substitutions(text, subs), subs)


@dataclass
class MaskedProbe:
    original: str
    masked: str
    mask_positions: List[int]
    gold_labels: List[GenderLabel]
    mask_token: str = DEFAULT_MASK

    def __post_init__(self):
        if len(self.mask_positions) != len(self.gold_labels):
            raise ValueError("one gold label per mask is required")

    def to_dict(self):
        return {"original": self.original, "masked": self.masked,
                "mask_positions": list(self.mask_positions),
                "gold": [g.value for g in self.gold_labels], "mask_token": self.mask_token}


def mask_text(lexicon, text, mask_token=DEFAULT_MASK):
    """Mask every lexicon term (gendered, neutral, pronouns).

    A possessive suffix stays outside the mask (``woman's`` -> ``[MASK]'s``).
    """
    parts = []
    positions, gold = [], []
    pos = 0
    for i, m in enumerate(WORD_RE.finditer(text)):
        tok = m.group()
        label = lexicon.classify(tok)
        if label not in (GenderLabel.MALE, GenderLabel.FEMALE, GenderLabel.NEUTRAL):
            continue
        base = lexicon.base_form(tok)
        keep = tok[len(base):] if base is not None and len(base) < len(tok) else ""
        parts.append(text[pos:m.start()])
        parts.append(mask_token + keep)
        pos = m.end()
        positions.append(i)
        gold.append(label)
    parts.append(text[pos:])
    return MaskedProbe(text, "".join(parts), positions, gold, mask_token)


# --------------------------------------------------------------------------
# scheduled sampling


@dataclass(frozen=True)
class ScheduleConfig:
    total_steps: int
    p_start: float = 0.15
    p_end: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.p_start <= self.p_end <= 1.0):
            raise DomainError("need 0 <= p_start <= p_end <= 1")
        if int(self.total_steps) != self.total_steps or self.total_steps < 1:
            raise DomainError("total_steps must be a positive integer")


def schedule_p(config, step):
    """Probability of drawing the neutral text at ``step`` (linear ramp)."""
    if not 0 <= step < config.total_steps:
        raise DomainError(f"step {step} outside [0, {config.total_steps})")
    if config.total_steps == 1:
        return config.p_end
    if step == config.total_steps - 1:
        return config.p_end
    return config.p_start + (config.p_end - config.p_start) * step / (config.total_steps - 1)


class Sample(NamedTuple):
    step: int
    text: str
    used_neutral: bool


def sample_stream(lexicon, corpus: Iterable[str], config: ScheduleConfig,
                  cycle=False, block=4096) -> Iterator[Sample]:
    """Emit the original or the rewritten text at each step.

    One uniform draw per step from ``numpy.random.default_rng(seed)``; the
    neutral text is used when the draw falls below ``schedule_p``.  The corpus
    must have exactly ``total_steps`` texts unless ``cycle`` repeats it.
    """
    source = itertools.cycle(corpus) if cycle else iter(corpus)
    rng = np.random.default_rng(config.seed)
    draws = np.empty(0)
    for step in range(config.total_steps):
        try:
            text = next(source)
        except StopIteration:
            raise DomainError(
                f"corpus ended after {step} texts; total_steps={config.total_steps} "
                "(use cycle=True to repeat it)") from None
        j = step % block
        if j == 0:
            draws = rng.random(min(block, config.total_steps - step))
        used = bool(draws[j] < schedule_p(config, step))
        yield Sample(step, rewrite_text(lexicon, text).rewritten if used else text, used)
    if not cycle:
        for _ in source:
            raise DomainError(f"corpus longer than total_steps={config.total_steps}")
