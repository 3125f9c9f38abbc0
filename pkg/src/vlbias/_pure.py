"""Reference (pure Python) implementation of the scanning kernels.

``_speedups.pyx`` must agree with this module bit for bit; see
``tests/test_kernels.py``.
"""
import re

WORD_RE = re.compile(r"\w+(?:['’]\w+)*")
_POSSESSIVE = ("'s", "’s")


def lookup(table, token):
    """Id of ``token`` in ``table`` after normalization, or None."""
    key = token.lower()
    v = table.get(key)
    if v is None and key.endswith(_POSSESSIVE):
        v = table.get(key[:-2])
    return v


def token_spans(text):
    return [m.span() for m in WORD_RE.finditer(text)]


def scan_hits(text, table, group_of):
    hits = [0, 0, 0]
    for m in WORD_RE.finditer(text):
        v = lookup(table, m.group())
        if v is not None:
            g = group_of[v]
            if g >= 0:
                hits[g] += 1
    return hits


def count_batch(texts, table, group_of, target_of, counts=None, hits=None,
                multiplicity=False, group_ctx=None, target_ctx=None):
    """Scan ``texts`` once, filling per-text group hits and co-occurrence counts.

    Parameters
    ----------
    texts : sequence of str
    table : dict
        Normalized token -> term id.
    group_of, target_of : int arrays indexed by term id
        Group index (0 male, 1 female, 2 neutral) or -1; target index or -1.
    counts : int64 array (3, n_targets), optional
        Incremented in place. A (group, target) cell gains 1 per context where
        both occur, or the number of distinct group words when
        ``multiplicity`` is set.
    hits : int64 array (len(texts), 3), optional
        Overwritten with per-text hit counts.
    group_ctx, target_ctx : int64 arrays (3,) and (n_targets,), optional
        Incremented by the number of contexts containing each group / target.

    Returns
    -------
    int
        Number of texts consumed.
    """
    group_of = list(group_of)
    target_of = list(target_of)
    pending = {}
    n = 0
    for i, text in enumerate(texts):
        h = [0, 0, 0]
        words = (set(), set(), set())
        present = set()
        for m in WORD_RE.finditer(text):
            v = lookup(table, m.group())
            if v is None:
                continue
            g = group_of[v]
            if g >= 0:
                h[g] += 1
                words[g].add(v)
            t = target_of[v]
            if t >= 0:
                present.add(t)
        if hits is not None:
            hits[i, 0], hits[i, 1], hits[i, 2] = h
        if group_ctx is not None:
            for g in range(3):
                if h[g]:
                    group_ctx[g] += 1
        if target_ctx is not None:
            for t in present:
                target_ctx[t] += 1
        if counts is not None and present:
            for g in range(3):
                if h[g]:
                    inc = len(words[g]) if multiplicity else 1
                    for t in present:
                        pending[g, t] = pending.get((g, t), 0) + inc
        n += 1
    if counts is not None:
        for (g, t), c in pending.items():
            counts[g, t] += c
    return n
