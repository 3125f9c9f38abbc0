# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled scanning kernels; semantics are defined by ``vlbias._pure``."""
from cpython.unicode cimport Py_UNICODE_ISALNUM

import numpy as np


cdef inline bint _is_word(Py_UCS4 ch):
    return Py_UNICODE_ISALNUM(ch) or ch == u'_'


cdef inline bint _is_apos(Py_UCS4 ch):
    return ch == u"'" or ch == u'’'


cdef inline object _lookup(dict table, str token):
    cdef str key = token.lower()
    cdef Py_ssize_t n
    v = table.get(key)
    if v is None:
        n = len(key)
        if n > 2 and key[n - 1] == u's' and _is_apos(key[n - 2]):
            v = table.get(key[:n - 2])
    return v


cdef inline Py_ssize_t _next_token(str text, Py_ssize_t i, Py_ssize_t n,
                                   Py_ssize_t* start):
    """Advance to the next word token; return its end (or -1 when none)."""
    while i < n and not _is_word(text[i]):
        i += 1
    if i >= n:
        return -1
    start[0] = i
    i += 1
    while i < n:
        if _is_word(text[i]):
            i += 1
        elif _is_apos(text[i]) and i + 1 < n and _is_word(text[i + 1]):
            i += 2
        else:
            break
    return i


def lookup(dict table, str token):
    return _lookup(table, token)


def token_spans(str text):
    cdef Py_ssize_t n = len(text), i = 0, start = 0, end
    out = []
    while True:
        end = _next_token(text, i, n, &start)
        if end < 0:
            break
        out.append((start, end))
        i = end
    return out


def scan_hits(str text, dict table, group_of):
    cdef Py_ssize_t n = len(text), i = 0, start = 0, end, g
    cdef long h0 = 0, h1 = 0, h2 = 0
    for_groups = group_of
    while True:
        end = _next_token(text, i, n, &start)
        if end < 0:
            break
        i = end
        v = _lookup(table, text[start:end])
        if v is None:
            continue
        g = for_groups[v]
        if g == 0:
            h0 += 1
        elif g == 1:
            h1 += 1
        elif g == 2:
            h2 += 1
    return [h0, h1, h2]


def count_batch(texts, dict table, group_of, target_of, counts=None, hits=None,
                bint multiplicity=False, group_ctx=None, target_ctx=None):
    cdef const signed char[::1] grp = np.ascontiguousarray(group_of, dtype=np.int8)
    cdef const int[::1] tgt = np.ascontiguousarray(target_of, dtype=np.intc)
    cdef Py_ssize_t n_ids = grp.shape[0]
    cdef Py_ssize_t n_targets = 0
    cdef Py_ssize_t k
    for k in range(n_ids):
        if tgt[k] + 1 > n_targets:
            n_targets = tgt[k] + 1

    cdef long long[:, ::1] cnt
    cdef long long[:, ::1] hit
    cdef bint want_counts = counts is not None
    cdef bint want_hits = hits is not None
    if want_counts:
        cnt = counts
        if n_targets > cnt.shape[1]:
            raise ValueError("counts has fewer columns than target ids")
    if want_hits:
        hit = hits
    cdef long long[::1] gctx
    cdef long long[::1] tctx
    cdef bint want_gctx = group_ctx is not None
    cdef bint want_tctx = target_ctx is not None
    if want_gctx:
        gctx = group_ctx
        if gctx.shape[0] < 3:
            raise ValueError("group_ctx needs 3 entries")
    if want_tctx:
        tctx = target_ctx
        if n_targets > tctx.shape[0]:
            raise ValueError("target_ctx has fewer entries than target ids")

    # stamps give O(1) per-context de-duplication without clearing arrays
    cdef long long[::1] id_stamp = np.zeros(max(n_ids, 1), dtype=np.int64)
    cdef long long[::1] t_stamp = np.zeros(max(n_targets, 1), dtype=np.int64)
    cdef int[::1] present = np.zeros(max(n_targets, 1), dtype=np.intc)

    cdef Py_ssize_t row = 0, i, n, start = 0, end, v, g, t, j, n_present
    cdef long long stamp
    cdef long long h[3]
    cdef long long distinct[3]
    cdef str text
    for obj in texts:
        text = obj
        stamp = row + 1
        h[0] = h[1] = h[2] = 0
        distinct[0] = distinct[1] = distinct[2] = 0
        n_present = 0
        n = len(text)
        i = 0
        while True:
            end = _next_token(text, i, n, &start)
            if end < 0:
                break
            i = end
            o = _lookup(table, text[start:end])
            if o is None:
                continue
            v = o
            g = grp[v]
            if g >= 0:
                h[g] += 1
                if id_stamp[v] != stamp:
                    id_stamp[v] = stamp
                    distinct[g] += 1
            t = tgt[v]
            if t >= 0 and t_stamp[t] != stamp:
                t_stamp[t] = stamp
                present[n_present] = t
                n_present += 1
        if want_hits:
            if row >= hit.shape[0]:
                raise ValueError("hits has fewer rows than texts")
            hit[row, 0] = h[0]
            hit[row, 1] = h[1]
            hit[row, 2] = h[2]
        if want_gctx:
            for g in range(3):
                if h[g]:
                    gctx[g] += 1
        if want_tctx:
            for j in range(n_present):
                tctx[present[j]] += 1
        if want_counts and n_present:
            for g in range(3):
                if h[g]:
                    for j in range(n_present):
                        cnt[g, present[j]] += distinct[g] if multiplicity else 1
        row += 1
    return row
