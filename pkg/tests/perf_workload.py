"""Synthetic annotate + co-occurrence workload, run in a fresh interpreter.

Usage: python3 perf_workload.py N_RECORDS
Prints one JSON object with wall time and peak resident memory.
"""
import json
import random
import resource
import sys
import time

from oracles import caption_grammar
from vlbias.annotate import LabelSummary, label_corpus
from vlbias.cooccur import build_matrix
from vlbias.ingest import CaptionRecord
from vlbias.lexicon import load_lexicon, load_targets

CAPTIONS_PER_IMAGE = 5


def records(pool, n):
    for i in range(n):
        yield CaptionRecord(str(i // CAPTIONS_PER_IMAGE), str(i), pool[(i * 7919) % len(pool)])


def run(n):
    lex = load_lexicon()
    targets = load_targets("coco", lex)
    rng = random.Random(0)
    pool = [caption_grammar(rng) for _ in range(5000)]
    baseline = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    start = time.perf_counter()
    summary = LabelSummary()
    for _ in label_corpus(lex, records(pool, n), summary=summary):
        pass
    matrix = build_matrix(lex, targets, (r.text for r in records(pool, n)))
    seconds = time.perf_counter() - start
    return {"records": n, "seconds": seconds, "units": summary.units,
            "contexts": matrix.contexts_seen, "baseline_kb": baseline,
            "peak_kb": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss}


if __name__ == "__main__":
    print(json.dumps(run(int(sys.argv[1]))))
