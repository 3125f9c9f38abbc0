"""Compare the compiled and pure Python scanning kernels.

    python3 benchmarks/bench_kernels.py [--captions 200000] [--repeat 3]

Both backends run on the same synthetic captions; their outputs are checked
for equality before timings are reported.
"""
import argparse
import random
import sys
import timeit
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from oracles import caption_grammar  # noqa: E402
from vlbias import _pure  # noqa: E402
from vlbias.cooccur import _target_ids  # noqa: E402
from vlbias.lexicon import load_lexicon, load_targets  # noqa: E402

try:
    from vlbias import _speedups
except ImportError:
    _speedups = None


def workloads(backend, texts, table, group_of, target_of):
    n_targets = int(target_of.max()) + 1

    def scan():
        for t in texts:
            backend.scan_hits(t, table, group_of)

    def batch():
        counts = np.zeros((3, n_targets), dtype=np.int64)
        backend.count_batch(texts, table, group_of, target_of, counts)
        return counts

    def tokens():
        for t in texts:
            backend.token_spans(t)

    return {"token_spans": tokens, "scan_hits": scan, "count_batch": batch}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--captions", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _speedups is None:
        sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    lex = load_lexicon()
    table, group_of, target_of = _target_ids(lex, load_targets("coco", lex))
    rng = random.Random(args.seed)
    texts = [caption_grammar(rng) for _ in range(args.captions)]

    pure = workloads(_pure, texts, table, group_of, target_of)
    fast = workloads(_speedups, texts, table, group_of, target_of)
    if not np.array_equal(pure["count_batch"](), fast["count_batch"]()):
        sys.exit("backends disagree on count_batch")

    print(f"{args.captions} captions, best of {args.repeat}")
    print(f"{'kernel':<12} {'python s':>9} {'cython s':>9} {'speedup':>8}")
    for name in pure:
        t_pure = min(timeit.repeat(pure[name], number=1, repeat=args.repeat))
        t_fast = min(timeit.repeat(fast[name], number=1, repeat=args.repeat))
        print(f"{name:<12} {t_pure:9.3f} {t_fast:9.3f} {t_pure / t_fast:7.1f}x")


if __name__ == "__main__":
    main()
