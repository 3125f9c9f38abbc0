"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .annotate import LabelSummary, label_corpus
from .cooccur import CooccurrenceMatrix, build_matrix, merge, select_targets
from .errors import DataError, VlbiasError
from .ingest import CAPTION_FORMATS, ParseStats, parse_captions, parse_predictions, parse_qa_training
from .lexicon import CONFLICT_POLICIES, load_lexicon, load_targets
from .metrics import MLM_STRATEGIES
from .report import (
    EXTRINSIC_TASKS, RENDER_FORMATS, AuditReport, cmd_extrinsic, cmd_intrinsic, render,
    run_metadata, write_run,
)
from .rewrite import DEFAULT_MASK, ScheduleConfig, mask_text, rewrite_text, sample_stream

log = logging.getLogger("vlbias")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# config file: "key = value" lines, flags given on the command line win


def read_config(path):
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        values[key.strip().replace("-", "_")] = value
    return values


def _config_value(action, raw):
    if action.nargs == 0:
        low = raw.lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise UsageError(f"config key {action.dest!r} expects true or false")
        on = low in ("true", "yes", "1")
        return on if isinstance(action, argparse._StoreTrueAction) else not on
    if action.nargs in ("*", "+"):
        items = raw.replace(",", " ").split()
        return [action.type(x) if action.type else x for x in items]
    value = action.type(raw) if action.type else raw
    if action.choices is not None and value not in action.choices:
        raise UsageError(f"config key {action.dest!r}: {raw!r} not in {list(action.choices)}")
    return value


def _apply_config(sub, config, known_keys):
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, raw in config.items():
        if key not in known_keys:
            raise UsageError(f"unknown config key {key!r}")
        if key in actions and not actions[key].required:
            defaults[key] = _config_value(actions[key], raw)
    sub.set_defaults(**defaults)


# --------------------------------------------------------------------------
# helpers


def _lexicon(args):
    return load_lexicon(args.lexicon, conflict_policy=args.conflict_policy)


def _captions(args, path, stats):
    return parse_captions(path, args.format, args.skip_bad, args.lossy_utf8, stats)


def _report_skips(stats, what):
    if stats.skipped:
        log.warning("%s: skipped %d bad record(s) of %d", what, stats.skipped, stats.consumed)


@contextlib.contextmanager
def _output(path):
    if path is None or str(path) == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _write_lines(path, objs):
    n = 0
    with _output(path) as fh:
        for obj in objs:
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
            n += 1
    return n


def _emit_report(args, report):
    if args.out:
        manifest = write_run(report, args.out, args.formats)
        log.info("wrote %s", manifest)
    else:
        sys.stdout.write(render(report, args.formats[0]))


# --------------------------------------------------------------------------
# subcommands


def run_annotate(args):
    lex = _lexicon(args)
    stats, summary = ParseStats(), LabelSummary()
    examples = label_corpus(lex, _captions(args, args.input, stats), args.unit, summary=summary,
                            jobs=args.jobs, stable_order=args.stable_order)
    _write_lines(args.out, (ex.to_dict(with_evidence=args.evidence) for ex in examples))
    _report_skips(stats, args.input)
    result = {"labels": summary.to_dict(), "records": stats.to_dict()}
    text = json.dumps(result, indent=2, sort_keys=True) + "\n"
    if args.summary:
        Path(args.summary).write_text(text, encoding="utf-8")
    else:
        sys.stderr.write(text)


def run_rewrite(args):
    lex = _lexicon(args)
    if args.text is not None:
        print(rewrite_text(lex, args.text).rewritten)
        return
    if args.input is None:
        raise UsageError("rewrite: give an input file or --text")
    stats = ParseStats()

    def rows():
        for rec in _captions(args, args.input, stats):
            yield {"image_id": rec.image_id, "caption_id": rec.caption_id,
                   **rewrite_text(lex, rec.text).to_dict()}
    _write_lines(args.out, rows())
    _report_skips(stats, args.input)


def run_mask(args):
    lex = _lexicon(args)
    if args.text is not None:
        print(mask_text(lex, args.text, args.mask_token).masked)
        return
    if args.input is None:
        raise UsageError("mask: give an input file or --text")
    stats = ParseStats()

    def rows():
        for rec in _captions(args, args.input, stats):
            probe = mask_text(lex, rec.text, args.mask_token)
            if probe.gold_labels:
                yield {"probe_id": rec.caption_id, "image_id": rec.image_id, **probe.to_dict()}
    _write_lines(args.out, rows())
    _report_skips(stats, args.input)


def run_sample(args):
    lex = _lexicon(args)
    steps = args.steps
    if steps is None:
        steps = sum(1 for _ in _captions(args, args.input, ParseStats()))
        if steps == 0:
            raise DataError(f"{args.input}: no captions")
    config = ScheduleConfig(steps, args.p_start, args.p_end, args.seed)
    stats = ParseStats()
    texts = (rec.text for rec in _captions(args, args.input, stats))
    samples = sample_stream(lex, texts, config, cycle=args.cycle)
    _write_lines(args.out, (s._asdict() for s in samples))
    _report_skips(stats, args.input)


def run_cooccur_build(args):
    lex = _lexicon(args)
    targets = load_targets(args.targets, lex)
    stats = ParseStats()
    m = build_matrix(lex, targets, (r.text for r in _captions(args, args.input, stats)),
                     multiplicity=args.count_multiplicity)
    _report_skips(stats, args.input)
    m.save(args.out, lexicon_fingerprint=lex.fingerprint, records=stats.to_dict())
    log.info("%d contexts, %d targets -> %s", m.contexts_seen, len(targets), args.out)


def run_cooccur_merge(args):
    matrices = [CooccurrenceMatrix.load(p) for p in args.inputs]
    total = matrices[0]
    for m in matrices[1:]:
        total = merge(total, m)
    total.save(args.out)


def run_cooccur_targets(args):
    lex = _lexicon(args)
    oracle = None
    if args.nouns:
        oracle = [w.strip() for w in Path(args.nouns).read_text(encoding="utf-8").split()]
    stats = ParseStats()
    chosen = select_targets(lex, (r.text for r in _captions(args, args.input, stats)), args.k,
                            noun_oracle=oracle, corpus_id=Path(args.input).stem)
    _report_skips(stats, args.input)
    with _output(args.out) as fh:
        fh.write(f"# top-{args.k} target nouns from {Path(args.input).name}\n")
        for noun in chosen.nouns:
            fh.write(noun + "\n")


def run_intrinsic(args):
    lex = _lexicon(args)
    targets = load_targets(args.targets, lex)
    reference = None
    if args.reference:
        matrix = CooccurrenceMatrix.load(args.reference)
        if tuple(matrix.targets.nouns) != tuple(targets.nouns):
            raise DataError(f"{args.reference}: target nouns differ from --targets")
        reference = matrix.to_event_table()
    cap_stats, pred_stats = ParseStats(), ParseStats()
    section = cmd_intrinsic(
        lex, targets, _captions(args, args.captions, cap_stats),
        parse_predictions(args.predictions, "mlm", args.skip_bad, args.lossy_utf8, pred_stats),
        strategy=args.strategy, mask_token=args.mask_token,
        credit_neutral=not args.no_neutral_credit, reference=reference,
        bootstrap=args.bootstrap, seed=args.seed)
    _report_skips(cap_stats, args.captions)
    _report_skips(pred_stats, args.predictions)
    section["counts"]["skipped_records"] = cap_stats.skipped + pred_stats.skipped
    meta = run_metadata(lex, args.seed, strategy=args.strategy, mask_token=args.mask_token,
                        credit_neutral=not args.no_neutral_credit, targets=targets.corpus_id,
                        bootstrap=args.bootstrap)
    _emit_report(args, AuditReport(meta, intrinsic=section))


def run_extrinsic(args):
    lex = _lexicon(args)
    stats = ParseStats()
    kwargs = {}
    if args.task.startswith("retrieval"):
        if not args.captions:
            raise UsageError(f"{args.task} needs --captions")
        kwargs["retrieval"] = parse_predictions(args.predictions, "retrieval", args.skip_bad,
                                                args.lossy_utf8, stats)
        kwargs["captions"] = list(_captions(args, args.captions, ParseStats()))
    else:
        kwargs["qa"] = parse_predictions(args.predictions, "vqa", args.skip_bad,
                                         args.lossy_utf8, stats)
    if args.train:
        kwargs["training"] = parse_qa_training(args.train, args.skip_bad, args.lossy_utf8)
    if args.categories:
        text = Path(args.categories).read_text(encoding="utf-8")
        kwargs["categories"] = {ln.strip() for ln in text.splitlines()
                                if ln.strip() and not ln.startswith("#")}
    section = cmd_extrinsic(args.task, lex, min_count=args.min_count, biasamp=args.biasamp,
                            bootstrap=args.bootstrap, seed=args.seed, **kwargs)
    _report_skips(stats, args.predictions)
    section["counts"]["skipped_records"] = stats.skipped
    meta = run_metadata(lex, args.seed, task=args.task, biasamp=args.biasamp,
                        min_count=args.min_count, bootstrap=args.bootstrap)
    _emit_report(args, AuditReport(meta, extrinsic={args.task: section}))


def run_report(args):
    report = AuditReport.load(args.inputs[0])
    for path in args.inputs[1:]:
        report = report.merge(AuditReport.load(path))
    _emit_report(args, report)


# --------------------------------------------------------------------------
# parser


def build_parser():
    common = _Parser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="key = value file; command-line flags override it")
    g.add_argument("--lexicon", help="lexicon file (default: $VLBIAS_LEXICON or the shipped one)")
    g.add_argument("--conflict-policy", choices=CONFLICT_POLICIES, default="neutral")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--skip-bad", action="store_true", help="warn and skip malformed records")
    g.add_argument("--lossy-utf8", action="store_true", help="replace invalid UTF-8")
    g.add_argument("--format", choices=CAPTION_FORMATS, help="caption file format (default: auto)")
    g.add_argument("-v", "--verbose", action="count", default=0)
    g.add_argument("-q", "--quiet", action="store_true")

    reporting = _Parser(add_help=False)
    reporting.add_argument("--out", help="run directory (default: print to stdout)")
    reporting.add_argument("--formats", nargs="+", choices=RENDER_FORMATS,
                           default=list(RENDER_FORMATS),
                           help="formats to write; the first one is printed without --out")
    reporting.add_argument("--bootstrap", type=int, default=0, metavar="N",
                           help="bootstrap resamples for a BiasAmp interval (e.g. 1000)")

    parser = _Parser(prog="vlbias", description="Gender bias auditing for vision-language data "
                     "and model predictions.")
    parser.add_argument("--version", action="version", version=f"vlbias {__version__}")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    registry = {}

    def add(name, func, help_, parents=(common,), registry_key=None, into=subs):
        p = into.add_parser(name, help=help_, parents=list(parents), description=help_)
        p.set_defaults(func=func)
        registry[registry_key or name] = p
        return p

    p = add("annotate", run_annotate, "label images (or single texts) Male/Female/Neutral/Discarded")
    p.add_argument("input")
    p.add_argument("--unit", choices=("image", "text"), default="image")
    p.add_argument("--out", help="labels JSONL (default stdout)")
    p.add_argument("--summary", help="write the label counts here instead of stderr")
    p.add_argument("--evidence", action="store_true", help="include per-caption hit counts")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--stable-order", action="store_true",
                   help="keep input order when --jobs > 1")

    p = add("rewrite", run_rewrite, "replace gendered words by neutral ones")
    p.add_argument("input", nargs="?")
    p.add_argument("--text")
    p.add_argument("--out")

    p = add("mask", run_mask, "mask gender words to build language-model probes")
    p.add_argument("input", nargs="?")
    p.add_argument("--text")
    p.add_argument("--mask-token", default=DEFAULT_MASK)
    p.add_argument("--out")

    p = add("sample", run_sample, "emit original or neutral captions on a linear schedule")
    p.add_argument("input")
    p.add_argument("--steps", type=int, help="training steps (default: number of captions)")
    p.add_argument("--p-start", type=float, default=0.15)
    p.add_argument("--p-end", type=float, default=1.0)
    p.add_argument("--cycle", action="store_true", help="repeat the corpus to fill --steps")
    p.add_argument("--out")

    p = subs.add_parser("cooccur", help="group x target-noun co-occurrence counts")
    csubs = p.add_subparsers(dest="cooccur_command", required=True, parser_class=_Parser)
    p = add("build", run_cooccur_build, "count co-occurrences over a caption file",
            registry_key="cooccur build", into=csubs)
    p.add_argument("input")
    p.add_argument("--targets", default="coco", help="coco, cc3m or a noun-list file")
    p.add_argument("--count-multiplicity", action="store_true",
                   help="add the number of distinct group words per context instead of 1")
    p.add_argument("--out", required=True, help="matrix CSV (a .json sidecar is written next to it)")
    p = add("merge", run_cooccur_merge, "add matrices built on shards",
            registry_key="cooccur merge", into=csubs)
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p = add("targets", run_cooccur_targets, "select the most frequent nouns next to gender words",
            registry_key="cooccur targets", into=csubs)
    p.add_argument("input")
    p.add_argument("-k", type=int, default=100)
    p.add_argument("--nouns", help="file of allowed nouns (default: a stop-word heuristic)")
    p.add_argument("--out")

    p = add("intrinsic", run_intrinsic, "score masked-language-model predictions",
            parents=(common, reporting))
    p.add_argument("--captions", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--targets", default="coco")
    p.add_argument("--strategy", choices=MLM_STRATEGIES, default="top1-strict")
    p.add_argument("--mask-token", default=DEFAULT_MASK)
    p.add_argument("--no-neutral-credit", action="store_true",
                   help="score neutral predictions by exact match")
    p.add_argument("--reference", help="training co-occurrence matrix CSV for correlation signs")

    p = add("extrinsic", run_extrinsic, "score downstream-task predictions per gender group",
            parents=(common, reporting))
    p.add_argument("task", choices=EXTRINSIC_TASKS)
    p.add_argument("--predictions", required=True)
    p.add_argument("--captions", help="evaluation captions (retrieval tasks)")
    p.add_argument("--train", help="training QA JSONL for answer categories and correlation signs")
    p.add_argument("--categories", help="answer categories, one per line")
    p.add_argument("--min-count", type=int, default=50)
    p.add_argument("--biasamp", action=argparse.BooleanOptionalAction, default=None,
                   help="compute BiasAmp A->T (default: when categories are available)")

    p = add("report", run_report, "merge report JSON files and render them",
            parents=(common, reporting))
    p.add_argument("inputs", nargs="+")

    return parser, registry


def _active_subparser(args, registry):
    if args.command == "cooccur":
        return registry[f"cooccur {args.cooccur_command}"]
    return registry[args.command]


def parse_args(argv=None):
    parser, registry = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.config:
        config = read_config(args.config)
        known = {a.dest for sub in registry.values() for a in sub._actions}
        _apply_config(_active_subparser(args, registry), config, known)
        args = parser.parse_args(argv)
    return args


def _setup_logging(args):
    level = logging.ERROR if args.quiet else (logging.DEBUG if args.verbose > 1 else
                                              logging.INFO if args.verbose else logging.WARNING)
    logging.basicConfig(level=level, format="vlbias: %(levelname)s: %(message)s")
    logging.captureWarnings(True)


def main(argv=None):
    try:
        args = parse_args(argv)
        _setup_logging(args)
        args.func(args)
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VlbiasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return 130
    except Exception:
        log.exception("internal error")
        print("internal error (see traceback above)", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
