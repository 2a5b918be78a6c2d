"""Command-line driver.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(missing or malformed input), 3 training or checkpoint error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import torch

from . import pipeline
from .config import PipelineConfig
from .corpus import Corpus, read_conll, sample_split, save_conll
from .errors import MelmError, MissingFileError, UsageError
from .evaluate import compare_runs, micro_f1, render_table, unique_valid_entities
from .synthetic import write_benchmark
from .tagger import train_tagger

log = logging.getLogger("melm")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(UsageError.exit_code, f"{self.prog}: error: {message}\n")


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config, args.set)
    torch.set_num_threads(cfg["torch_threads"])
    return cfg


def cmd_synth(args):
    path = write_benchmark(args.output, args.seed, args.n_train, args.n_test)
    print(path)


def cmd_split(args):
    corpus = read_conll(args.input, args.lang)
    save_conll(sample_split(corpus, args.n, args.seed), args.output)


def cmd_codemix(args):
    cfg = _config(args)
    cfg.validate_paths()
    mixed = pipeline.stage_codemix(cfg)
    print(f"{len(mixed)} code-mixed sentences -> {cfg.out(pipeline.CODEMIXED)}")


def cmd_train_mlm(args):
    cfg = _config(args)
    cfg.validate_paths()
    progress = None
    if args.verbose:
        def progress(epoch, loss):
            log.info("epoch %d loss %.4f", epoch + 1, loss)
    model = pipeline.stage_train_mlm(cfg, progress)
    print(f"loss {model.loss_history[0]:.4f} -> {model.loss_history[-1]:.4f}; "
          f"checkpoint -> {cfg.out(pipeline.CHECKPOINT)}")


def cmd_augment(args):
    cfg = _config(args)
    cfg.validate_paths()
    samples = pipeline.stage_augment(cfg)
    print(f"{len(samples)} samples -> {cfg.out(pipeline.AUGMENTED)}")


def cmd_filter(args):
    cfg = _config(args)
    cfg.validate_paths()
    kept, report = pipeline.stage_filter(cfg)
    sys.stdout.write(report.render())


def cmd_eval(args):
    if args.gold and args.pred:
        report = micro_f1(read_conll(args.gold, args.lang), read_conll(args.pred, args.lang))
        sys.stdout.write(report.to_tsv() if args.tsv else report.render())
        return
    if not args.config:
        raise UsageError("eval needs either --gold and --pred, or --config")
    cfg = _config(args)
    cfg.validate_paths()
    gold = pipeline.read_split(cfg, "train")
    test = pipeline.read_split(cfg, "test")
    if not len(test):
        raise UsageError("no test.<lang> corpus configured")
    extra = Corpus()
    if cfg.multilingual:
        extra = pipeline.read_output(cfg, pipeline.CODEMIXED)
    kept = pipeline.read_output(cfg, pipeline.FILTERED)
    table = compare_runs(gold, list(extra + kept), test, cfg.seeds, cfg["tagger.epochs"])
    with open(cfg.out("compare.tsv"), "w", encoding="utf-8") as fh:
        fh.write(table.to_tsv())
    sys.stdout.write(table.to_tsv() if args.tsv else table.render())


def cmd_stats(args):
    datasets = {}
    for item in args.datasets:
        if "=" not in item:
            raise UsageError(f"dataset {item!r}: expected NAME=PATH")
        name, path = item.split("=", 1)
        datasets[name] = read_conll(path, args.lang)
    oracle_corpus = Corpus()
    for path in args.oracle:
        oracle_corpus = oracle_corpus + read_conll(path, args.lang)
    classes = set(oracle_corpus.classes).union(*(c.classes for c in datasets.values()))
    oracle = train_tagger(oracle_corpus, args.epochs, args.seed, classes)
    counts = unique_valid_entities(datasets, oracle)
    rows = [("dataset", "unique_valid_entities")] + [(n, str(c)) for n, c in counts.items()]
    if args.tsv:
        sys.stdout.write("".join("\t".join(r) + "\n" for r in rows))
    else:
        sys.stdout.write(render_table(rows))


def cmd_pipeline(args):
    cfg = _config(args)
    progress = None
    if args.verbose:
        def progress(epoch, loss):
            if (epoch + 1) % 10 == 0:
                log.info("epoch %d loss %.4f", epoch + 1, loss)
    result = pipeline.run_pipeline(cfg, progress)
    print(f"{len(result)} sentences -> {cfg.out(pipeline.OUTPUT)}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="melm", description="Masked entity language modeling data augmentation for NER.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(p, required=True):
        p.add_argument("--config", "-c", required=required, help="flat key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        return p

    p = sub.add_parser("synth", help="write the bundled synthetic two-language benchmark")
    p.add_argument("output")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=100)
    p.add_argument("--n-test", type=int, default=200)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="sample N sentences from a corpus")
    p.add_argument("input")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lang", default="en")
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=cmd_split)

    for name, func, text in (
        ("codemix", cmd_codemix, "code-mix gold training data"),
        ("train-mlm", cmd_train_mlm, "fine-tune the masked entity LM"),
        ("augment", cmd_augment, "generate augmented samples"),
        ("filter", cmd_filter, "keep label-consistent samples"),
        ("pipeline", cmd_pipeline, "run every stage"),
    ):
        with_config(sub.add_parser(name, help=text)).set_defaults(func=func)

    p = with_config(sub.add_parser("eval", help="micro-F1 of a prediction, or gold vs augmented comparison"),
                    required=False)
    p.add_argument("--gold")
    p.add_argument("--pred")
    p.add_argument("--lang", default="en")
    p.add_argument("--tsv", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="count unique valid entities per dataset")
    p.add_argument("datasets", nargs="+", metavar="NAME=PATH")
    p.add_argument("--oracle", action="append", required=True, help="trusted corpus to train the oracle tagger")
    p.add_argument("--lang", default="en")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tsv", action="store_true")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code or 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except FileNotFoundError as exc:
        err = MissingFileError(f"file not found: {exc.filename}")
        print(f"melm: data error: {err}", file=sys.stderr)
        return err.exit_code
    except MelmError as exc:
        category = {1: "usage", 2: "data", 3: "training"}[exc.exit_code]
        print(f"melm: {category} error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
