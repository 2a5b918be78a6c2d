"""Pipeline stages over a :class:`PipelineConfig`; each reads and writes ``output_dir``.

Artifacts::

    codemixed.conll                       code-mixed gold (multilingual mode)
    mlm.pt                                fine-tuned model checkpoint
    augmented.conll, augmented.prov.tsv   generated samples + provenance
    filtered.conll, filtered.prov.tsv     samples kept by the consistency filter
    filter_report.txt
    train_aug.conll                       training data plus kept samples
    manifest.json
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import platform

import numpy as np
import torch

from . import __version__
from .codemix import codemix_corpus, read_embeddings
from .corpus import Corpus, build_entity_index, read_conll, save_conll
from .errors import DataError, MissingFileError
from .filtering import FilterReport, filter_consistent
from .generate import attach_provenance, augment, format_provenance
from .mlm import check_compatible, finetune, load_checkpoint, new_model, save_checkpoint
from .tagger import train_tagger

log = logging.getLogger(__name__)

CODEMIXED = "codemixed.conll"
CHECKPOINT = "mlm.pt"
AUGMENTED = "augmented.conll"
FILTERED = "filtered.conll"
REPORT = "filter_report.txt"
OUTPUT = "train_aug.conll"
MANIFEST = "manifest.json"


def provenance_path(conll_path: str) -> str:
    return conll_path[: -len(".conll")] + ".prov.tsv"


def read_split(cfg, split: str) -> Corpus:
    corpus = Corpus()
    for lang, path in cfg.corpora_paths(split).items():
        corpus = corpus + read_conll(path, lang)
    return corpus


def require(path: str) -> str:
    if not os.path.isfile(path):
        raise MissingFileError(f"required artifact not found: {path} (run the upstream stage first)")
    return path


def read_output(cfg, name: str) -> Corpus:
    # language comments inside the file override this default
    default = next(iter(cfg.corpora_paths("train")), "und")
    return read_conll(require(cfg.out(name)), default)


def write_samples(samples, path: str):
    save_conll(Corpus(s.sentence for s in samples), path, language_comments=True)
    with open(provenance_path(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_provenance(samples))


def read_samples(cfg, name: str):
    corpus = read_output(cfg, name)
    with open(require(provenance_path(cfg.out(name))), encoding="utf-8") as fh:
        return attach_provenance(corpus, fh.read())


def load_tables(cfg) -> dict:
    return {pair: read_embeddings(path, pair) for pair, path in cfg.embedding_paths().items()}


def mlm_training_corpus(cfg, gold: Corpus) -> Corpus:
    if cfg.multilingual:
        return gold + read_output(cfg, CODEMIXED)
    return gold


def stage_codemix(cfg) -> Corpus:
    gold = read_split(cfg, "train")
    index = build_entity_index([gold])
    tables = load_tables(cfg) if cfg.codemix.strategy == "ess" else {}
    mixed = codemix_corpus(gold, cfg.codemix, index, tables, cfg["seed"])
    os.makedirs(cfg.output_dir, exist_ok=True)
    save_conll(mixed, cfg.out(CODEMIXED), language_comments=True)
    log.info("code-mixed %d of %d sentences", len(mixed), len(gold))
    return mixed


def stage_train_mlm(cfg, progress=None):
    gold = read_split(cfg, "train")
    corpus = mlm_training_corpus(cfg, gold)
    model = new_model(corpus, cfg.model, cfg["mlm.min_freq"], cfg["seed"])
    finetune(model, corpus, cfg.training, cfg["seed"], progress)
    os.makedirs(cfg.output_dir, exist_ok=True)
    save_checkpoint(model, cfg.out(CHECKPOINT))
    log.info("MLM loss %.4f -> %.4f", model.loss_history[0], model.loss_history[-1])
    return model


def stage_augment(cfg, model=None):
    gold = read_split(cfg, "train")
    corpus = mlm_training_corpus(cfg, gold)
    if model is None:
        model = load_checkpoint(require(cfg.out(CHECKPOINT)))
    check_compatible(model.vocab, corpus, cfg.multilingual)
    samples = augment(corpus, model, cfg.masking, cfg["seed"], cfg.multilingual,
                      cfg["sampling"] == "renormalized", cfg["workers"])
    write_samples(samples, cfg.out(AUGMENTED))
    log.info("generated %d samples", len(samples))
    return samples


def stage_filter(cfg, samples=None):
    gold = read_split(cfg, "train")
    corpus = mlm_training_corpus(cfg, gold)
    if samples is None:
        samples = read_samples(cfg, AUGMENTED)
    tagger = train_tagger(gold, cfg["tagger.epochs"], cfg["seed"], corpus.classes)
    report = FilterReport()
    kept = filter_consistent(samples, tagger, cfg["filter.dedup"], corpus, report)
    write_samples(kept, cfg.out(FILTERED))
    with open(cfg.out(REPORT), "w", encoding="utf-8") as fh:
        fh.write(report.render())
    return kept, report


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(cfg, outputs, counts):
    manifest = {
        "config_hash": cfg.digest(),
        "config": cfg.canonical().splitlines(),
        "seed": cfg["seed"],
        "versions": {
            "melm": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "torch": torch.__version__,
        },
        "counts": counts,
        "outputs": {name: sha256_file(cfg.out(name)) for name in outputs},
    }
    with open(cfg.out(MANIFEST), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def run_pipeline(cfg, progress=None) -> Corpus:
    """Code-mix (multilingual), fine-tune, augment, filter, then emit train + kept samples."""
    cfg.validate_paths()
    gold = read_split(cfg, "train")
    outputs = []
    if cfg.multilingual:
        stage_codemix(cfg)
        outputs.append(CODEMIXED)
    train = mlm_training_corpus(cfg, gold)
    model = stage_train_mlm(cfg, progress)
    samples = stage_augment(cfg, model)
    kept, report = stage_filter(cfg, samples)
    result = train + Corpus(s.sentence for s in kept)
    save_conll(result, cfg.out(OUTPUT), language_comments=True)
    # self-check: the emitted corpus must parse back to itself
    if read_output(cfg, OUTPUT) != result:
        raise DataError("pipeline output failed to round-trip")
    outputs += [CHECKPOINT, AUGMENTED, provenance_path(AUGMENTED), FILTERED, provenance_path(FILTERED),
                REPORT, OUTPUT]
    counts = {"gold": len(gold), "train": len(train), "augmented": len(samples), "kept": len(kept),
              "output": len(result)}
    write_manifest(cfg, outputs, counts)
    return result
