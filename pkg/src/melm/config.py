"""Flat ``key = value`` pipeline configuration.

Lines starting with ``#`` are comments. Relative paths resolve against the
config file's directory. Recognized keys::

    mode                 monolingual | multilingual
    seed                 master seed
    output_dir           where every stage writes
    train.<lang>         gold training corpus (CoNLL)
    dev.<lang>           optional dev corpus
    test.<lang>          optional test corpus, used by ``eval``
    oracle.<lang>        optional trusted corpus for the entity-count oracle
    embeddings.<s>-<t>   aligned word vectors for a language pair
    eta mu rounds top_k  masking and sampling
    sampling             uniform | renormalized
    mlm.*                model and training hyperparameters
    codemix.strategy     ess | random
    codemix.substitution_prob
    tagger.epochs  filter.dedup  eval.seeds  workers  torch_threads
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

from .codemix import CodeMixConfig
from .errors import ConfigError, MissingFileError
from .masking import MaskingConfig
from .mlm import ModelConfig, TrainConfig

SCALARS = {
    "mode": ("monolingual", str),
    "seed": (0, int),
    "output_dir": ("out", str),
    "eta": (0.7, float),
    "mu": (0.5, float),
    "rounds": (3, int),
    "top_k": (5, int),
    "sampling": ("uniform", str),
    "mlm.epochs": (200, int),
    "mlm.batch_size": (16, int),
    "mlm.lr": (1e-2, float),
    "mlm.momentum": (0.9, float),
    "mlm.dim": (64, int),
    "mlm.layers": (2, int),
    "mlm.heads": (4, int),
    "mlm.ff_mult": (4, int),
    "mlm.max_len": (128, int),
    "mlm.min_freq": (1, int),
    "codemix.strategy": ("ess", str),
    "codemix.substitution_prob": (1.0, float),
    "tagger.epochs": (10, int),
    "filter.dedup": (True, bool),
    "eval.seeds": ("0 1 2", str),
    "workers": (1, int),
    "torch_threads": (1, int),
}
PATH_PREFIXES = ("train", "dev", "test", "oracle", "embeddings")
CHOICES = {"mode": ("monolingual", "multilingual"), "sampling": ("uniform", "renormalized"),
           "codemix.strategy": ("ess", "random")}


def _convert(key, raw, kind):
    try:
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None


@dataclass
class PipelineConfig:
    values: dict = field(default_factory=lambda: {k: v for k, (v, _) in SCALARS.items()})
    paths: dict = field(default_factory=dict)  # "train.en" -> absolute path
    base_dir: str = "."

    def set(self, key: str, raw: str):
        key = key.strip()
        raw = raw.strip()
        prefix = key.split(".", 1)[0]
        if key in SCALARS:
            value = _convert(key, raw, SCALARS[key][1])
            if key in CHOICES and value not in CHOICES[key]:
                raise ConfigError(f"{key} must be one of {', '.join(CHOICES[key])}, got {value!r}")
            self.values[key] = value
        elif prefix in PATH_PREFIXES and "." in key and key.split(".", 1)[1]:
            if prefix == "embeddings" and len(key.split(".", 1)[1].split("-")) != 2:
                raise ConfigError(f"{key}: expected embeddings.<src>-<tgt>")
            self.paths[key] = raw if os.path.isabs(raw) else os.path.normpath(os.path.join(self.base_dir, raw))
        else:
            raise ConfigError(f"unknown configuration key {key!r}")

    @classmethod
    def parse(cls, text: str, base_dir: str = ".", overrides=()) -> "PipelineConfig":
        cfg = cls(base_dir=base_dir)
        for n, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"config line {n}: expected 'key = value'")
            key, raw = line.split("=", 1)
            cfg.set(key, raw)
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r}: expected key=value")
            key, raw = item.split("=", 1)
            cfg.set(key, raw)
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path, overrides=()) -> "PipelineConfig":
        if not os.path.exists(path):
            raise MissingFileError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read(), os.path.dirname(os.path.abspath(path)), overrides)

    def check(self):
        try:
            self.masking
            self.model
            self.codemix
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.seeds

    def __getitem__(self, key):
        return self.values[key]

    @property
    def output_dir(self) -> str:
        out = self.values["output_dir"]
        return out if os.path.isabs(out) else os.path.normpath(os.path.join(self.base_dir, out))

    def out(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    @property
    def multilingual(self) -> bool:
        return self.values["mode"] == "multilingual"

    def corpora_paths(self, split: str) -> dict[str, str]:
        return {k.split(".", 1)[1]: p for k, p in sorted(self.paths.items()) if k.startswith(split + ".")}

    def embedding_paths(self) -> dict[tuple[str, str], str]:
        return {tuple(lang.split("-")): p for lang, p in self.corpora_paths("embeddings").items()}

    @property
    def masking(self) -> MaskingConfig:
        v = self.values
        return MaskingConfig(v["eta"], v["mu"], v["top_k"], v["rounds"])

    @property
    def model(self) -> ModelConfig:
        v = self.values
        return ModelConfig(v["mlm.dim"], v["mlm.layers"], v["mlm.heads"], v["mlm.ff_mult"], v["mlm.max_len"])

    @property
    def training(self) -> TrainConfig:
        v = self.values
        return TrainConfig(v["mlm.epochs"], v["mlm.batch_size"], v["mlm.lr"], v["mlm.momentum"], v["eta"],
                           self.multilingual)

    @property
    def codemix(self) -> CodeMixConfig:
        return CodeMixConfig(self.values["codemix.strategy"], self.values["codemix.substitution_prob"])

    @property
    def seeds(self) -> list[int]:
        try:
            return [int(s) for s in self.values["eval.seeds"].replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"eval.seeds: expected integers, got {self.values['eval.seeds']!r}") from None

    def validate_paths(self):
        """Fail before any work if an input file is missing or training data is absent."""
        if not self.corpora_paths("train"):
            raise ConfigError("no train.<lang> corpus configured")
        for key, path in sorted(self.paths.items()):
            if not os.path.isfile(path):
                raise MissingFileError(f"{key}: file not found: {path}")

    def canonical(self) -> str:
        lines = [f"{k} = {self.values[k]}" for k in sorted(self.values)]
        lines += [f"{k} = {os.path.relpath(p, self.base_dir)}" for k, p in sorted(self.paths.items())]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()
