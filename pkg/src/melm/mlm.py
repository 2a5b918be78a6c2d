"""Masked language model backends.

Two implementations of one contract, ``predict(plan) -> list of distributions``:

* :class:`TinyMlm`, a small transformer encoder trained from scratch on
  entity-masked linearized sentences;
* :class:`StubBackend`, a lookup table keyed by the masked token's
  surroundings, for tests and demonstrations.
"""
from __future__ import annotations

import io
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Protocol, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .corpus import Corpus, extract_spans
from .errors import CheckpointError, LengthError, TrainingError
from .linearize import label_marker, language_marker, linearize
from .masking import MaskPlan, finetune_mask
from .rng import derive_rng, derive_seed

log = logging.getLogger(__name__)

UNK, MASK, PAD = "⟨unk⟩", "⟨mask⟩", "⟨pad⟩"
SPECIALS = (UNK, MASK, PAD)

DEFAULT_LABEL_WORDS = {
    "PER": "person",
    "ORG": "organization",
    "LOC": "location",
    "MISC": "miscellaneous",
}

CHECKPOINT_FORMAT = "melm-tinymlm"
CHECKPOINT_VERSION = 1


class Vocabulary:
    """Dense id <-> token mapping. Specials come first, then markers, then words."""

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tokens[: len(SPECIALS)] != list(SPECIALS):
            raise ValueError("vocabulary must start with the special tokens")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.tokens = tokens
        self.index = {tok: i for i, tok in enumerate(tokens)}
        self.unk_id, self.mask_id, self.pad_id = range(3)
        self.forbidden_ids = frozenset(
            i for i, tok in enumerate(tokens) if tok in SPECIALS or tok.startswith("⟨")
        )

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def id(self, token: str) -> int:
        return self.index.get(token, self.unk_id)

    def token(self, idx: int) -> str:
        return self.tokens[idx]

    def encode_plan(self, plan: MaskPlan) -> list[int]:
        ids = [self.id(item) for item in plan.base.items]
        for pos in plan.masked_positions:
            ids[pos] = self.mask_id
        return ids


def required_markers(classes, languages=()) -> list[str]:
    markers = [label_marker(p + c) for c in sorted(classes) for p in ("B-", "I-")]
    markers += [language_marker(lang) for lang in sorted(languages)]
    return markers


def build_vocab(
    corpus: Corpus,
    min_freq: int = 1,
    classes=(),
    languages=(),
    extra_tokens=(),
) -> Vocabulary:
    """Words seen at least ``min_freq`` times plus every marker and special.

    Markers cover the corpus's classes and languages and any declared in
    ``classes``/``languages``. ``extra_tokens`` are always included.
    """
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    counts = Counter(tok for s in corpus for tok in s.tokens)
    words = {tok for tok, c in counts.items() if c >= min_freq} | set(extra_tokens)
    markers = required_markers(set(corpus.classes) | set(classes), set(corpus.languages) | set(languages))
    return Vocabulary(list(SPECIALS) + markers + sorted(words - set(markers) - set(SPECIALS)))


class MlmBackend(Protocol):
    vocab: Vocabulary

    def predict(self, plan: MaskPlan) -> list[np.ndarray]:
        ...


def predict(backend: MlmBackend, plan: MaskPlan) -> list[np.ndarray]:
    """One distribution over ``backend.vocab`` per masked position, in position order."""
    return backend.predict(plan)


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 64
    layers: int = 2
    heads: int = 4
    ff_mult: int = 4
    max_len: int = 128

    def __post_init__(self):
        if self.dim % self.heads:
            raise ValueError("dim must be divisible by heads")


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 16
    lr: float = 1e-2
    momentum: float = 0.9
    eta: float = 0.7
    with_language_markers: bool = False


class _Block(nn.Module):
    def __init__(self, dim, heads, ff_mult):
        super().__init__()
        self.heads = heads
        self.ln1 = nn.LayerNorm(dim)
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.ln2 = nn.LayerNorm(dim)
        self.ff1 = nn.Linear(dim, ff_mult * dim)
        self.ff2 = nn.Linear(ff_mult * dim, dim)

    def forward(self, x, pad_mask):
        b, t, d = x.shape
        h = self.heads
        q, k, v = self.qkv(self.ln1(x)).split(d, dim=-1)
        q, k, v = (z.view(b, t, h, d // h).transpose(1, 2) for z in (q, k, v))
        scores = q @ k.transpose(-1, -2) / math.sqrt(d // h)
        scores = scores.masked_fill(pad_mask[:, None, None, :], float("-inf"))
        att = scores.softmax(dim=-1) @ v
        x = x + self.proj(att.transpose(1, 2).reshape(b, t, d))
        # tanh GELU keeps the network smooth for finite-difference checks
        x = x + self.ff2(F.gelu(self.ff1(self.ln2(x)), approximate="tanh"))
        return x


class TinyMlm(nn.Module):
    """Pre-norm transformer encoder with tied input/output embeddings."""

    def __init__(self, vocab: Vocabulary, config: ModelConfig = ModelConfig(), seed: int = 0):
        super().__init__()
        self.vocab = vocab
        self.config = config
        self.tok_emb = nn.Embedding(len(vocab), config.dim)
        self.pos_emb = nn.Embedding(config.max_len, config.dim)
        self.blocks = nn.ModuleList(
            _Block(config.dim, config.heads, config.ff_mult) for _ in range(config.layers)
        )
        self.ln_out = nn.LayerNorm(config.dim)
        self.out_bias = nn.Parameter(torch.zeros(len(vocab)))
        self.loss_history: list[float] = []
        self.steps = 0
        self._init_weights(seed)

    def _init_weights(self, seed):
        gen = torch.Generator().manual_seed(seed)
        std = self.config.dim ** -0.5
        # nn.Linear draws biases from the global torch RNG; overwrite everything
        with torch.no_grad():
            for name, p in self.named_parameters():
                if p.dim() > 1:
                    p.copy_(torch.randn(p.shape, generator=gen) * std)
                elif ".ln" in name or name.startswith("ln"):
                    p.fill_(1.0 if name.endswith("weight") else 0.0)
                else:
                    p.zero_()

    def forward(self, ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        t = ids.shape[1]
        x = self.tok_emb(ids) + self.pos_emb(torch.arange(t))[None]
        for block in self.blocks:
            x = block(x, pad_mask)
        return self.ln_out(x) @ self.tok_emb.weight.T + self.out_bias

    def batch(self, plans: Sequence[MaskPlan]):
        """Padded input ids, padding mask and targets (-100 where unmasked)."""
        width = max(len(p.base) for p in plans)
        if width > self.config.max_len:
            raise LengthError(f"sequence of {width} items exceeds max length {self.config.max_len}")
        ids = torch.full((len(plans), width), self.vocab.pad_id, dtype=torch.long)
        targets = torch.full((len(plans), width), -100, dtype=torch.long)
        for row, plan in enumerate(plans):
            enc = self.vocab.encode_plan(plan)
            ids[row, : len(enc)] = torch.tensor(enc)
            for pos in plan.masked_positions:
                targets[row, pos] = self.vocab.id(plan.targets[pos])
        return ids, ids == self.vocab.pad_id, targets

    def loss(self, plans: Sequence[MaskPlan]) -> torch.Tensor:
        ids, pad_mask, targets = self.batch(plans)
        return masked_nll(self(ids, pad_mask), targets)

    @torch.no_grad()
    def predict(self, plan: MaskPlan) -> list[np.ndarray]:
        ids, pad_mask, _ = self.batch([plan])
        logits = self(ids, pad_mask)[0].double()
        probs = logits.softmax(dim=-1)
        return [probs[pos].numpy().copy() for pos in plan.masked_positions]


def masked_nll(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean negative log-likelihood over masked positions (targets != -100)."""
    return F.cross_entropy(logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), ignore_index=-100)


def init_label_embeddings(model: TinyMlm, vocab: Vocabulary, label_word_map=None) -> TinyMlm:
    """Copy the embedding of a label's natural word onto its markers.

    ``label_word_map`` maps a class (``ORG``) or a full tag (``B-ORG``) to a
    word. Markers whose word is missing from the vocabulary are left alone.
    """
    label_word_map = DEFAULT_LABEL_WORDS if label_word_map is None else label_word_map
    with torch.no_grad():
        for tok in vocab.tokens:
            if not tok.startswith("⟨") or tok in SPECIALS:
                continue
            tag = tok[1:-1]
            word = label_word_map.get(tag) or label_word_map.get(tag[2:])
            if word is not None and word in vocab:
                model.tok_emb.weight[vocab.index[tok]] = model.tok_emb.weight[vocab.index[word]]
    return model


def training_sequences(corpus: Corpus, with_language_markers: bool, max_len: int):
    seqs = []
    for s in corpus:
        if not extract_spans(s):
            continue
        seq = linearize(s, with_language_markers)
        if len(seq) > max_len:
            log.warning("skipping sentence of %d items (max length %d)", len(seq), max_len)
            continue
        seqs.append(seq)
    return seqs


def finetune(model: TinyMlm, corpus: Corpus, config: TrainConfig = TrainConfig(), seed: int = 0,
             progress=None) -> TinyMlm:
    """Train on entity-masked linearized sentences; masks are re-drawn every epoch."""
    seqs = training_sequences(corpus, config.with_language_markers, model.config.max_len)
    if not seqs:
        raise TrainingError("corpus has no trainable sentence with an entity token")
    opt = torch.optim.SGD(model.parameters(), lr=config.lr, momentum=config.momentum)
    model.train()
    for epoch in range(config.epochs):
        order = derive_rng(seed, "finetune-order", epoch).permutation(len(seqs))
        plans = [finetune_mask(seqs[i], config.eta, derive_rng(seed, "finetune-mask", epoch, int(i)))
                 for i in order]
        total, count = 0.0, 0
        for start in range(0, len(plans), config.batch_size):
            batch = plans[start:start + config.batch_size]
            loss = model.loss(batch)
            opt.zero_grad()
            loss.backward()
            opt.step()
            model.steps += 1
            n = sum(len(p.masked_positions) for p in batch)
            total += loss.item() * n
            count += n
        model.loss_history.append(total / count)
        if progress is not None:
            progress(epoch, model.loss_history[-1])
    model.eval()
    return model


def new_model(corpus: Corpus, model_config: ModelConfig = ModelConfig(), min_freq: int = 1,
              seed: int = 0, label_word_map=None, classes=(), languages=()) -> TinyMlm:
    """Vocabulary + randomly initialized model with label markers seeded from label words."""
    label_word_map = DEFAULT_LABEL_WORDS if label_word_map is None else label_word_map
    vocab = build_vocab(corpus, min_freq, classes, languages, extra_tokens=set(label_word_map.values()))
    model = TinyMlm(vocab, model_config, derive_seed(seed, "init"))
    return init_label_embeddings(model, vocab, label_word_map)


def save_checkpoint(model: TinyMlm, path):
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "vocab": list(model.vocab.tokens),
        "config": asdict(model.config),
        "loss_history": list(model.loss_history),
        "steps": model.steps,
        "state_dict": model.state_dict(),
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> TinyMlm:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a model checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('version')}")
    model = TinyMlm(Vocabulary(payload["vocab"]), ModelConfig(**payload["config"]))
    model.load_state_dict(payload["state_dict"])
    model.loss_history = list(payload["loss_history"])
    model.steps = payload["steps"]
    model.eval()
    return model


def check_compatible(vocab: Vocabulary, corpus: Corpus, with_language_markers: bool):
    """Raise CheckpointError if the vocabulary lacks markers the corpus needs."""
    needed = required_markers(corpus.classes, corpus.languages if with_language_markers else ())
    missing = [m for m in needed if m not in vocab]
    if missing:
        raise CheckpointError(f"checkpoint vocabulary lacks markers: {' '.join(missing)}")


def _neighbors(plan: MaskPlan, pos: int):
    seq = plan.base
    i = seq.token_index(pos)
    tokens = seq.origin.tokens
    left = tokens[i - 1] if i > 0 else None
    right = tokens[i + 1] if i + 1 < len(tokens) else None
    return left, right, seq.items[pos - 1]


@dataclass
class StubBackend:
    """Deterministic backend answering from a table.

    Keys are ``(left word, right word, opening marker)`` for the masked token,
    with None at sentence edges. Values map words to weights and are
    normalized over the vocabulary. Unknown keys get a uniform distribution.
    """

    vocab: Vocabulary
    table: dict = field(default_factory=dict)

    def __post_init__(self):
        self._dists = {}
        for key, weights in self.table.items():
            dist = np.zeros(len(self.vocab))
            for tok, w in weights.items():
                if tok not in self.vocab:
                    raise ValueError(f"stub token {tok!r} not in vocabulary")
                dist[self.vocab.index[tok]] = w
            if dist.sum() <= 0 or (dist < 0).any():
                raise ValueError(f"bad weights for stub key {key}")
            self._dists[key] = dist / dist.sum()
        self._uniform = np.full(len(self.vocab), 1.0 / len(self.vocab))

    def predict(self, plan: MaskPlan) -> list[np.ndarray]:
        return [self._dists.get(_neighbors(plan, pos), self._uniform).copy()
                for pos in plan.masked_positions]
