"""Cross-lingual entity substitution (code-mixing) and label-wise substitution."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, EntityIndex, Sentence, extract_spans, span_tags
from .errors import DataError, FormatError, SubstitutionError
from .rng import derive_rng

log = logging.getLogger(__name__)


class EmbeddingTable:
    """Word vectors in one aligned space (e.g. an en-es pair)."""

    def __init__(self, vectors: dict[str, np.ndarray], dim: int, pair: tuple[str, str] | None = None):
        self.vectors = vectors
        self.dim = dim
        self.pair = pair

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, word):
        return self.get(word) is not None

    def get(self, word: str) -> np.ndarray | None:
        vec = self.vectors.get(word)
        if vec is None:
            vec = self.vectors.get(word.lower())
        return vec


def load_embeddings(stream, pair=None) -> EmbeddingTable:
    """Read text-format vectors: ``word v1 ... vd`` per line, optional ``count dim`` header."""
    if isinstance(stream, (bytes, str)):
        lines = (stream.decode("utf-8") if isinstance(stream, bytes) else stream).splitlines()
    else:
        lines = (line.decode("utf-8") if isinstance(line, bytes) else line for line in stream)
    vectors: dict[str, np.ndarray] = {}
    dim = None
    for n, line in enumerate(lines, start=1):
        parts = line.rstrip("\r\n").split(" ")
        parts = [p for p in parts if p]
        if not parts:
            continue
        if n == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
            dim = int(parts[1])
            continue
        word, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
        if len(values) != dim or dim == 0:
            raise FormatError(f"expected {dim} components, got {len(values)}", n)
        try:
            vec = np.array([float(v) for v in values])
        except ValueError:
            raise FormatError(f"non-numeric component for {word!r}", n) from None
        vectors.setdefault(word, vec)
    return EmbeddingTable(vectors, dim or 0, pair)


def read_embeddings(path, pair=None) -> EmbeddingTable:
    with open(path, "rb") as fh:
        return load_embeddings(fh.read(), pair)


def entity_embedding(entity, table: EmbeddingTable) -> np.ndarray | None:
    """Mean vector of the entity's tokens found in the table."""
    vecs = [v for v in (table.get(tok) for tok in entity) if v is not None]
    if not vecs:
        return None
    return np.mean(vecs, axis=0)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def ess_lookup(query, src_lang: str, tgt_lang: str, cls: str, index: EntityIndex,
               table: EmbeddingTable, rng: np.random.Generator | None = None) -> tuple[str, ...]:
    """Target-language mention of ``cls`` whose mean embedding is closest to the query's.

    Ties go to the lexicographically smallest mention (token tuples compared
    in order). Without usable embeddings the choice is uniform at random.
    """
    candidates = index.mentions(tgt_lang, cls)
    if not candidates:
        raise SubstitutionError(f"no {cls} mentions for language {tgt_lang}")
    q = entity_embedding(query, table)
    best, best_score = None, -np.inf
    if q is not None:
        for cand in candidates:
            vec = entity_embedding(cand, table)
            if vec is None:
                continue
            score = cosine(q, vec)
            if score > best_score:
                best, best_score = cand, score
    if best is None:
        rng = rng if rng is not None else derive_rng(0, "ess-fallback")
        best = candidates[int(rng.integers(len(candidates)))]
    return best


@dataclass(frozen=True)
class CodeMixConfig:
    strategy: str = "ess"  # or "random"
    substitution_prob: float = 1.0

    def __post_init__(self):
        if self.strategy not in ("ess", "random"):
            raise ValueError(f"unknown code-mix strategy {self.strategy!r}")
        if not 0 <= self.substitution_prob <= 1:
            raise ValueError("substitution_prob must be in [0, 1]")


def table_for(tables: dict, src: str, tgt: str) -> EmbeddingTable | None:
    return tables.get((src, tgt)) or tables.get((tgt, src))


def _rebuild(sentence: Sentence, replacements) -> Sentence:
    """Apply (span, new tokens, new language) replacements, right to left."""
    tokens = list(sentence.tokens)
    tags = list(sentence.tags)
    langs = [sentence.lang_at(i) for i in range(len(tokens))]
    for span, new_tokens, lang in sorted(replacements, key=lambda r: r[0].start, reverse=True):
        tokens[span.start:span.end] = new_tokens
        tags[span.start:span.end] = span_tags(span.cls, len(new_tokens))
        langs[span.start:span.end] = [lang] * len(new_tokens)
    return Sentence(tokens, tags, sentence.language, langs)


def codemix_sentence(sentence: Sentence, languages, config: CodeMixConfig, index: EntityIndex,
                     tables: dict, rng: np.random.Generator) -> Sentence | None:
    replacements = []
    for span in extract_spans(sentence):
        if rng.random() >= config.substitution_prob:
            continue
        src = sentence.lang_at(span.start)
        targets = [lang for lang in languages if lang != src]
        tgt = targets[int(rng.integers(len(targets)))]
        mention = sentence.tokens[span.start:span.end]
        try:
            if config.strategy == "ess":
                table = table_for(tables, src, tgt)
                if table is None:
                    raise SubstitutionError(f"no embedding table for {src}-{tgt}")
                new = ess_lookup(mention, src, tgt, span.cls, index, table, rng)
            else:
                cands = index.mentions(tgt, span.cls)
                if not cands:
                    raise SubstitutionError(f"no {span.cls} mentions for language {tgt}")
                new = cands[int(rng.integers(len(cands)))]
        except SubstitutionError as exc:
            log.info("entity %s left unchanged: %s", " ".join(mention), exc)
            continue
        replacements.append((span, new, tgt))
    if not replacements:
        return None
    return _rebuild(sentence, replacements)


def codemix_corpus(corpora, config: CodeMixConfig, index: EntityIndex, tables: dict,
                   seed: int = 0) -> Corpus:
    """Code-mixed copies of every sentence that had at least one entity replaced.

    ``corpora`` maps language to Corpus (or is a single multilingual Corpus).
    Each substituted entity draws its target language uniformly from the
    other languages.
    """
    if isinstance(corpora, Corpus):
        sentences = list(corpora)
    else:
        sentences = [s for lang in sorted(corpora) for s in corpora[lang]]
    languages = sorted({s.language for s in sentences})
    if len(languages) < 2:
        raise DataError(f"code-mixing needs at least 2 languages, got {languages}")
    out = []
    for i, sentence in enumerate(sentences):
        rng = derive_rng(seed, "codemix", i)
        mixed = codemix_sentence(sentence, languages, config, index, tables, rng)
        if mixed is not None:
            out.append(mixed)
    return Corpus(out)


def labelwise_substitute(corpus: Corpus, index: EntityIndex, seed: int = 0) -> Corpus:
    """Replace every entity with a random same-language, same-class mention."""
    out = []
    for i, sentence in enumerate(corpus):
        rng = derive_rng(seed, "labelwise", i)
        replacements = []
        for span in extract_spans(sentence):
            lang = sentence.lang_at(span.start)
            cands = index.mentions(lang, span.cls)
            if not cands:
                continue
            replacements.append((span, cands[int(rng.integers(len(cands)))], lang))
        out.append(_rebuild(sentence, replacements) if replacements else sentence)
    return Corpus(out)
