"""Token-labeled corpora in CoNLL column format.

Sentences carry BIO tags. IOB1 input (an entity may open with ``I-``) is
normalized to BIO on read. Code-mixed sentences additionally carry a
per-token language attribution, serialized as comment lines::

    # lang = en
    # lang-spans = 0-2:es 5-6:es
    Real B-ORG
    ...
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .errors import ParseError, SizeError
from .rng import derive_rng

DOCSTART = "-DOCSTART-"
MARKER_CHARS = ("⟨", "⟩")

_TAG_RE = re.compile(r"^(?:O|[BI]-[A-Za-z][A-Za-z0-9_]*)$")
_SEP_RE = re.compile(r"[ \t]+")
_LANG_COMMENT = "# lang = "
_SPANS_COMMENT = "# lang-spans = "


def is_valid_tag(tag: str) -> bool:
    return _TAG_RE.match(tag) is not None


def tag_class(tag: str) -> str | None:
    return None if tag == "O" else tag[2:]


def bio_violation(tags) -> int | None:
    """Index of the first tag that breaks BIO, or None."""
    prev = "O"
    for i, tag in enumerate(tags):
        if tag.startswith("I-") and prev[2:] != tag[2:]:
            return i
        prev = tag
    return None


def iob1_to_bio(tags) -> list[str]:
    out = []
    prev = "O"
    for tag in tags:
        if tag.startswith("I-") and prev[2:] != tag[2:]:
            tag = "B-" + tag[2:]
        out.append(tag)
        prev = tag
    return out


class EntitySpan(NamedTuple):
    start: int
    end: int
    cls: str


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[str, ...]
    tags: tuple[str, ...]
    language: str
    # per-token language, only for code-mixed sentences
    token_langs: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "tags", tuple(self.tags))
        if self.token_langs is not None:
            langs = tuple(self.token_langs)
            if all(lang == self.language for lang in langs):
                langs = None
            object.__setattr__(self, "token_langs", langs)
        if len(self.tokens) != len(self.tags):
            raise ValueError(f"{len(self.tokens)} tokens but {len(self.tags)} tags")
        if self.token_langs is not None and len(self.token_langs) != len(self.tokens):
            raise ValueError("token_langs length differs from tokens")
        for tok in self.tokens:
            if not tok or any(c.isspace() for c in tok):
                raise ValueError(f"invalid token {tok!r}")
            if any(c in tok for c in MARKER_CHARS):
                raise ValueError(f"token {tok!r} contains a reserved marker character")
        for tag in self.tags:
            if not is_valid_tag(tag):
                raise ValueError(f"invalid tag {tag!r}")
        bad = bio_violation(self.tags)
        if bad is not None:
            raise ValueError(f"BIO violation at token {bad}: {self.tags[bad]}")

    def __len__(self):
        return len(self.tokens)

    def lang_at(self, i: int) -> str:
        return self.language if self.token_langs is None else self.token_langs[i]

    @property
    def is_code_mixed(self) -> bool:
        return self.token_langs is not None


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...] = ()
    languages: frozenset = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        langs = set()
        for s in self.sentences:
            langs.add(s.language)
            if s.token_langs:
                langs.update(s.token_langs)
        object.__setattr__(self, "languages", frozenset(langs))

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]

    def __add__(self, other: "Corpus") -> "Corpus":
        return Corpus(self.sentences + tuple(other.sentences))

    @property
    def classes(self) -> frozenset:
        return frozenset(t[2:] for s in self.sentences for t in s.tags if t != "O")


def _parse_lang_spans(text, n_line):
    spans = []
    for item in text.split():
        m = re.fullmatch(r"(\d+)-(\d+):(\S+)", item)
        if not m:
            raise ParseError(f"malformed language span {item!r}", n_line)
        spans.append((int(m.group(1)), int(m.group(2)), m.group(3)))
    return spans


def parse_conll(text, language: str, scheme: str = "auto") -> Corpus:
    """Parse two-column CoNLL text.

    ``scheme`` is ``"auto"`` (IOB1 or BIO, normalized to BIO) or ``"bio"``
    (strict: an ``I-`` tag that does not continue an entity is an error).
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    if scheme not in ("auto", "bio"):
        raise ValueError(f"unknown tag scheme {scheme!r}")

    sentences = []
    rows: list[tuple[str, str]] = []
    meta: dict = {}
    first_line = 0

    def flush():
        nonlocal rows, meta
        if rows:
            tokens = [r[0] for r in rows]
            tags = [r[1] for r in rows]
            bad = bio_violation(tags)
            if bad is not None:
                if scheme == "bio":
                    raise ParseError(f"BIO violation: {tags[bad]} at token {bad}", first_line + bad)
                tags = iob1_to_bio(tags)
            lang = meta.get("lang", language)
            token_langs = None
            if "spans" in meta:
                token_langs = [lang] * len(tokens)
                for start, end, span_lang in meta["spans"]:
                    if not 0 <= start < end <= len(tokens):
                        raise ParseError(f"language span {start}-{end} out of range", meta["spans_line"])
                    token_langs[start:end] = [span_lang] * (end - start)
            try:
                sentences.append(Sentence(tokens, tags, lang, token_langs))
            except ValueError as exc:
                raise ParseError(str(exc), first_line) from None
        elif meta:
            raise ParseError("language comment not followed by a sentence", meta.get("line"))
        rows = []
        meta = {}

    for n_line, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush()
            continue
        if line.startswith(_LANG_COMMENT):
            meta.setdefault("line", n_line)
            meta["lang"] = line[len(_LANG_COMMENT):].strip()
            continue
        if line.startswith(_SPANS_COMMENT):
            meta.setdefault("line", n_line)
            meta["spans"] = _parse_lang_spans(line[len(_SPANS_COMMENT):], n_line)
            meta["spans_line"] = n_line
            continue
        if line.startswith(DOCSTART):
            flush()
            continue
        cols = _SEP_RE.split(line.strip())
        if len(cols) != 2:
            raise ParseError(f"expected 2 columns, got {len(cols)}", n_line)
        token, tag = cols
        if not is_valid_tag(tag):
            raise ParseError(f"invalid tag {tag!r}", n_line)
        if any(c in token for c in MARKER_CHARS):
            raise ParseError(f"token {token!r} contains a reserved marker character", n_line)
        if not rows:
            first_line = n_line
        rows.append((token, tag))
    flush()
    return Corpus(sentences)


def _lang_spans(sentence: Sentence) -> str:
    parts = []
    i = 0
    n = len(sentence)
    while i < n:
        lang = sentence.token_langs[i]
        j = i + 1
        while j < n and sentence.token_langs[j] == lang:
            j += 1
        if lang != sentence.language:
            parts.append(f"{i}-{j}:{lang}")
        i = j
    return " ".join(parts)


def write_conll(corpus: Corpus, language_comments: bool | None = None) -> bytes:
    """Serialize to UTF-8 bytes, one ``token tag`` line per token.

    Language comments are written when requested, or by default whenever the
    corpus spans several languages or holds code-mixed sentences.
    """
    if language_comments is None:
        language_comments = len({s.language for s in corpus}) > 1 or any(
            s.is_code_mixed for s in corpus
        )
    lines = []
    for s in corpus:
        if language_comments:
            lines.append(_LANG_COMMENT + s.language)
            if s.is_code_mixed:
                lines.append(_SPANS_COMMENT + _lang_spans(s))
        lines.extend(f"{tok} {tag}" for tok, tag in zip(s.tokens, s.tags))
        lines.append("")
    return "".join(line + "\n" for line in lines).encode("utf-8")


def read_conll(path, language: str, scheme: str = "auto") -> Corpus:
    with open(path, "rb") as fh:
        return parse_conll(fh.read(), language, scheme)


def save_conll(corpus: Corpus, path, language_comments: bool | None = None):
    with open(path, "wb") as fh:
        fh.write(write_conll(corpus, language_comments))


def extract_spans(sentence: Sentence) -> list[EntitySpan]:
    spans = []
    start = None
    for i, tag in enumerate(sentence.tags):
        if start is not None and not tag.startswith("I-"):
            spans.append(EntitySpan(start, i, sentence.tags[start][2:]))
            start = None
        if tag.startswith("B-"):
            start = i
    if start is not None:
        spans.append(EntitySpan(start, len(sentence), sentence.tags[start][2:]))
    return spans


def span_tags(cls: str, length: int) -> list[str]:
    return ["B-" + cls] + ["I-" + cls] * (length - 1)


def spans_to_tags(spans: Iterable[EntitySpan], length: int) -> list[str]:
    tags = ["O"] * length
    for span in spans:
        tags[span.start:span.end] = span_tags(span.cls, span.end - span.start)
    return tags


class EntityIndex:
    """Distinct entity mentions per (language, class).

    Mentions are token tuples, kept sorted so that random choices over them
    are reproducible and independent of corpus order.
    """

    def __init__(self, entries: dict | None = None):
        self._entries: dict[tuple[str, str], tuple[tuple[str, ...], ...]] = {
            key: tuple(sorted(set(map(tuple, mentions)))) for key, mentions in (entries or {}).items()
        }

    def mentions(self, language: str, cls: str) -> tuple[tuple[str, ...], ...]:
        return self._entries.get((language, cls), ())

    def keys(self):
        return sorted(self._entries)

    @property
    def languages(self) -> list[str]:
        return sorted({lang for lang, _ in self._entries})

    def as_dict(self) -> dict:
        return {key: set(v) for key, v in self._entries.items()}

    def __eq__(self, other):
        return isinstance(other, EntityIndex) and self._entries == other._entries

    def __len__(self):
        return sum(len(v) for v in self._entries.values())

    def __repr__(self):
        return f"EntityIndex({len(self._entries)} keys, {len(self)} mentions)"


def build_entity_index(corpora: Iterable[Corpus]) -> EntityIndex:
    entries: dict[tuple[str, str], set] = {}
    for corpus in corpora:
        for s in corpus:
            for span in extract_spans(s):
                key = (s.lang_at(span.start), span.cls)
                entries.setdefault(key, set()).add(s.tokens[span.start:span.end])
    return EntityIndex(entries)


def sample_split(corpus: Corpus, n: int, seed: int) -> Corpus:
    """``n`` sentences drawn uniformly without replacement, in corpus order."""
    if n < 0 or n > len(corpus):
        raise SizeError(f"cannot sample {n} sentences from a corpus of {len(corpus)}")
    rng = derive_rng(seed, "split")
    chosen = sorted(rng.choice(len(corpus), size=n, replace=False).tolist())
    return Corpus(corpus.sentences[i] for i in chosen)
