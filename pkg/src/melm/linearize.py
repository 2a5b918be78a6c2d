"""Label-marker linearization of tagged sentences.

Each entity token is wrapped in its own tag marker, optionally with a
language marker just before the token::

    EU/B-ORG rejects/O  ->  ⟨B-ORG⟩ EU ⟨B-ORG⟩ rejects
    Real/B-ORG (es)     ->  ⟨B-ORG⟩ ⟨Español⟩ Real ⟨B-ORG⟩
"""
from __future__ import annotations

from dataclasses import dataclass

from .corpus import Sentence, is_valid_tag
from .errors import StructureError

LANGUAGE_NAMES = {
    "en": "English",
    "es": "Español",
    "de": "Deutsch",
    "nl": "Nederlands",
    "fr": "Français",
}


def label_marker(tag: str) -> str:
    return f"⟨{tag}⟩"


def language_marker(language: str) -> str:
    return f"⟨{LANGUAGE_NAMES.get(language, language.capitalize())}⟩"


def is_marker(item: str) -> bool:
    return item.startswith("⟨") and item.endswith("⟩")


def marker_tag(item: str) -> str | None:
    """The tag a label marker encodes, or None for language markers and words."""
    if not is_marker(item):
        return None
    inner = item[1:-1]
    if inner != "O" and is_valid_tag(inner):
        return inner
    return None


@dataclass(frozen=True)
class LinearizedSequence:
    items: tuple[str, ...]
    origin: Sentence
    # item index of every surface token of ``origin``, in order
    token_positions: tuple[int, ...]

    def __len__(self):
        return len(self.items)

    @property
    def entity_positions(self) -> tuple[int, ...]:
        """Item indices of entity (non-O) surface tokens."""
        return tuple(
            pos for pos, tag in zip(self.token_positions, self.origin.tags) if tag != "O"
        )

    def entity_span_positions(self) -> list[tuple[int, ...]]:
        """Item indices of entity tokens grouped by entity span."""
        groups: list[list[int]] = []
        for pos, tag in zip(self.token_positions, self.origin.tags):
            if tag.startswith("B-"):
                groups.append([pos])
            elif tag.startswith("I-"):
                groups[-1].append(pos)
        return [tuple(g) for g in groups]

    def token_index(self, item_pos: int) -> int:
        """Sentence token index of a surface-token item."""
        return self.token_positions.index(item_pos)

    def replace(self, substitutions: dict[int, str]) -> "LinearizedSequence":
        items = list(self.items)
        for pos, tok in substitutions.items():
            items[pos] = tok
        return LinearizedSequence(tuple(items), self.origin, self.token_positions)


def linearize(sentence: Sentence, with_language_markers: bool = False) -> LinearizedSequence:
    items: list[str] = []
    positions = []
    for i, (tok, tag) in enumerate(zip(sentence.tokens, sentence.tags)):
        if tag == "O":
            positions.append(len(items))
            items.append(tok)
            continue
        marker = label_marker(tag)
        items.append(marker)
        if with_language_markers:
            items.append(language_marker(sentence.lang_at(i)))
        positions.append(len(items))
        items.extend((tok, marker))
    return LinearizedSequence(tuple(items), sentence, tuple(positions))


def delinearize(seq: LinearizedSequence) -> Sentence:
    """Strip markers and rebuild tags from them.

    Raises StructureError when a label marker is not closed by the same marker
    right after a single surface token, or when the rebuilt tags are not BIO.
    """
    tokens: list[str] = []
    tags: list[str] = []
    items = seq.items
    i = 0
    while i < len(items):
        item = items[i]
        tag = marker_tag(item)
        if tag is None:
            if is_marker(item):
                raise StructureError(f"stray language marker {item} at {i}")
            tokens.append(item)
            tags.append("O")
            i += 1
            continue
        j = i + 1
        if j < len(items) and is_marker(items[j]) and marker_tag(items[j]) is None:
            j += 1
        if j + 1 >= len(items) or is_marker(items[j]) or items[j + 1] != item:
            raise StructureError(f"unmatched marker {item} at {i}")
        tokens.append(items[j])
        tags.append(tag)
        i = j + 2
    token_langs = seq.origin.token_langs
    if token_langs is not None and len(token_langs) != len(tokens):
        token_langs = None
    try:
        return Sentence(tokens, tags, seq.origin.language, token_langs)
    except ValueError as exc:
        raise StructureError(str(exc)) from None
