import random

import pytest
from hypothesis import given, settings, strategies as st

from melm.corpus import Sentence
from melm.errors import StructureError
from melm.linearize import LinearizedSequence, delinearize, is_marker, linearize, marker_tag

from conftest import random_sentence, sentence_of


def test_label_markers_wrap_entity_tokens():
    seq = linearize(sentence_of([("EU", "B-ORG"), ("rejects", "O")]))
    assert seq.items == ("⟨B-ORG⟩", "EU", "⟨B-ORG⟩", "rejects")


def test_all_o_is_identity():
    s = sentence_of([("a", "O"), ("b", "O")])
    assert linearize(s).items == s.tokens
    assert linearize(s, with_language_markers=True).items == s.tokens


def test_language_marker_after_opening_label():
    s = Sentence(["Real", "Madrid", "gana"], ["B-ORG", "I-ORG", "O"], "es")
    assert linearize(s, True).items == (
        "⟨B-ORG⟩", "⟨Español⟩", "Real", "⟨B-ORG⟩",
        "⟨I-ORG⟩", "⟨Español⟩", "Madrid", "⟨I-ORG⟩",
        "gana",
    )


def test_code_mixed_tokens_get_their_own_language():
    s = Sentence(["Real", "beat", "Acme"], ["B-ORG", "O", "B-ORG"], "en", ["es", "en", "en"])
    items = linearize(s, True).items
    assert items[1] == "⟨Español⟩" and items[6] == "⟨English⟩"


def test_marker_helpers():
    assert marker_tag("⟨B-ORG⟩") == "B-ORG"
    assert marker_tag("⟨Español⟩") is None
    assert marker_tag("EU") is None
    assert is_marker("⟨Español⟩")


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10**9), st.booleans())
def test_round_trip_and_marker_count(seed, lang_markers):
    rng = random.Random(seed)
    s = random_sentence(rng, max_len=15, languages=["en", "es", "de"] if lang_markers else None)
    seq = linearize(s, lang_markers)
    assert delinearize(seq) == s
    n_entity = sum(t != "O" for t in s.tags)
    assert sum(marker_tag(i) is not None for i in seq.items) == 2 * n_entity
    assert [seq.items[p] for p in seq.token_positions] == list(s.tokens)
    for pos, tag in zip(seq.token_positions, s.tags):
        if tag != "O":
            assert seq.items[pos + 1] == f"⟨{tag}⟩"
            opener = seq.items[pos - 2] if lang_markers else seq.items[pos - 1]
            assert opener == f"⟨{tag}⟩"


def test_marker_free_sequence_is_all_o():
    s = sentence_of([("a", "O"), ("b", "O")])
    seq = LinearizedSequence(("x", "y", "z"), s, (0, 1, 2))
    assert delinearize(seq).tags == ("O", "O", "O")


def test_substitution_changes_only_that_token(rejects):
    seq = linearize(rejects)
    pos = seq.entity_positions[0]
    out = delinearize(seq.replace({pos: "Greenpeace"}))
    assert out.tags == rejects.tags
    assert out.tokens == ("Greenpeace",) + rejects.tokens[1:]


@pytest.mark.parametrize("items", [
    ("⟨B-ORG⟩", "EU"),
    ("⟨B-ORG⟩", "EU", "⟨I-ORG⟩"),
    ("⟨B-ORG⟩", "⟨B-ORG⟩"),
    ("⟨Español⟩", "EU"),
    ("⟨I-ORG⟩", "EU", "⟨I-ORG⟩"),
])
def test_malformed_sequences_raise(items, rejects):
    with pytest.raises(StructureError):
        delinearize(LinearizedSequence(items, rejects, ()))
