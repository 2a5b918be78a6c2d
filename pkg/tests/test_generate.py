import random
from collections import Counter

import numpy as np
import pytest

from melm.corpus import Corpus, Sentence
from melm.errors import GenerationError
from melm.generate import (
    attach_provenance,
    augment,
    format_provenance,
    top_k_candidates,
    top_k_sample,
)
from melm.masking import MaskingConfig
from melm.mlm import StubBackend, build_vocab

from conftest import random_sentence, sentence_of
from test_mlm import REJECTS_TOP5, rejects_stub


def test_k1_is_argmax():
    dist = np.array([0.1, 0.5, 0.4])
    rng = np.random.default_rng(0)
    assert {top_k_sample(dist, 1, frozenset(), rng) for _ in range(50)} == {1}


def test_ties_broken_by_lower_id():
    dist = np.array([0.2, 0.3, 0.3, 0.2])
    assert top_k_candidates(dist, 1).tolist() == [1]
    assert top_k_candidates(dist, 3).tolist() == [1, 2, 0]


def test_forbidden_tokens_fall_through():
    dist = np.array([0.4, 0.3, 0.2, 0.06, 0.04])
    cands = top_k_candidates(dist, len(dist), frozenset({0, 1, 2}))
    assert cands.tolist() == [3, 4]
    rng = np.random.default_rng(0)
    assert {top_k_sample(dist, 5, frozenset({0, 1, 2}), rng) for _ in range(200)} == {3, 4}
    with pytest.raises(GenerationError):
        top_k_candidates(dist, 2, frozenset(range(5)))


def test_rejects_top5_uniform(rejects):
    stub = rejects_stub(rejects)
    from melm.linearize import linearize
    from melm.masking import MaskPlan
    dist = stub.predict(MaskPlan.of(linearize(rejects), [1]))[0]
    rng = np.random.default_rng(0)
    draws = 100_000
    counts = Counter(stub.vocab.token(top_k_sample(dist, 5, stub.vocab.forbidden_ids, rng)) for _ in range(draws))
    assert set(counts) == set(REJECTS_TOP5)
    for tok in REJECTS_TOP5:
        assert abs(counts[tok] / draws - 0.2) < 0.01


def test_renormalized_sampling_follows_probabilities():
    dist = np.array([0.5, 0.3, 0.2])
    rng = np.random.default_rng(1)
    counts = Counter(top_k_sample(dist, 2, frozenset(), rng, renormalize=True) for _ in range(20_000))
    assert abs(counts[0] / 20_000 - 0.625) < 0.015
    assert 2 not in counts


def stub_for(corpus):
    return StubBackend(build_vocab(corpus))


def test_entity_free_corpus_gives_nothing():
    corpus = Corpus([sentence_of([("a", "O"), ("b", "O")])])
    assert augment(corpus, stub_for(corpus)) == []


def test_rounds_times_eligible():
    rng = random.Random(0)
    sents = []
    while len(sents) < 100:
        s = random_sentence(rng)
        if any(t != "O" for t in s.tags):
            sents.append(s)
    corpus = Corpus(sents)
    samples = augment(corpus, stub_for(corpus), MaskingConfig(), seed=0)
    assert len(samples) == 300


def test_alignment_and_provenance():
    rng = random.Random(1)
    corpus = Corpus(random_sentence(rng, languages=["en", "es"]) for _ in range(60))
    stub = stub_for(corpus)
    for multilingual in (False, True):
        samples = augment(corpus, stub, MaskingConfig(k=5), seed=3, multilingual=multilingual)
        assert samples
        for s in samples:
            src = corpus[s.source_id]
            assert s.sentence.tags == src.tags
            assert len(s.sentence) == len(src)
            changed = {i for i, (a, b) in enumerate(zip(s.sentence.tokens, src.tokens)) if a != b}
            assert changed <= set(s.positions)
            assert all(src.tags[i] != "O" for i in s.positions)
            assert tuple(s.sentence.tokens[i] for i in s.positions) == s.tokens
            assert not any(t.startswith("⟨") for t in s.tokens)


def test_chosen_tokens_in_top_k(rejects):
    stub = rejects_stub(rejects)
    corpus = Corpus([rejects])
    samples = augment(corpus, stub, MaskingConfig(rounds=50), seed=0)
    firsts = {s.sentence.tokens[0] for s in samples if 0 in s.positions}
    assert firsts and firsts <= set(REJECTS_TOP5)


def test_deterministic_across_runs_and_workers():
    rng = random.Random(2)
    corpus = Corpus(random_sentence(rng) for _ in range(80))
    stub = stub_for(corpus)
    a = augment(corpus, stub, seed=7)
    b = augment(corpus, stub, seed=7)
    c = augment(corpus, stub, seed=7, workers=4)
    assert format_provenance(a) == format_provenance(b) == format_provenance(c)
    assert a == b == c
    assert augment(corpus, stub, seed=8) != a


def test_long_sentences_are_skipped(caplog):
    from melm.mlm import ModelConfig, TinyMlm
    long = Sentence([f"w{i}" for i in range(40)], ["B-PER"] + ["O"] * 39, "en")
    short = sentence_of([("EU", "B-ORG")])
    corpus = Corpus([long, short])
    model = TinyMlm(build_vocab(corpus), ModelConfig(dim=8, heads=2, layers=1, max_len=16))
    samples = augment(corpus, model, MaskingConfig(rounds=2), seed=0)
    assert {s.source_id for s in samples} == {1}
    assert "skipping sentence 0" in caplog.text


def test_provenance_round_trip():
    rng = random.Random(3)
    corpus = Corpus(random_sentence(rng) for _ in range(20))
    samples = augment(corpus, stub_for(corpus), seed=1)
    text = format_provenance(samples)
    rebuilt = attach_provenance(Corpus(s.sentence for s in samples), text)
    assert rebuilt == samples
