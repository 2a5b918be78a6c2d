import random

import pytest

from melm.corpus import Corpus, Sentence

REJECTS_ROWS = [("EU", "B-ORG"), ("rejects", "O"), ("German", "B-MISC"), ("call", "O"), ("to", "O"),
            ("boycott", "O"), ("British", "B-MISC"), ("lamb", "O")]
RESIGNS_ROWS = [("Clinton", "B-PER"), ("aide", "O"), ("resigns", "O"), (",", "O"), ("NBC", "B-ORG"), ("says", "O")]

CLASSES = ["PER", "ORG", "LOC", "MISC"]
WORDS = ["the", "a", "said", "in", "of", "John", "Paris", "Acme", "New", "York", "Bank", ",", ".", "x1", "Zeta"]


def sentence_of(rows, language="en"):
    return Sentence([t for t, _ in rows], [g for _, g in rows], language)


@pytest.fixture
def rejects():
    return sentence_of(REJECTS_ROWS)


@pytest.fixture
def resigns():
    return sentence_of(RESIGNS_ROWS)


def random_tags(rng: random.Random, n: int, classes=CLASSES) -> list[str]:
    tags = []
    for _ in range(n):
        r = rng.random()
        if r < 0.45:
            tags.append("O")
        elif r < 0.75 or not tags or tags[-1] == "O":
            tags.append("B-" + rng.choice(classes))
        else:
            tags.append("I-" + tags[-1][2:])
    return tags


def random_sentence(rng: random.Random, max_len=12, language="en", languages=None) -> Sentence:
    n = rng.randint(1, max_len)
    tokens = [rng.choice(WORDS) for _ in range(n)]
    token_langs = None
    if languages:
        token_langs = [rng.choice(languages) for _ in range(n)]
    return Sentence(tokens, random_tags(rng, n), language, token_langs)


def random_corpus(rng: random.Random, n: int, **kw) -> Corpus:
    return Corpus(random_sentence(rng, **kw) for _ in range(n))


def templated_corpus(n=20, seed=0) -> Corpus:
    """Sentences with unique context words, so entities are learnable from context."""
    rng = random.Random(seed)
    firsts = ["John", "Mary", "Peter", "Anna", "Carl", "Lisa"]
    lasts = ["Smith", "Brown", "Lopez", "Green", "White"]
    orgs = ["Reuters", "Acme", "Globex", "Initech"]
    locs = ["Paris", "Berlin", "Madrid", "Tokyo", "Lima"]
    verbs = ["met", "visited", "called", "praised", "left", "joined", "sued", "hired", "thanked", "warned"]
    out = []
    for i in range(n):
        toks = [rng.choice(firsts), rng.choice(lasts), verbs[i % len(verbs)], f"w{i}", rng.choice(orgs), "in",
                rng.choice(locs), "."]
        out.append(Sentence(toks, ["B-PER", "I-PER", "O", "O", "B-ORG", "O", "B-LOC", "O"], "en"))
    return Corpus(out)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
