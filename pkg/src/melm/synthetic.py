"""Templated two-language NER benchmark.

Each language has 12 sentence frames times 5 adverbial tails (60 templates)
and 60 PER, 60 ORG and 60 LOC mentions; half of every lexicon is held out
and appears only in the test split. Aligned embeddings for both languages
are generated so that translated name parts share a direction.
"""
from __future__ import annotations

import itertools
import os

import numpy as np

from .corpus import Corpus, Sentence, save_conll, span_tags
from .rng import derive_rng

FRAMES = {
    "en": [
        "{PER} said that {ORG} would expand in {LOC} .",
        "{ORG} hired {PER} as its new director .",
        "{PER} arrived in {LOC} late .",
        "Officials from {ORG} met {PER} in {LOC} .",
        "Police in {LOC} arrested a man .",
        "{PER} , a spokesman for {ORG} , declined to comment .",
        "Shares of {ORG} rose sharply .",
        "The mayor of {LOC} praised {PER} .",
        "{PER} scored twice for {ORG} .",
        "Heavy rain hit {LOC} and flooded roads .",
        "{ORG} opened an office in {LOC} .",
        "{PER} told reporters in {LOC} that talks continued .",
    ],
    "es": [
        "{PER} dijo que {ORG} crecerá en {LOC} .",
        "{ORG} contrató a {PER} como nuevo director .",
        "{PER} llegó a {LOC} tarde .",
        "Directivos de {ORG} se reunieron con {PER} en {LOC} .",
        "La policía de {LOC} detuvo a un hombre .",
        "{PER} , portavoz de {ORG} , no quiso comentar .",
        "Las acciones de {ORG} subieron con fuerza .",
        "El alcalde de {LOC} elogió a {PER} .",
        "{PER} marcó dos goles para {ORG} .",
        "Fuertes lluvias azotaron {LOC} e inundaron carreteras .",
        "{ORG} abrió una oficina en {LOC} .",
        "{PER} dijo a periodistas en {LOC} que las conversaciones siguen .",
    ],
}

TAILS = {
    "en": ["", "on Monday", "last week", "according to sources", "this year"],
    "es": ["", "el lunes", "la semana pasada", "según fuentes", "este año"],
}

# name parts, index-aligned across languages (position i in en translates to i in es)
PARTS = {
    "en": {
        "first": ["John", "Mary", "Peter", "Anna", "Carl", "Lisa", "Mark", "Emma", "Paul", "Ruth", "Tom", "Jane"],
        "last": ["Smith", "Brown", "Green", "White", "Black", "Stone", "Hill", "Wood", "Fox", "Hunt"],
        "org_head": ["Acme", "Globex", "Initech", "Umbrella", "Stark", "Wayne", "Hooli", "Vandelay",
                     "Soylent", "Cyberdyne", "Tyrell", "Oscorp"],
        "org_tail": ["Corp", "Group", "Bank", "Motors", "Media"],
        "loc_head": ["Berlin", "Boston", "Dover", "Leeds", "Perth", "Austin", "Denver", "Salem",
                     "Bristol", "Camden", "Oxford", "Newport"],
        "loc_tail": ["City", "Bay", "Port", "Hills", "Falls"],
    },
    "es": {
        "first": ["Juan", "María", "Pedro", "Ana", "Carlos", "Lucía", "Marcos", "Elena", "Pablo", "Rut", "Tomás", "Juana"],
        "last": ["García", "Pérez", "Verde", "Blanco", "Negro", "Piedra", "Colina", "Bosque", "Zorro", "Caza"],
        "org_head": ["Telefónica", "Iberdrola", "Repsol", "Inditex", "Mapfre", "Ferrovial", "Acciona", "Abengoa",
                     "Indra", "Sacyr", "Ebro", "Prosegur"],
        "org_tail": ["Grupo", "Holding", "Banco", "Motores", "Medios"],
        "loc_head": ["Sevilla", "Toledo", "Cádiz", "León", "Murcia", "Bilbao", "Oviedo", "Soria",
                     "Huelva", "Lugo", "Segovia", "Teruel"],
        "loc_tail": ["Ciudad", "Bahía", "Puerto", "Sierra", "Cataratas"],
    },
}

CLASSES = ("PER", "ORG", "LOC")
LEXICON_SIZE = 60


def templates(language: str) -> list[str]:
    return [frame if not tail else f"{frame[:-2]} {tail} ."
            for frame, tail in itertools.product(FRAMES[language], TAILS[language])]


def lexicon(language: str) -> dict[str, list[tuple[str, ...]]]:
    """60 distinct mentions per class, in a fixed order."""
    p = PARTS[language]
    per = [(f, l) for f, l in itertools.product(p["first"], p["last"])]
    org = [(h,) for h in p["org_head"]] + [
        (h, t) if language == "en" else (t, h) for h, t in itertools.product(p["org_head"], p["org_tail"])
    ]
    loc = [(h,) for h in p["loc_head"]] + [
        (h, t) if language == "en" else (t, h) for h, t in itertools.product(p["loc_head"], p["loc_tail"])
    ]
    lex = {}
    for cls, pool in zip(CLASSES, (per, org, loc)):
        rng = derive_rng(0, "lexicon", language, cls)
        order = rng.permutation(len(pool))[:LEXICON_SIZE]
        lex[cls] = [pool[i] for i in order]
    return lex


def split_lexicon(language: str):
    """(train mentions, held-out mentions) per class; halves of the lexicon."""
    lex = lexicon(language)
    half = LEXICON_SIZE // 2
    return ({c: m[:half] for c, m in lex.items()}, {c: m[half:] for c, m in lex.items()})


def fill(template: str, language: str, mentions: dict, rng) -> Sentence:
    tokens, tags = [], []
    for word in template.split():
        if word.startswith("{") and word.endswith("}"):
            cls = word[1:-1]
            pool = mentions[cls]
            mention = pool[int(rng.integers(len(pool)))]
            tokens.extend(mention)
            tags.extend(span_tags(cls, len(mention)))
        else:
            tokens.append(word)
            tags.append("O")
    return Sentence(tokens, tags, language)


def generate(language: str, n: int, mentions: dict, seed: int, stage: str) -> Corpus:
    temps = templates(language)
    out = []
    for i in range(n):
        rng = derive_rng(seed, "synthetic", stage, language, i)
        out.append(fill(temps[int(rng.integers(len(temps)))], language, mentions, rng))
    return Corpus(out)


def benchmark(seed: int = 0, n_train: int = 100, n_test: int = 200, n_oracle: int = 600,
              languages=("en", "es")) -> dict:
    """Train, test and oracle corpora per language.

    Train sentences use the first half of each lexicon, test sentences the
    held-out half; the oracle corpus draws from the whole lexicon.
    """
    data = {"train": {}, "test": {}, "oracle": {}}
    for lang in languages:
        train_lex, test_lex = split_lexicon(lang)
        data["train"][lang] = generate(lang, n_train, train_lex, seed, "train")
        data["test"][lang] = generate(lang, n_test, test_lex, seed, "test")
        data["oracle"][lang] = generate(lang, n_oracle, lexicon(lang), seed, "oracle")
    return data


def _context_words(language):
    words = set()
    for t in templates(language):
        words.update(w for w in t.split() if not w.startswith("{"))
    return sorted(words)


def embeddings(dim: int = 32, seed: int = 0, languages=("en", "es")) -> dict[str, np.ndarray]:
    """Aligned vectors: translated name parts share a base vector plus noise."""
    rng = derive_rng(seed, "embeddings")
    vectors = {}
    slots = sorted(PARTS[languages[0]])
    centroid = {slot: rng.normal(size=dim) for slot in slots}
    for slot in slots:
        size = len(PARTS[languages[0]][slot])
        for i in range(size):
            base = centroid[slot] + rng.normal(size=dim)
            for lang in languages:
                vectors.setdefault(PARTS[lang][slot][i], base + 0.3 * rng.normal(size=dim))
    for lang in languages:
        for w in _context_words(lang):
            vectors.setdefault(w, rng.normal(size=dim))
    return vectors


def format_embeddings(vectors: dict[str, np.ndarray]) -> str:
    dim = len(next(iter(vectors.values())))
    lines = [f"{len(vectors)} {dim}"]
    for w in sorted(vectors):
        lines.append(w + " " + " ".join(f"{x:.6f}" for x in vectors[w]))
    return "\n".join(lines) + "\n"


CONFIG_TEMPLATE = """\
# synthetic two-language benchmark
mode = multilingual
seed = {seed}
output_dir = out
{paths}
embeddings.en-es = emb.en-es.vec
oracle.en = oracle.en.conll
oracle.es = oracle.es.conll
"""


def write_benchmark(directory, seed: int = 0, n_train: int = 100, n_test: int = 200) -> str:
    """Write corpora, embeddings and a pipeline config; returns the config path."""
    os.makedirs(directory, exist_ok=True)
    data = benchmark(seed, n_train, n_test)
    paths = []
    for split in ("train", "test", "oracle"):
        for lang, corpus in data[split].items():
            name = f"{split}.{lang}.conll"
            save_conll(corpus, os.path.join(directory, name), language_comments=False)
            if split != "oracle":
                paths.append(f"{split}.{lang} = {name}")
    with open(os.path.join(directory, "emb.en-es.vec"), "w", encoding="utf-8") as fh:
        fh.write(format_embeddings(embeddings(seed=seed)))
    path = os.path.join(directory, "pipeline.cfg")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CONFIG_TEMPLATE.format(seed=seed, paths="\n".join(paths)))
    return path
