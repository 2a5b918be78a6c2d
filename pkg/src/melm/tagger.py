"""Averaged structured perceptron with BIO-constrained Viterbi decoding."""
from __future__ import annotations

import re

import numpy as np

from .corpus import Corpus
from .errors import TrainingError
from .rng import derive_rng

NEG_INF = -np.inf


def word_shape(token: str) -> str:
    shape = re.sub(r"[A-Z]", "X", token)
    shape = re.sub(r"[a-z]", "x", shape)
    shape = re.sub(r"[0-9]", "d", shape)
    return re.sub(r"(.)\1+", r"\1\1", shape)


def token_features(tokens, i) -> list[str]:
    tok = tokens[i]
    low = tok.lower()
    feats = ["bias", "w=" + tok, "lw=" + low, "shape=" + word_shape(tok)]
    for n in (1, 2, 3):
        if len(tok) >= n:
            feats.append(f"p{n}={tok[:n]}")
            feats.append(f"s{n}={tok[-n:]}")
    feats.append("-1w=" + (tokens[i - 1].lower() if i > 0 else "<s>"))
    feats.append("+1w=" + (tokens[i + 1].lower() if i + 1 < len(tokens) else "</s>"))
    return feats


def allowed_transitions(tags: list[str]) -> np.ndarray:
    """(T+1) x T boolean matrix; row T is the sentence start."""
    n = len(tags)
    ok = np.ones((n + 1, n), dtype=bool)
    for j, tag in enumerate(tags):
        if tag.startswith("I-"):
            for i, prev in enumerate(tags):
                ok[i, j] = prev[2:] == tag[2:] and prev != "O"
            ok[n, j] = False
    return ok


class PerceptronTagger:
    """Linear-chain tagger.

    Emission weights are indexed by (feature, tag), transition weights by
    (previous tag, tag). After training the weights are averaged over all
    updates. Decoding never produces an ``I-`` tag that does not continue an
    entity of the same class.
    """

    def __init__(self, classes):
        self.tags = ["O"] + [p + c for c in sorted(classes) for p in ("B-", "I-")]
        self.tag_index = {t: i for i, t in enumerate(self.tags)}
        self.features: dict[str, int] = {}
        self.weights = np.zeros((0, len(self.tags)))
        self.trans = np.zeros((len(self.tags) + 1, len(self.tags)))
        self.allowed = allowed_transitions(self.tags)
        self.accuracy_history: list[float] = []

    def _feature_ids(self, tokens, grow=False) -> list[np.ndarray]:
        out = []
        for i in range(len(tokens)):
            ids = []
            for f in token_features(tokens, i):
                idx = self.features.get(f)
                if idx is None and grow:
                    idx = self.features[f] = len(self.features)
                if idx is not None:
                    ids.append(idx)
            out.append(np.array(ids, dtype=np.int64))
        return out

    def _viterbi(self, feat_ids, weights, trans) -> list[int]:
        n, t = len(feat_ids), len(self.tags)
        if n == 0:
            return []
        emit = np.stack([weights[ids].sum(axis=0) for ids in feat_ids])
        trans = np.where(self.allowed, trans, NEG_INF)
        score = trans[t] + emit[0]
        back = np.zeros((n, t), dtype=np.int64)
        for i in range(1, n):
            cand = score[:, None] + trans[:t]
            back[i] = cand.argmax(axis=0)
            score = cand.max(axis=0) + emit[i]
        best = [int(score.argmax())]
        for i in range(n - 1, 0, -1):
            best.append(int(back[i, best[-1]]))
        return best[::-1]

    def predict(self, tokens) -> list[str]:
        return [self.tags[j] for j in self._viterbi(self._feature_ids(tokens), self.weights, self.trans)]

    def tag_corpus(self, corpus: Corpus) -> Corpus:
        from .corpus import Sentence
        return Corpus(Sentence(s.tokens, self.predict(s.tokens), s.language, s.token_langs) for s in corpus)

    def fit(self, gold: Corpus, epochs: int = 10, seed: int = 0) -> "PerceptronTagger":
        if len(gold) == 0:
            raise TrainingError("cannot train a tagger on an empty corpus")
        data = [(self._feature_ids(s.tokens, grow=True), [self.tag_index[t] for t in s.tags]) for s in gold]
        t = len(self.tags)
        w = np.zeros((len(self.features), t))
        w_acc = np.zeros_like(w)
        tr = np.zeros((t + 1, t))
        tr_acc = np.zeros_like(tr)
        c = 1
        for epoch in range(epochs):
            order = derive_rng(seed, "tagger", epoch).permutation(len(data))
            correct = total = 0
            for idx in order:
                feats, gold_tags = data[idx]
                pred = self._viterbi(feats, w, tr)
                correct += sum(p == g for p, g in zip(pred, gold_tags))
                total += len(gold_tags)
                if pred != gold_tags:
                    prev_g = prev_p = t
                    for ids, g, p in zip(feats, gold_tags, pred):
                        if g != p:
                            w[ids, g] += 1
                            w[ids, p] -= 1
                            w_acc[ids, g] += c
                            w_acc[ids, p] -= c
                        if (prev_g, g) != (prev_p, p):
                            tr[prev_g, g] += 1
                            tr[prev_p, p] -= 1
                            tr_acc[prev_g, g] += c
                            tr_acc[prev_p, p] -= c
                        prev_g, prev_p = g, p
                c += 1
            self.accuracy_history.append(correct / total)
        self.weights = w - w_acc / c
        self.trans = tr - tr_acc / c
        return self


def train_tagger(gold: Corpus, epochs: int = 10, seed: int = 0, classes=()) -> PerceptronTagger:
    return PerceptronTagger(set(gold.classes) | set(classes)).fit(gold, epochs, seed)
