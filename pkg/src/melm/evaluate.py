"""Span-level micro-F1, unique-valid-entity counts and gold-vs-augmented comparison."""
from __future__ import annotations

import statistics
from collections import Counter
from dataclasses import dataclass, field

from .corpus import Corpus, extract_spans
from .errors import EvaluationError
from .tagger import train_tagger


def _prf(tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    per_class: dict = field(default_factory=dict)  # class -> (P, R, F1, support)
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def render(self) -> str:
        rows = [("class", "precision", "recall", "f1", "support")]
        for cls, (p, r, f, n) in sorted(self.per_class.items()):
            rows.append((cls, f"{p:.4f}", f"{r:.4f}", f"{f:.4f}", str(n)))
        rows.append(("micro", f"{self.precision:.4f}", f"{self.recall:.4f}", f"{self.f1:.4f}",
                     str(self.tp + self.fn)))
        return render_table(rows)

    def to_tsv(self) -> str:
        lines = ["class\tprecision\trecall\tf1\tsupport"]
        for cls, (p, r, f, n) in sorted(self.per_class.items()):
            lines.append(f"{cls}\t{p:.6f}\t{r:.6f}\t{f:.6f}\t{n}")
        lines.append(f"micro\t{self.precision:.6f}\t{self.recall:.6f}\t{self.f1:.6f}\t{self.tp + self.fn}")
        return "\n".join(lines) + "\n"


def render_table(rows) -> str:
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows) + "\n"


def micro_f1(gold: Corpus, predicted: Corpus) -> EvalReport:
    """Exact (start, end, class) span matching pooled over all sentences."""
    if len(gold) != len(predicted):
        raise EvaluationError(f"{len(gold)} gold sentences vs {len(predicted)} predicted")
    tp, fp, fn = Counter(), Counter(), Counter()
    for i, (g, p) in enumerate(zip(gold, predicted)):
        if len(g) != len(p):
            raise EvaluationError(f"sentence {i}: {len(g)} gold tokens vs {len(p)} predicted")
        gs, ps = set(extract_spans(g)), set(extract_spans(p))
        for s in gs & ps:
            tp[s.cls] += 1
        for s in ps - gs:
            fp[s.cls] += 1
        for s in gs - ps:
            fn[s.cls] += 1
    per_class = {}
    for cls in sorted(set(tp) | set(fp) | set(fn)):
        per_class[cls] = (*_prf(tp[cls], fp[cls], fn[cls]), tp[cls] + fn[cls])
    TP, FP, FN = sum(tp.values()), sum(fp.values()), sum(fn.values())
    return EvalReport(*_prf(TP, FP, FN), per_class, TP, FP, FN)


def valid_entities(corpus: Corpus, oracle) -> set:
    """Distinct (mention, class) pairs whose span the oracle tags identically."""
    found = set()
    for s in corpus:
        spans = extract_spans(s)
        if not spans:
            continue
        predicted = type(s)(s.tokens, oracle.predict(s.tokens), s.language)
        agreed = set(extract_spans(predicted))
        for span in spans:
            if span in agreed:
                found.add((s.tokens[span.start:span.end], span.cls))
    return found


def unique_valid_entities(datasets: dict, oracle) -> dict:
    return {name: len(valid_entities(corpus, oracle)) for name, corpus in datasets.items()}


@dataclass
class Comparison:
    seeds: list
    gold_f1: list
    augmented_f1: list

    @staticmethod
    def _spread(values):
        return statistics.pstdev(values) if len(values) > 1 else 0.0

    @property
    def gold_mean(self):
        return statistics.fmean(self.gold_f1)

    @property
    def augmented_mean(self):
        return statistics.fmean(self.augmented_f1)

    def rows(self):
        rows = [("seed", "gold_only_f1", "gold_aug_f1")]
        rows += [(str(s), f"{g:.4f}", f"{a:.4f}") for s, g, a in zip(self.seeds, self.gold_f1, self.augmented_f1)]
        rows.append(("mean", f"{self.gold_mean:.4f}", f"{self.augmented_mean:.4f}"))
        rows.append(("std", f"{self._spread(self.gold_f1):.4f}", f"{self._spread(self.augmented_f1):.4f}"))
        return rows

    def render(self) -> str:
        return render_table(self.rows())

    def to_tsv(self) -> str:
        return "".join("\t".join(r) + "\n" for r in self.rows())


def compare_runs(gold: Corpus, augmented, test: Corpus, seeds=(0, 1, 2), epochs: int = 10) -> Comparison:
    """Train the tagger on gold alone and on gold plus augmented data, per seed."""
    aug = Corpus(getattr(s, "sentence", s) for s in augmented)
    classes = gold.classes | aug.classes | test.classes
    gold_f1, aug_f1 = [], []
    for seed in seeds:
        g = train_tagger(gold, epochs, seed, classes)
        gold_f1.append(micro_f1(test, g.tag_corpus(test)).f1)
        a = train_tagger(gold + aug, epochs, seed, classes)
        aug_f1.append(micro_f1(test, a.tag_corpus(test)).f1)
    return Comparison(list(seeds), gold_f1, aug_f1)
