"""Keep only augmented samples whose labels a gold-trained tagger reproduces."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .corpus import Corpus, extract_spans


@dataclass
class FilterReport:
    kept: int = 0
    inconsistent: int = 0
    duplicate_gold: int = 0
    duplicate_sample: int = 0
    # class -> number of expected spans the tagger failed to reproduce
    class_mismatches: Counter = field(default_factory=Counter)

    @property
    def dropped(self) -> int:
        return self.inconsistent + self.duplicate_gold + self.duplicate_sample

    def render(self) -> str:
        lines = [
            f"kept\t{self.kept}",
            f"dropped\t{self.dropped}",
            f"dropped.inconsistent\t{self.inconsistent}",
            f"dropped.duplicate_gold\t{self.duplicate_gold}",
            f"dropped.duplicate_sample\t{self.duplicate_sample}",
        ]
        lines += [f"mismatch.{cls}\t{n}" for cls, n in sorted(self.class_mismatches.items())]
        return "\n".join(lines) + "\n"


def filter_consistent(samples, tagger, dedup: bool = True, gold: Corpus | None = None,
                      report: FilterReport | None = None) -> list:
    """Samples whose full predicted tag sequence equals their own tags.

    With ``dedup``, a sample whose tokens repeat a gold sentence (when
    ``gold`` is given) or an earlier kept sample is dropped as well.
    """
    report = FilterReport() if report is None else report
    seen = {s.tokens for s in gold} if (dedup and gold is not None) else set()
    gold_tokens = set(seen)
    kept = []
    for sample in samples:
        sent = sample.sentence
        predicted = tagger.predict(sent.tokens)
        if list(sent.tags) != predicted:
            report.inconsistent += 1
            pred_spans = set(extract_spans(type(sent)(sent.tokens, predicted, sent.language)))
            for span in extract_spans(sent):
                if span not in pred_spans:
                    report.class_mismatches[span.cls] += 1
            continue
        if dedup and sent.tokens in seen:
            if sent.tokens in gold_tokens:
                report.duplicate_gold += 1
            else:
                report.duplicate_sample += 1
            continue
        if dedup:
            seen.add(sent.tokens)
        kept.append(sample)
        report.kept += 1
    return kept
