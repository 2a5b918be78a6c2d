"""Augmented-sentence generation by top-k sampling over masked entity tokens."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Sentence
from .errors import DataError, GenerationError
from .linearize import delinearize, linearize
from .masking import MaskingConfig, gen_mask
from .rng import derive_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentedSample:
    sentence: Sentence
    source_id: int
    round: int
    positions: tuple[int, ...]  # sentence token indices that were resampled
    tokens: tuple[str, ...]  # chosen replacement at each position


def top_k_candidates(dist: np.ndarray, k: int, forbidden=frozenset()) -> np.ndarray:
    """Ids of the k most probable admissible tokens; ties go to the lower id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    admissible = np.ones(len(dist), dtype=bool)
    admissible[list(forbidden)] = False
    ids = np.flatnonzero(admissible)
    if ids.size == 0:
        raise GenerationError("no admissible candidate token")
    # lexsort: last key is primary
    order = np.lexsort((ids, -dist[ids]))
    return ids[order[:k]]


def top_k_sample(dist: np.ndarray, k: int, forbidden, rng: np.random.Generator,
                 renormalize: bool = False) -> int:
    """Draw a token id from the top-k admissible candidates.

    Uniform over the candidates by default; with ``renormalize`` the draw
    follows their probabilities rescaled to sum to one.
    """
    cands = top_k_candidates(dist, k, forbidden)
    if renormalize:
        p = dist[cands]
        total = p.sum()
        if total > 0:
            return int(cands[rng.choice(len(cands), p=p / total)])
    return int(cands[rng.integers(len(cands))])


def augment_one(sentence: Sentence, source_id: int, round_idx: int, backend, config: MaskingConfig,
                seed: int, multilingual: bool = False, renormalize: bool = False) -> AugmentedSample | None:
    rng = derive_rng(seed, "augment", source_id, round_idx)
    seq = linearize(sentence, multilingual)
    plan = gen_mask(seq, config.mu, rng)
    if plan is None:
        return None
    vocab = backend.vocab
    dists = backend.predict(plan)
    chosen = {}
    for pos, dist in zip(plan.masked_positions, dists):
        chosen[pos] = vocab.token(top_k_sample(dist, config.k, vocab.forbidden_ids, rng, renormalize))
    out = delinearize(seq.replace(chosen))
    positions = tuple(seq.token_index(p) for p in plan.masked_positions)
    return AugmentedSample(out, source_id, round_idx, positions, tuple(chosen[p] for p in plan.masked_positions))


def augment(corpus: Corpus, backend, config: MaskingConfig = MaskingConfig(), seed: int = 0,
            multilingual: bool = False, renormalize: bool = False, workers: int = 1) -> list[AugmentedSample]:
    """R rounds of generation for every sentence holding an entity.

    Output is ordered by (sentence, round) and does not depend on ``workers``.
    Sentences that fail (too long, no candidates, broken structure) are
    skipped with a warning.
    """
    tasks = [(i, r) for i, s in enumerate(corpus) if any(t != "O" for t in s.tags)
             for r in range(config.rounds)]

    def run(task):
        i, r = task
        try:
            return augment_one(corpus[i], i, r, backend, config, seed, multilingual, renormalize)
        except DataError as exc:
            log.warning("skipping sentence %d round %d: %s", i, r, exc)
            return None

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    return [s for s in results if s is not None]


def format_provenance(samples) -> str:
    lines = []
    for s in samples:
        positions = ",".join(map(str, s.positions))
        lines.append(f"{s.source_id}\t{s.round}\t{positions}\t{' '.join(s.tokens)}\n")
    return "".join(lines)


def parse_provenance(text: str) -> list[tuple[int, int, tuple[int, ...], tuple[str, ...]]]:
    rows = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"provenance line {n}: expected 4 fields")
        positions = tuple(int(p) for p in parts[2].split(",") if p)
        rows.append((int(parts[0]), int(parts[1]), positions, tuple(parts[3].split())))
    return rows


def attach_provenance(corpus: Corpus, text: str) -> list[AugmentedSample]:
    """Rebuild samples from an augmented corpus and its provenance sidecar."""
    rows = parse_provenance(text)
    if len(rows) != len(corpus):
        raise DataError(f"{len(corpus)} sentences but {len(rows)} provenance lines")
    return [AugmentedSample(s, *row) for s, row in zip(corpus, rows)]
