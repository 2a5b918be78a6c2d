"""Entity-only masking for fine-tuning and for generation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linearize import LinearizedSequence


@dataclass(frozen=True)
class MaskingConfig:
    eta: float = 0.7
    mu: float = 0.5
    k: int = 5
    rounds: int = 3

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if not 0 < self.mu <= 1:
            raise ValueError(f"mu must be in (0, 1], got {self.mu}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")


@dataclass(frozen=True)
class MaskPlan:
    base: LinearizedSequence
    masked_positions: tuple[int, ...]
    targets: dict = field(compare=False, hash=False)

    def __post_init__(self):
        positions = tuple(sorted(set(self.masked_positions)))
        if not positions:
            raise ValueError("a mask plan needs at least one masked position")
        allowed = set(self.base.entity_positions)
        for pos in positions:
            if pos not in allowed:
                raise ValueError(f"position {pos} is not an entity token")
        targets = {pos: self.base.items[pos] for pos in positions}
        if self.targets and dict(self.targets) != targets:
            raise ValueError("targets disagree with the base sequence")
        object.__setattr__(self, "masked_positions", positions)
        object.__setattr__(self, "targets", targets)

    @classmethod
    def of(cls, base: LinearizedSequence, positions) -> "MaskPlan":
        return cls(base, tuple(positions), {})


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def finetune_mask(seq: LinearizedSequence, eta: float, rng: np.random.Generator) -> MaskPlan | None:
    """Mask each entity token independently with probability ``eta``.

    At least one entity token is always masked. Returns None for sentences
    without entities.
    """
    positions = seq.entity_positions
    if not positions:
        return None
    draws = rng.random(len(positions)) < eta
    chosen = [p for p, hit in zip(positions, draws) if hit]
    if not chosen:
        chosen = [positions[int(rng.integers(len(positions)))]]
    return MaskPlan.of(seq, chosen)


def span_mask_count(eps: float, n: int) -> int:
    eps = min(max(eps, 0.0), 1.0)
    return min(max(round_half_away(eps * n), 1), n)


def gen_mask(seq: LinearizedSequence, mu: float, rng: np.random.Generator) -> MaskPlan | None:
    """Mask part of every entity span with a Gaussian dynamic rate.

    A span of n tokens draws eps ~ N(mu, 1/n^2) and masks
    clamp(round(eps * n), 1, n) of its tokens, chosen uniformly.
    """
    spans = seq.entity_span_positions()
    if not spans:
        return None
    chosen = []
    for span in spans:
        n = len(span)
        eps = rng.normal(mu, 1.0 / n)
        m = span_mask_count(eps, n)
        picks = rng.choice(n, size=m, replace=False)
        chosen.extend(span[int(j)] for j in picks)
    return MaskPlan.of(seq, chosen)
