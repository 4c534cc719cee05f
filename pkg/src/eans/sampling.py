"""Negative batch construction and self-adversarial weighting.

A negative batch corrupts one side of every positive triple (heads on
even batch ordinals, tails on odd ones) with ``n`` entities drawn either
uniformly or from the cluster-aware Gaussian sampler. Corruptions that
recreate a training triple are kept, not filtered; they are labeled
y=1 so the loss can learn the false-negative pattern instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import FilterIndex
from .index_space import VirtualIndexMap, sample_eans_batch
from .numerics import softmax_rows

STRATEGIES = ("uniform", "eans")


@dataclass
class NegativeBatch:
    side: str                # "head" or "tail": which slot was corrupted
    entities: np.ndarray     # (B, n) corrupting entity ids
    labels: np.ndarray       # (B, n) 1 where the corrupted triple is in train
    strategy: str

    @property
    def n(self) -> int:
        return self.entities.shape[1]


def sample_uniform(n_entities: int, pos_entity: int, rng: np.random.Generator) -> int:
    """Uniform draw over all entities except the positive one."""
    if n_entities < 2:
        raise ValueError("need at least 2 entities to corrupt")
    draw = int(rng.integers(n_entities - 1))
    return draw + 1 if draw >= pos_entity else draw


def sample_uniform_batch(n_entities: int, pos: np.ndarray, rng: np.random.Generator,
                         n_samples: int) -> np.ndarray:
    if n_entities < 2:
        raise ValueError("need at least 2 entities to corrupt")
    pos = np.asarray(pos, dtype=np.int64)
    draws = rng.integers(0, n_entities - 1, size=pos.shape + (n_samples,))
    return draws + (draws >= pos[..., None])


def build_negative_batch(positives: np.ndarray, strategy: str, n: int,
                         fi: FilterIndex, rng: np.random.Generator,
                         *, vmap: VirtualIndexMap | None = None,
                         sigma: float | None = None,
                         batch_index: int = 0) -> NegativeBatch:
    """Corrupt one side of every positive with ``n`` sampled entities.

    ``positives`` is (B, 3); the corrupted side alternates with
    ``batch_index`` parity (even = heads). Labels mark corruptions that
    are members of the *training* split; nothing is filtered out.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    positives = np.asarray(positives, dtype=np.int64)
    side = "head" if batch_index % 2 == 0 else "tail"
    pos_entities = positives[:, 0] if side == "head" else positives[:, 2]

    if strategy == "eans":
        if vmap is None or sigma is None:
            raise ValueError("eans strategy needs a virtual index map and sigma")
        entities = sample_eans_batch(vmap, pos_entities, sigma, rng, n)
    else:
        entities = sample_uniform_batch(fi.n_entities, pos_entities, rng, n)

    rel = positives[:, 1][:, None]
    if side == "head":
        labels = fi.contains_batch(entities, rel, positives[:, 2][:, None], scope="train")
    else:
        labels = fi.contains_batch(positives[:, 0][:, None], rel, entities, scope="train")
    return NegativeBatch(side=side, entities=entities,
                         labels=labels.astype(np.int8), strategy=strategy)


def self_adv_weights(neg_scores, alpha: float) -> np.ndarray:
    """Softmax weights over negatives: lower dissimilarity, higher weight.

    Rows of ``neg_scores`` are one positive's n negative scores; returns
    weights summing to 1 per row. The caller treats these as constants
    (no gradient flows through them). ``alpha`` is the temperature;
    alpha=0 reduces to uniform 1/n.
    """
    scores = np.asarray(neg_scores, dtype=np.float64)
    if not np.isfinite(scores).all():
        raise ValueError("non-finite negative scores")
    return softmax_rows(-alpha * scores)
