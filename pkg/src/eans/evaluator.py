"""Filtered link-prediction evaluation: MR, MRR, Hit@N over both sides.

For every evaluated triple, the true entity is ranked against all |E|
candidate completions of the corrupted slot. In the filtered protocol,
candidates that complete the slot into *another* known triple (any
split) are excluded. Ties take the average rank. All arithmetic is
float64; evaluation never mutates the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import FilterIndex
from .params import ModelParams
from .scoring import candidate_scores

HIT_LEVELS = (1, 3, 10)


@dataclass
class RankStats:
    mr: float
    mrr: float
    hits: dict[int, float]

    @classmethod
    def from_ranks(cls, ranks: np.ndarray) -> "RankStats":
        ranks = np.asarray(ranks, dtype=np.float64)
        return cls(
            mr=float(ranks.mean()),
            mrr=float((1.0 / ranks).mean()),
            hits={n: float((ranks <= n).mean()) for n in HIT_LEVELS},
        )


@dataclass
class Metrics:
    combined: RankStats
    head: RankStats      # predicting the head slot
    tail: RankStats      # predicting the tail slot
    n_triples: int
    head_ranks: np.ndarray = field(repr=False, default=None)
    tail_ranks: np.ndarray = field(repr=False, default=None)

    @property
    def mr(self) -> float:
        return self.combined.mr

    @property
    def mrr(self) -> float:
        return self.combined.mrr

    @property
    def hits(self) -> dict[int, float]:
        return self.combined.hits

    def csv_row(self) -> str:
        c, h, t = self.combined, self.head, self.tail
        cells = [f"{c.mr:.4f}", f"{c.mrr:.6f}"]
        cells += [f"{c.hits[n]:.6f}" for n in HIT_LEVELS]
        cells += [f"{h.mrr:.6f}", f"{t.mrr:.6f}"]
        return ",".join(cells)

    CSV_HEADER = "mr,mrr,hit1,hit3,hit10,head_mrr,tail_mrr"


def rank_triple(params: ModelParams, triple, side: str, fi: FilterIndex,
                filtered: bool = True) -> float:
    """Average-tie rank of the true entity among candidate completions.

    ``side="head"`` ranks h against all candidates c in f(c, r, t);
    ``side="tail"`` ranks t in f(h, r, c). With ``filtered``, candidates
    completing the slot into another known triple (all splits) are
    dropped first.
    """
    h, r, t = (int(x) for x in triple)
    if side == "head":
        scores = candidate_scores(params, "head", t, r)
        true_entity = h
        known = fi.heads_by_rt.get((r, t))
    elif side == "tail":
        scores = candidate_scores(params, "tail", h, r)
        true_entity = t
        known = fi.tails_by_hr.get((h, r))
    else:
        raise ValueError(f"side must be 'head' or 'tail', got {side!r}")

    keep = np.ones(len(scores), dtype=bool)
    if filtered and known is not None:
        keep[known] = False
        keep[true_entity] = True

    f_true = scores[true_entity]
    kept = scores[keep]
    below = int((kept < f_true).sum())
    equal = int((kept == f_true).sum()) - 1  # the true entity itself
    return 1.0 + below + equal / 2.0


def evaluate(params: ModelParams, triples: np.ndarray, fi: FilterIndex,
             filtered: bool = True) -> Metrics:
    """Rank both sides of every triple and aggregate MR/MRR/Hit@N.

    The combined block averages the per-triple values of both sides
    (equivalently: stats over the concatenated rank list).
    """
    triples = np.asarray(triples, dtype=np.int64)
    head_ranks = np.empty(len(triples))
    tail_ranks = np.empty(len(triples))
    for i, triple in enumerate(triples):
        head_ranks[i] = rank_triple(params, triple, "head", fi, filtered)
        tail_ranks[i] = rank_triple(params, triple, "tail", fi, filtered)
    return Metrics(
        combined=RankStats.from_ranks(np.concatenate([head_ranks, tail_ranks])),
        head=RankStats.from_ranks(head_ranks),
        tail=RankStats.from_ranks(tail_ranks),
        n_triples=len(triples),
        head_ranks=head_ranks,
        tail_ranks=tail_ranks,
    )
