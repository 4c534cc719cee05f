"""Diagnostics: score gaps, negative-weight CDFs, substitution histograms,
and small-negative-count sweeps. All outputs are plot-ready CSV files
with a header comment naming the generating config digest; nothing here
mutates a checkpoint.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import rng as rng_streams
from .dataset import KgDataset
from .errors import ConfigError
from .evaluator import evaluate
from .index_space import VirtualIndexMap, refresh
from .numerics import softmax_rows
from .objective import LossConfig
from .params import ModelParams
from .sampling import build_negative_batch
from .scoring import scores_batch
from .trainer import TrainConfig, train


def _sampler_map(params: ModelParams, cfg: TrainConfig,
                 vmap: VirtualIndexMap | None) -> VirtualIndexMap | None:
    if cfg.strategy != "eans":
        return None
    if vmap is not None:
        return vmap
    return refresh(params, cfg.k, seed=cfg.seed, kmeans_iters=cfg.kmeans_iters)


def _fresh_batches(params: ModelParams, dataset: KgDataset, cfg: TrainConfig,
                   n_batches: int, vmap: VirtualIndexMap | None, seed_offset: int = 0):
    """Yield (positives, NegativeBatch) drawn like training batches."""
    sigma = cfg.resolve_sigma(dataset.n_entities)
    vmap = _sampler_map(params, cfg, vmap)
    for b in range(n_batches):
        gen = rng_streams.stream(cfg.seed, rng_streams.ANALYSIS, seed_offset + b)
        picks = gen.integers(0, len(dataset.train), size=cfg.batch_size)
        positives = dataset.train[picks]
        neg = build_negative_batch(positives, cfg.strategy, cfg.negatives,
                                   dataset.filter, gen, vmap=vmap, sigma=sigma,
                                   batch_index=b)
        yield positives, neg


def _batch_scores(params: ModelParams, positives: np.ndarray, neg):
    h, r, t = positives[:, 0], positives[:, 1], positives[:, 2]
    f_pos = scores_batch(params, h, r, t)
    if neg.side == "head":
        f_neg = scores_batch(params, neg.entities, r[:, None], t[:, None])
    else:
        f_neg = scores_batch(params, h[:, None], r[:, None], neg.entities)
    return f_pos, f_neg


def score_gap_report(checkpoints, dataset: KgDataset, cfg: TrainConfig,
                     n_batches: int = 1000):
    """Mean positive/negative dissimilarity per checkpoint.

    ``checkpoints`` is a list of (step, params) or (step, params, vmap).
    Each row reports raw means and their negations (the higher-is-better
    presentation).
    """
    rows = []
    for entry in checkpoints:
        step, params = entry[0], entry[1]
        vmap = entry[2] if len(entry) > 2 else None
        pos_sum = neg_sum = 0.0
        pos_n = neg_n = 0
        for positives, neg in _fresh_batches(params, dataset, cfg, n_batches, vmap):
            f_pos, f_neg = _batch_scores(params, positives, neg)
            pos_sum += f_pos.sum()
            neg_sum += f_neg.sum()
            pos_n += f_pos.size
            neg_n += f_neg.size
        rows.append({
            "step": step,
            "mean_f_pos": pos_sum / pos_n,
            "mean_f_neg": neg_sum / neg_n,
            "neg_mean_f_pos": -pos_sum / pos_n,
            "neg_mean_f_neg": -neg_sum / neg_n,
        })
    return rows


def neg_weight_cdf(params: ModelParams, dataset: KgDataset, cfg: TrainConfig,
                   n: int | None = None, n_batches: int = 100,
                   vmap: VirtualIndexMap | None = None) -> np.ndarray:
    """Cumulative weight mass over rank-sorted negatives.

    Per positive, the n negatives' plausibilities (-f) are softmaxed and
    sorted descending; the per-rank weights are averaged over all
    positives and cumulative-summed. Returns an array of length n whose
    last entry is 1.
    """
    if n is not None:
        cfg = replace(cfg, negatives=n)
    acc = np.zeros(cfg.negatives)
    count = 0
    for positives, neg in _fresh_batches(params, dataset, cfg, n_batches, vmap):
        _, f_neg = _batch_scores(params, positives, neg)
        weights = softmax_rows(-f_neg)
        weights.sort(axis=1)
        acc += weights[:, ::-1].sum(axis=0)
        count += len(weights)
    return np.cumsum(acc / count)


def substitution_scores_by_group(params: ModelParams, dataset: KgDataset,
                                 cfg: TrainConfig, n_batches: int = 100,
                                 vmap: VirtualIndexMap | None = None,
                                 substitution_trained: bool = True):
    """Sampled substitution scores split into truth groups.

    Groups: corruptions observed in train, corruptions observed only in
    valid/test, and true negatives (not observed anywhere). Returns a
    dict of float arrays; the partition is exhaustive and disjoint.
    """
    if not substitution_trained:
        raise ConfigError("checkpoint was trained without the substitution loss; "
                          "its r_sub row exists but was never fit")
    fi = dataset.filter
    groups = {"true_negative": [], "false_negative_train": [], "false_negative_eval": []}
    for positives, neg in _fresh_batches(params, dataset, cfg, n_batches):
        h, r, t = positives[:, 0], positives[:, 1], positives[:, 2]
        replaced = h if neg.side == "head" else t
        f_sub = scores_batch(params, replaced[:, None], params.r_sub, neg.entities)
        if neg.side == "head":
            in_train = fi.contains_batch(neg.entities, r[:, None], t[:, None], "train")
            in_any = fi.contains_batch(neg.entities, r[:, None], t[:, None], "all")
        else:
            in_train = fi.contains_batch(h[:, None], r[:, None], neg.entities, "train")
            in_any = fi.contains_batch(h[:, None], r[:, None], neg.entities, "all")
        groups["false_negative_train"].append(f_sub[in_train])
        groups["false_negative_eval"].append(f_sub[in_any & ~in_train])
        groups["true_negative"].append(f_sub[~in_any])
    return {k: np.concatenate(v) for k, v in groups.items()}


def substitution_histogram(params: ModelParams, dataset: KgDataset,
                           cfg: TrainConfig, bins: int = 50,
                           n_batches: int = 100,
                           vmap: VirtualIndexMap | None = None,
                           substitution_trained: bool = True):
    """Binned counts of raw substitution scores per truth group.

    One shared bin range (pooled min/max over all groups) so the three
    histograms are comparable. Returns (bin_edges, {group: counts}).
    """
    groups = substitution_scores_by_group(
        params, dataset, cfg, n_batches=n_batches, vmap=vmap,
        substitution_trained=substitution_trained)
    pooled = np.concatenate([v for v in groups.values() if len(v)])
    edges = np.histogram_bin_edges(pooled, bins=bins)
    counts = {k: np.histogram(v, bins=edges)[0] for k, v in groups.items()}
    return edges, counts


# method presets for sweeps: name -> config toggles
SWEEP_METHODS = {
    "uniform": dict(strategy="uniform", use_self_adv=False, use_substitution=False),
    "eans": dict(strategy="eans", use_self_adv=False, use_substitution=True),
    "selfadv": dict(strategy="uniform", use_self_adv=True, use_substitution=False),
    "eans+selfadv": dict(strategy="eans", use_self_adv=True, use_substitution=True),
}


def method_config(base_cfg: TrainConfig, method: str) -> TrainConfig:
    if method not in SWEEP_METHODS:
        raise ConfigError(f"unknown sweep method {method!r}; "
                          f"choose from {sorted(SWEEP_METHODS)}")
    return replace(base_cfg, **SWEEP_METHODS[method])


def run_sweep(dataset: KgDataset, base_cfg: TrainConfig, n_values,
              methods, seeds=(0,), split: str = "test"):
    """Train one run per (method, n, seed) cell; emit the MRR/Hit@10 grid.

    Seeds are matched across cells so differences are attributable to
    the method and negative count, not initialization.
    """
    rows = []
    eval_triples = dataset.splits[split]
    for method in methods:
        for n in n_values:
            mrrs, hit10s = [], []
            for seed in seeds:
                cfg = replace(method_config(base_cfg, method), negatives=n, seed=seed)
                params, _ = train(dataset, cfg)
                metrics = evaluate(params, eval_triples, dataset.filter)
                mrrs.append(metrics.mrr)
                hit10s.append(metrics.hits[10])
            rows.append({
                "method": method,
                "n": n,
                "mrr": float(np.mean(mrrs)),
                "hit10": float(np.mean(hit10s)),
                "mrr_per_seed": mrrs,
            })
    return rows


def write_csv(path, header_fields, rows, digest: str = "-") -> None:
    """Shared CSV emitter: one comment line with the config digest, then data."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# config_digest {digest}\n")
        fh.write(",".join(header_fields) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(row[k]) for k in header_fields) + "\n")


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value!r}"
    if isinstance(value, bool):
        return "1" if value else "0"
    return str(value)
