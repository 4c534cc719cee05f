"""Training loop: batching, sampling, loss, sparse Adam, map refresh.

Every random decision is keyed by (seed, stream, step), so a run is
fully determined by its seed and can resume from any checkpoint
bitwise-identically: the checkpoint carries parameters, optimizer
moments, the step counter, and the live virtual index map.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import rng as rng_streams
from .dataset import KgDataset
from .errors import ConfigError, TrainingDiverged
from .evaluator import Metrics, evaluate
from .index_space import VirtualIndexMap, refresh
from .objective import LossConfig, total_loss
from .params import (ModelParams, OptimizerState, adam_step, config_digest,
                     init_params, load_checkpoint, save_checkpoint)
from .sampling import build_negative_batch


@dataclass
class TrainConfig:
    model: str = "transe"
    dim: int = 100
    batch_size: int = 256
    negatives: int = 16
    learning_rate: float = 1e-3
    gamma: float = 6.0
    lambda1: float = 0.1
    lambda2: float = 1.0
    lambda1_reg: float | None = None
    alpha: float | None = None
    sigma: float | None = None       # None -> 2|E|/k
    k: int = 100
    max_steps: int = 1000
    reorder_interval: int = 1000
    strategy: str = "uniform"        # "uniform" | "eans"
    use_substitution: bool = False
    use_self_adv: bool = False
    seed: int = 0
    eval_interval: int = 10_000      # 0 disables validation during training
    checkpoint_interval: int = 0     # 0 -> only the final checkpoint
    kmeans_iters: int = 100
    transe_norm: str = "l1"
    sub_reg: str = "abs-of-sum"

    def __post_init__(self):
        if self.strategy not in ("uniform", "eans"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        for name in ("dim", "batch_size", "negatives", "k"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.max_steps < 0 or self.learning_rate <= 0 or self.gamma <= 0:
            raise ConfigError("max_steps >= 0, learning_rate > 0, gamma > 0 required")

    def resolve_sigma(self, n_entities: int) -> float:
        return self.sigma if self.sigma is not None else 2.0 * n_entities / self.k

    def loss_config(self) -> LossConfig:
        return LossConfig(
            gamma=self.gamma,
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            lambda1_reg=self.lambda1_reg,
            alpha=self.alpha,
            use_substitution=self.use_substitution,
            use_self_adv=self.use_self_adv,
            sub_reg=self.sub_reg,
        )

    def canonical_text(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            lines.append(f"{f.name} = {getattr(self, f.name)!r}")
        return "\n".join(lines)

    def digest(self) -> str:
        return config_digest(self.canonical_text())


@dataclass
class LogRecord:
    step: int
    loss: float
    kg_part: float
    sub_part: float
    mean_f_pos: float
    mean_f_neg: float
    wall_ms: float


@dataclass
class TrainLog:
    records: list[LogRecord] = field(default_factory=list)
    validations: list[tuple[int, float]] = field(default_factory=list)  # (step, MRR)

    CSV_HEADER = "step,loss,kg_part,sub_part,mean_f_pos,mean_f_neg,wall_ms"

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for r in self.records:
                fh.write(f"{r.step},{r.loss!r},{r.kg_part!r},{r.sub_part!r},"
                         f"{r.mean_f_pos!r},{r.mean_f_neg!r},{r.wall_ms:.3f}\n")


def _stream_seed(seed: int, name: int, step: int) -> int:
    return int(rng_streams.stream(seed, name, step).integers(0, 2**31 - 1))


def train(dataset: KgDataset, cfg: TrainConfig, out_dir: str | None = None,
          resume_from: str | None = None) -> tuple[ModelParams, TrainLog]:
    """Run the training loop; returns final parameters and the step log.

    With ``out_dir`` set, checkpoints land in ``<out_dir>/checkpoints/``
    (periodic + ``final.ckpt`` + best-validation ``best.ckpt``) and the
    log is written to ``<out_dir>/logs/train.csv``. ``resume_from``
    continues a checkpointed run; the combination of checkpoint and
    identical config reproduces an uninterrupted run bitwise.
    """
    n_ent, n_rel = dataset.n_entities, dataset.n_relations
    sigma = cfg.resolve_sigma(n_ent)
    loss_cfg = cfg.loss_config()
    digest = cfg.digest()
    options = {"transe_norm": cfg.transe_norm} if cfg.model == "transe" else {}

    vmap: VirtualIndexMap | None = None
    if resume_from is not None:
        ckpt = load_checkpoint(resume_from, expect_model=cfg.model)
        if ckpt.params.n_entities != n_ent or ckpt.params.n_relations != n_rel:
            raise ConfigError(
                f"entity count mismatch: checkpoint {ckpt.params.n_entities}/"
                f"{ckpt.params.n_relations}, dataset {n_ent}/{n_rel}")
        params, state, start_step = ckpt.params, ckpt.state, ckpt.step
        if ckpt.virt_to_real is not None:
            vmap = VirtualIndexMap.from_permutation(ckpt.virt_to_real)
    else:
        params = init_params(cfg.model, n_ent, n_rel, cfg.dim, cfg.gamma,
                             cfg.seed, options=options)
        state = OptimizerState.for_params(params, lr=cfg.learning_rate)
        start_step = 0

    if cfg.strategy == "eans" and vmap is None:
        vmap = refresh(params, cfg.k, seed=_stream_seed(cfg.seed, rng_streams.CLUSTER, 0),
                       kmeans_iters=cfg.kmeans_iters)

    ckpt_dir = None
    if out_dir is not None:
        ckpt_dir = os.path.join(out_dir, "checkpoints")
        os.makedirs(ckpt_dir, exist_ok=True)
        os.makedirs(os.path.join(out_dir, "logs"), exist_ok=True)

    def checkpoint(name: str):
        if ckpt_dir is None:
            return
        save_checkpoint(params, state, digest, os.path.join(ckpt_dir, name),
                        seed=cfg.seed, substitution_trained=cfg.use_substitution,
                        strategy=cfg.strategy,
                        virt_to_real=None if vmap is None else vmap.virt_to_real)

    log = TrainLog()
    train_triples = dataset.train
    best_mrr = -1.0

    for step in range(start_step + 1, cfg.max_steps + 1):
        tick = time.perf_counter()
        batch_rng = rng_streams.stream(cfg.seed, rng_streams.BATCH, step)
        picks = batch_rng.integers(0, len(train_triples), size=cfg.batch_size)
        positives = train_triples[picks]

        neg_rng = rng_streams.stream(cfg.seed, rng_streams.NEGATIVES, step)
        neg = build_negative_batch(positives, cfg.strategy, cfg.negatives,
                                   dataset.filter, neg_rng, vmap=vmap,
                                   sigma=sigma, batch_index=step - 1)

        try:
            breakdown = total_loss(params, positives, neg, loss_cfg)
        except ValueError as exc:
            raise TrainingDiverged(step, str(exc)) from exc
        if not np.isfinite(breakdown.total):
            raise TrainingDiverged(step, f"non-finite loss {breakdown.total}")
        try:
            adam_step(state, params, breakdown.grads)
        except ValueError as exc:
            raise TrainingDiverged(step, str(exc)) from exc

        log.records.append(LogRecord(
            step=step,
            loss=breakdown.total,
            kg_part=breakdown.kg_part,
            sub_part=breakdown.sub_part,
            mean_f_pos=breakdown.mean_f_pos,
            mean_f_neg=breakdown.mean_f_neg,
            wall_ms=(time.perf_counter() - tick) * 1e3,
        ))

        if cfg.strategy == "eans" and step % cfg.reorder_interval == 0:
            vmap = refresh(params, cfg.k,
                           seed=_stream_seed(cfg.seed, rng_streams.CLUSTER, step),
                           kmeans_iters=cfg.kmeans_iters)

        if cfg.eval_interval and step % cfg.eval_interval == 0 and len(dataset.valid):
            metrics = evaluate(params, dataset.valid, dataset.filter)
            log.validations.append((step, metrics.mrr))
            if metrics.mrr > best_mrr:
                best_mrr = metrics.mrr
                checkpoint("best.ckpt")

        if cfg.checkpoint_interval and step % cfg.checkpoint_interval == 0:
            checkpoint(f"step{step:08d}.ckpt")

    checkpoint("final.ckpt")
    if out_dir is not None:
        log.write_csv(os.path.join(out_dir, "logs", "train.csv"))
    return params, log


# Ablation grid rows in presentation order: (gaussian sampling, substitution loss)
ABLATION_CELLS = ((False, False), (True, False), (False, True), (True, True))


def ablation_config(base_cfg: TrainConfig, gauss: bool, subs: bool) -> TrainConfig:
    return replace(base_cfg,
                   strategy="eans" if gauss else "uniform",
                   use_substitution=subs)


def run_ablation(dataset: KgDataset, base_cfg: TrainConfig,
                 seeds=(0,), split: str = "test"):
    """Train and evaluate the 2x2 grid {gaussian sampling} x {substitution}.

    Each cell reuses the base config with only the two toggles changed
    and runs once per seed; rows report the per-cell mean MRR / Hit@10.
    """
    rows = []
    eval_triples = dataset.splits[split]
    for gauss, subs in ABLATION_CELLS:
        cell_cfg = ablation_config(base_cfg, gauss, subs)
        mrrs, hit10s = [], []
        for seed in seeds:
            params, _ = train(dataset, replace(cell_cfg, seed=seed))
            metrics = evaluate(params, eval_triples, dataset.filter)
            mrrs.append(metrics.mrr)
            hit10s.append(metrics.hits[10])
        rows.append({
            "gauss": gauss,
            "subs": subs,
            "mrr": float(np.mean(mrrs)),
            "hit10": float(np.mean(hit10s)),
        })
    return rows
