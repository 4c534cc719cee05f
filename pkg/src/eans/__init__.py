"""Knowledge-graph embedding training with entity-aware negative sampling.

Negatives are drawn by adding Gaussian noise to a positive entity's
*virtual* index in a cluster-sorted ordering of all entities, so similar
entities are sampled preferentially; an auxiliary substitution loss
learns to recognize and down-weight false negatives instead of filtering
them. Five scoring models (TransE, TransD, DistMult, ComplEx, RotatE)
train under the same loop with hand-derived gradients and sparse Adam.
"""

from .dataset import FilterIndex, KgDataset, candidate_filter, contains, load_dataset
from .evaluator import Metrics, evaluate, rank_triple
from .index_space import (ClusterResult, VirtualIndexMap, kmeans, refresh,
                          reorder, sample_eans)
from .objective import LossBreakdown, LossConfig, kg_loss, sub_loss, total_loss
from .params import (Checkpoint, ModelParams, OptimizerState, adam_step,
                     entity_repr, init_params, load_checkpoint, save_checkpoint)
from .sampling import NegativeBatch, build_negative_batch, sample_uniform, self_adv_weights
from .scoring import ScoreGrad, score, score_grad, substitution_score
from .trainer import TrainConfig, TrainLog, run_ablation, train
from .toydata import generate_toy_kg, write_toy_dataset

__all__ = [
    "FilterIndex", "KgDataset", "candidate_filter", "contains", "load_dataset",
    "Metrics", "evaluate", "rank_triple",
    "ClusterResult", "VirtualIndexMap", "kmeans", "refresh", "reorder", "sample_eans",
    "LossBreakdown", "LossConfig", "kg_loss", "sub_loss", "total_loss",
    "Checkpoint", "ModelParams", "OptimizerState", "adam_step", "entity_repr",
    "init_params", "load_checkpoint", "save_checkpoint",
    "NegativeBatch", "build_negative_batch", "sample_uniform", "self_adv_weights",
    "ScoreGrad", "score", "score_grad", "substitution_score",
    "TrainConfig", "TrainLog", "run_ablation", "train",
    "generate_toy_kg", "write_toy_dataset",
]
