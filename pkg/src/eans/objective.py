"""Training objective: margin logsigmoid KG loss plus substitution loss.

Per positive triple with n negatives, weights w (summing to 1), labels y
(1 marks a corruption that is a training-set member), and substitution
scores f_sub between the replaced entity and its replacement:

    L_KG  = -log sig(gamma - f_pos)
            - sum_i w_i (1 - y_i) log sig(f_neg_i - l1 * f_sub_i - gamma)
    L_SUB = -(l2 / n) sum_i y_i log sig(f_sub_i)  +  l1_reg * | sum_i f_sub_i |
    L     = L_KG + L_SUB

With substitution disabled the f_sub terms vanish (l1 = 0, L_SUB = 0)
but labels still mask known-true corruptions. log sig is evaluated as
-softplus(-x); everything here is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import sigmoid, softplus
from .params import ModelParams
from .sampling import NegativeBatch, self_adv_weights
from .scoring import score_grad_batch


@dataclass
class LossConfig:
    gamma: float
    lambda1: float = 0.0
    lambda2: float = 0.0
    lambda1_reg: float | None = None   # defaults to lambda1 (one knob, two roles)
    alpha: float | None = None         # absent -> uniform 1/n weighting
    use_substitution: bool = False
    use_self_adv: bool = False
    sub_reg: str = "abs-of-sum"        # or "sum-of-abs"

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda weights must be non-negative")
        if self.sub_reg not in ("abs-of-sum", "sum-of-abs"):
            raise ValueError(f"unknown sub_reg mode {self.sub_reg!r}")

    @property
    def reg_weight(self) -> float:
        return self.lambda1 if self.lambda1_reg is None else self.lambda1_reg


@dataclass
class LossBreakdown:
    total: float
    kg_part: float
    sub_part: float
    # table -> (row indices, gradient rows); duplicates summed by the optimizer
    grads: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    mean_f_pos: float = 0.0
    mean_f_neg: float = 0.0


def _as_2d(*arrays):
    out = [np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in arrays]
    return out


def kg_loss(f_pos, f_negs, f_subs, y, weights, cfg: LossConfig):
    """Per-positive KG loss and its score-space gradient coefficients.

    Accepts a single positive (scalars / length-n vectors) or a batch
    (shape (B,) / (B, n)). Returns ``(loss, d_pos, d_neg, d_sub)`` with
    the input's leading shape; no batch reduction happens here.
    """
    f_pos_arr = np.asarray(f_pos, dtype=np.float64)
    scalar = f_pos_arr.ndim == 0
    f_negs, f_subs, y, weights = _as_2d(f_negs, f_subs, y, weights)
    f_pos_arr = np.atleast_1d(f_pos_arr)
    for name, arr in (("f_pos", f_pos_arr), ("f_negs", f_negs), ("f_subs", f_subs)):
        if not np.isfinite(arr).all():
            raise ValueError(f"non-finite {name}")

    lam1 = cfg.lambda1 if cfg.use_substitution else 0.0
    mask = weights * (1.0 - y)
    a = f_negs - lam1 * f_subs - cfg.gamma
    loss = softplus(f_pos_arr - cfg.gamma) + (mask * softplus(-a)).sum(axis=1)

    d_pos = sigmoid(f_pos_arr - cfg.gamma)
    neg_sig = mask * sigmoid(-a)
    d_neg = -neg_sig
    d_sub = lam1 * neg_sig
    if scalar:
        return float(loss[0]), float(d_pos[0]), d_neg[0], d_sub[0]
    return loss, d_pos, d_neg, d_sub


def sub_loss(f_subs, y, cfg: LossConfig):
    """Per-positive substitution loss and gradient coefficients.

    The regularizer is the absolute value of the *sum* of the n
    substitution scores (mode "abs-of-sum"); "sum-of-abs" penalizes each
    score instead.
    """
    f_arr = np.asarray(f_subs, dtype=np.float64)
    scalar = f_arr.ndim <= 1
    f_subs, y = _as_2d(f_subs, y)
    if not np.isfinite(f_subs).all():
        raise ValueError("non-finite f_subs")
    n = f_subs.shape[1]

    fit = -(cfg.lambda2 / n) * (y * (-softplus(-f_subs))).sum(axis=1)
    d = -(cfg.lambda2 / n) * y * sigmoid(-f_subs)
    if cfg.sub_reg == "abs-of-sum":
        total = f_subs.sum(axis=1)
        reg = cfg.reg_weight * np.abs(total)
        d = d + cfg.reg_weight * np.sign(total)[:, None]
    else:
        reg = cfg.reg_weight * np.abs(f_subs).sum(axis=1)
        d = d + cfg.reg_weight * np.sign(f_subs)
    loss = fit + reg
    if scalar:
        return float(loss[0]), d[0]
    return loss, d


def _accumulate(table_grads, contribs, coeff):
    """Chain-rule score gradients into flat per-table (idx, rows) lists."""
    for table, idx, grad in contribs:
        rows = grad * coeff[..., None]
        table_grads.setdefault(table, ([], []))
        table_grads[table][0].append(np.asarray(idx).ravel())
        table_grads[table][1].append(rows.reshape(-1, rows.shape[-1]))


def total_loss(params: ModelParams, positives: np.ndarray, neg: NegativeBatch,
               cfg: LossConfig) -> LossBreakdown:
    """Full objective over one batch, mean-reduced over positives.

    Computes all scores, assembles L_KG + L_SUB, and routes the loss
    coefficients through the analytic score gradients into one sparse
    gradient map covering every touched row (entity rows, relation rows,
    and the substitution relation row when enabled).
    """
    positives = np.asarray(positives, dtype=np.int64)
    batch = len(positives)
    h, r, t = positives[:, 0], positives[:, 1], positives[:, 2]
    corrupt = neg.entities
    y = neg.labels.astype(np.float64)

    f_pos, pos_contribs = score_grad_batch(params, h, r, t)
    if neg.side == "head":
        f_neg, neg_contribs = score_grad_batch(params, corrupt, r[:, None], t[:, None])
        replaced = h
    else:
        f_neg, neg_contribs = score_grad_batch(params, h[:, None], r[:, None], corrupt)
        replaced = t

    if cfg.use_substitution:
        f_sub, sub_contribs = score_grad_batch(
            params, replaced[:, None], params.r_sub, corrupt)
    else:
        f_sub, sub_contribs = np.zeros_like(f_neg), None

    if cfg.use_self_adv and cfg.alpha is not None:
        weights = self_adv_weights(f_neg, cfg.alpha)
    else:
        weights = np.full_like(f_neg, 1.0 / neg.n)

    kg_vals, d_pos, d_neg, d_sub_kg = kg_loss(f_pos, f_neg, f_sub, y, weights, cfg)
    kg_part = float(kg_vals.mean())
    if cfg.use_substitution:
        sub_vals, d_sub_fit = sub_loss(f_sub, y, cfg)
        sub_part = float(sub_vals.mean())
        d_sub = d_sub_kg + d_sub_fit
    else:
        sub_part = 0.0
        d_sub = None

    table_grads: dict[str, tuple[list, list]] = {}
    _accumulate(table_grads, pos_contribs, d_pos / batch)
    _accumulate(table_grads, neg_contribs, d_neg / batch)
    if d_sub is not None:
        _accumulate(table_grads, sub_contribs, d_sub / batch)

    grads = {
        table: (np.concatenate(idx_parts), np.concatenate(row_parts))
        for table, (idx_parts, row_parts) in table_grads.items()
    }
    return LossBreakdown(total=kg_part + sub_part, kg_part=kg_part,
                         sub_part=sub_part, grads=grads,
                         mean_f_pos=float(f_pos.mean()),
                         mean_f_neg=float(f_neg.mean()))
