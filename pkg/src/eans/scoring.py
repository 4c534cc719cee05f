"""Triple dissimilarity scores and their analytic gradients.

Convention: f(h, r, t) is a dissimilarity for every model, lower means
more plausible. The bilinear models (DistMult, ComplEx) are negated to
fit. Formulas:

    transe    f = ||h + r - t||_1          (or L2 via the transe_norm option)
    transd    f = ||h_p + r - t_p||_2,  e_p = e + (w_e . e) w_r
    distmult  f = -sum_i h_i r_i t_i
    complex   f = -Re(sum_i h_i r_i conj(t_i))
    rotate    f = ||h o r - t||_2,  r_i = exp(i theta_i)

All arithmetic is float64 regardless of table dtype. Batched entry
points broadcast the three index arrays; gradient results come back as
``(table, row_indices, grad_rows)`` contributions whose leading shape
matches the score array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ModelParams

# contribution: (table name, index array of f.shape, grads of f.shape + (d,))
Contribs = list[tuple[str, np.ndarray, np.ndarray]]


@dataclass
class ScoreGrad:
    value: float
    grads: dict[tuple[str, int], np.ndarray]


def _rows(params: ModelParams, table: str, idx) -> np.ndarray:
    return params.tables[table][idx].astype(np.float64)


def _safe_unit(vec: np.ndarray, norm: np.ndarray) -> np.ndarray:
    """vec / norm with the zero-norm subgradient (0) at the kink."""
    denom = np.where(norm == 0.0, 1.0, norm)
    return vec / denom[..., None]


def _transe(params, h, r, t, want_grads):
    diff = _rows(params, "ent", h) + _rows(params, "rel", r) - _rows(params, "ent", t)
    if params.options.get("transe_norm", "l1") == "l2":
        f = np.sqrt((diff * diff).sum(axis=-1))
        if not want_grads:
            return f, None
        u = _safe_unit(diff, f)
    else:
        f = np.abs(diff).sum(axis=-1)
        if not want_grads:
            return f, None
        u = np.sign(diff)
    return f, [("ent", h, u), ("rel", r, u), ("ent", t, -u)]


def _transd(params, h, r, t, want_grads):
    eh = _rows(params, "ent", h)
    et = _rows(params, "ent", t)
    wh = _rows(params, "ent_p", h)
    wt = _rows(params, "ent_p", t)
    rr = _rows(params, "rel", r)
    wr = _rows(params, "rel_p", r)
    ch = (wh * eh).sum(axis=-1, keepdims=True)  # (w_h . h)
    ct = (wt * et).sum(axis=-1, keepdims=True)
    v = eh + ch * wr + rr - et - ct * wr
    f = np.sqrt((v * v).sum(axis=-1))
    if not want_grads:
        return f, None
    u = _safe_unit(v, f)
    uwr = (u * wr).sum(axis=-1, keepdims=True)  # (u . w_r)
    return f, [
        ("ent", h, u + uwr * wh),
        ("ent_p", h, uwr * eh),
        ("rel", r, u),
        ("rel_p", r, (ch - ct) * u),
        ("ent", t, -(u + uwr * wt)),
        ("ent_p", t, -uwr * et),
    ]


def _distmult(params, h, r, t, want_grads):
    eh = _rows(params, "ent", h)
    et = _rows(params, "ent", t)
    rr = _rows(params, "rel", r)
    # grouping (h o t) o r keeps f(h,r,t) == f(t,r,h) bitwise
    f = -((eh * et) * rr).sum(axis=-1)
    if not want_grads:
        return f, None
    return f, [("ent", h, -rr * et), ("rel", r, -eh * et), ("ent", t, -eh * rr)]


def _complex(params, h, r, t, want_grads):
    hre, him = _rows(params, "ent_re", h), _rows(params, "ent_im", h)
    tre, tim = _rows(params, "ent_re", t), _rows(params, "ent_im", t)
    rre, rim = _rows(params, "rel_re", r), _rows(params, "rel_im", r)
    f = -((hre * tre + him * tim) * rre + (hre * tim - him * tre) * rim).sum(axis=-1)
    if not want_grads:
        return f, None
    return f, [
        ("ent_re", h, -(tre * rre + tim * rim)),
        ("ent_im", h, tre * rim - tim * rre),
        ("rel_re", r, -(tre * hre + tim * him)),
        ("rel_im", r, tre * him - tim * hre),
        ("ent_re", t, -(hre * rre - him * rim)),
        ("ent_im", t, -(hre * rim + him * rre)),
    ]


def _rotate(params, h, r, t, want_grads):
    hre, him = _rows(params, "ent_re", h), _rows(params, "ent_im", h)
    tre, tim = _rows(params, "ent_re", t), _rows(params, "ent_im", t)
    theta = _rows(params, "rel_phase", r)
    c, s = np.cos(theta), np.sin(theta)
    rot_re = hre * c - him * s
    rot_im = hre * s + him * c
    dre = rot_re - tre
    dim_ = rot_im - tim
    f = np.sqrt((dre * dre + dim_ * dim_).sum(axis=-1))
    if not want_grads:
        return f, None
    ure = _safe_unit(dre, f)
    uim = _safe_unit(dim_, f)
    return f, [
        ("ent_re", h, ure * c + uim * s),
        ("ent_im", h, -ure * s + uim * c),
        ("rel_phase", r, -ure * rot_im + uim * rot_re),
        ("ent_re", t, -ure),
        ("ent_im", t, -uim),
    ]


_SCORERS = {
    "transe": _transe,
    "transd": _transd,
    "distmult": _distmult,
    "complex": _complex,
    "rotate": _rotate,
}


def scores_batch(params: ModelParams, h, r, t) -> np.ndarray:
    """Dissimilarity over broadcast index arrays, float64."""
    h, r, t = np.broadcast_arrays(np.asarray(h), np.asarray(r), np.asarray(t))
    f, _ = _SCORERS[params.kind](params, h, r, t, want_grads=False)
    return f


def score_grad_batch(params: ModelParams, h, r, t):
    """Scores plus per-slot gradient contributions for a broadcast batch."""
    h, r, t = np.broadcast_arrays(np.asarray(h), np.asarray(r), np.asarray(t))
    return _SCORERS[params.kind](params, h, r, t, want_grads=True)


def score(params: ModelParams, triple) -> float:
    """Dissimilarity of one (h, r, t); relation may be the substitution row."""
    h, r, t = triple
    return float(scores_batch(params, int(h), int(r), int(t)))


def score_grad(params: ModelParams, triple) -> ScoreGrad:
    """Score with exact analytic partials for every table row it reads."""
    h, r, t = (int(x) for x in triple)
    f, contribs = score_grad_batch(params, h, r, t)
    grads: dict[tuple[str, int], np.ndarray] = {}
    for table, idx, grad in contribs:
        key = (table, int(idx))
        grad = np.array(grad, dtype=np.float64).reshape(-1)
        if key in grads:
            grads[key] = grads[key] + grad
        else:
            grads[key] = grad
    return ScoreGrad(value=float(f), grads=grads)


def substitution_score(params: ModelParams, e_pos: int, e_neg: int) -> float:
    """Score of (e_pos, r_sub, e_neg): can e_neg stand in for e_pos."""
    return score(params, (e_pos, params.r_sub, e_neg))


def substitution_score_grad(params: ModelParams, e_pos: int, e_neg: int) -> ScoreGrad:
    return score_grad(params, (e_pos, params.r_sub, e_neg))


def candidate_scores(params: ModelParams, side: str, entity: int, relation: int) -> np.ndarray:
    """Scores of all |E| completions of a partial triple.

    ``side="tail"`` scores f(entity, relation, c) for every candidate c;
    ``side="head"`` scores f(c, relation, entity).
    """
    cands = np.arange(params.n_entities)
    if side == "tail":
        return scores_batch(params, entity, relation, cands)
    if side == "head":
        return scores_batch(params, cands, relation, entity)
    raise ValueError(f"side must be 'head' or 'tail', got {side!r}")
