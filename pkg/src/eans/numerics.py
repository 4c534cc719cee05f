"""Stable elementwise primitives used by the losses and samplers."""

import numpy as np


def softplus(x):
    """log(1 + exp(x)) without overflow for large |x|."""
    return np.logaddexp(0.0, x)


def log_sigmoid(x):
    """log(sigmoid(x)) = -softplus(-x)."""
    return -np.logaddexp(0.0, -x)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax_rows(x):
    """Row-wise softmax with max subtraction; accepts 1-d or 2-d input."""
    x = np.asarray(x, dtype=np.float64)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)
