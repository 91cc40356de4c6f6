"""Forward/backward pairs for the handful of ops the classifier needs.

Each ``*_forward`` returns ``(out, cache)``; the matching ``*_backward``
takes the cache and the upstream gradient and returns input/parameter
gradients. Everything is plain numpy and works in float32 or float64.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

MASK_VALUE = -1e9


def sigmoid(z):
    # split by sign so neither branch overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits(z, y):
    """Elementwise binary cross-entropy on logits; stable for large |z|."""
    return np.logaddexp(0.0, z) - y * z


def embedding_forward(table, ids):
    return table[ids], ids


def embedding_backward(cache, dout, table_shape):
    ids = cache
    grad = scatter_rows(ids.reshape(-1), dout.reshape(-1, table_shape[1]), table_shape[0])
    grad[0] = 0.0  # PAD row stays at zero
    return grad


def scatter_rows(rows, values, n_rows):
    """out[rows[i]] += values[i] with repeated rows summed; np.add.at is far slower."""
    dim = values.shape[-1]
    flat = (rows.reshape(-1, 1) * dim + np.arange(dim)).ravel()
    out = np.bincount(flat, weights=values.reshape(-1).astype(np.float64), minlength=n_rows * dim)
    return out.reshape(n_rows, dim).astype(values.dtype)


def conv_maxpool_forward(x, w, b, k):
    """1-D valid convolution of width ``k`` over axis 1, then ReLU(max over time).

    x: (B, L, D); w: (k*D, F); b: (F,). Returns (B, F).
    ReLU is monotone so relu(max(z)) == max(relu(z)); pooling first is cheaper.
    """
    B, L, D = x.shape
    T = L - k + 1
    if T < 1:
        raise ValueError(f"sequence length {L} shorter than kernel {k}")
    cols = sliding_window_view(x, k, axis=1).transpose(0, 1, 3, 2).reshape(B * T, k * D)
    z = (cols @ w).reshape(B, T, -1)
    idx = z.argmax(axis=1)  # (B, F)
    m = np.take_along_axis(z, idx[:, None, :], axis=1)[:, 0, :] + b
    out = np.maximum(m, 0.0)
    return out, (x, w, idx, m, k)


def conv_maxpool_backward(cache, dout, ids=None, n_rows=None):
    """Gradients of :func:`conv_maxpool_forward`.

    Returns (dx, dw, db). When ``x`` is an embedding lookup of ``ids``,
    passing ``ids`` and the table size returns the table gradient in place
    of dx, without materializing the (B, L, D) input gradient.
    """
    x, w, idx, m, k = cache
    B, L, D = x.shape
    F = w.shape[1]
    g = dout * (m > 0)
    db = g.sum(axis=0)
    pos = idx[:, :, None] + np.arange(k)  # (B, F, k)
    bi = np.arange(B)[:, None, None]
    xg = x[bi, pos].reshape(B, F, k * D)  # the winning window of each filter
    dw = (xg.transpose(1, 2, 0) @ g.T[:, :, None])[:, :, 0].T  # (k*D, F)
    if ids is not None:
        # weight[c, j, f] = sum of g[b, f] over windows whose j-th char is c
        flat = (ids[bi, pos] * k + np.arange(k)) * F + np.arange(F)[None, :, None]
        weight = np.bincount(flat.ravel(), weights=np.broadcast_to(g[:, :, None], (B, F, k)).ravel().astype(np.float64),
                             minlength=n_rows * k * F).astype(x.dtype)
        wt = w.reshape(k, D, F).transpose(0, 2, 1).reshape(k * F, D)
        return weight.reshape(n_rows, k * F) @ wt, dw, db
    wr = w.reshape(k, D, F).transpose(2, 0, 1)  # (F, k, D)
    dx = scatter_rows(bi * L + pos, g[:, :, None, None] * wr[None], B * L).reshape(B, L, D)
    return dx, dw, db


def dense_forward(x, w, b):
    return x @ w + b, x


def dense_backward(cache, dout, w):
    x = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(cache, dout):
    return dout * cache


def softmax(s, axis=-1):
    s = s - s.max(axis=axis, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=axis, keepdims=True)


def attention_forward(x, mask, wq, wk, wv, wo, bo):
    """Single-head self-attention with a residual connection and masked mean pooling.

    x: (B, M, D); mask: (B, M) bool, True for real tokens. Returns (B, D).
    """
    D = x.shape[-1]
    scale = 1.0 / np.sqrt(D)
    q, kk, v = x @ wq, x @ wk, x @ wv
    s = (q @ kk.transpose(0, 2, 1)) * scale
    s = s + np.where(mask[:, None, :], 0.0, MASK_VALUE).astype(x.dtype)
    a = softmax(s)
    c = a @ v
    y = x + c @ wo + bo
    mf = mask.astype(x.dtype)
    cnt = np.maximum(mf.sum(axis=1), 1.0)
    pooled = (y * mf[:, :, None]).sum(axis=1) / cnt[:, None]
    return pooled, (x, mf, cnt, q, kk, v, a, c, scale)


def attention_backward(cache, dout, wq, wk, wv, wo):
    x, mf, cnt, q, kk, v, a, c, scale = cache
    dy = dout[:, None, :] * (mf / cnt[:, None])[:, :, None]
    dbo = dy.sum(axis=(0, 1))
    dwo = _outer_sum(c, dy)
    dc = dy @ wo.T
    da = dc @ v.transpose(0, 2, 1)
    dv = a.transpose(0, 2, 1) @ dc
    ds = a * (da - (da * a).sum(axis=-1, keepdims=True)) * scale
    dq = ds @ kk
    dk = ds.transpose(0, 2, 1) @ q
    dwq = _outer_sum(x, dq)
    dwk = _outer_sum(x, dk)
    dwv = _outer_sum(x, dv)
    dx = dy + dq @ wq.T + dk @ wk.T + dv @ wv.T
    return dx, dwq, dwk, dwv, dwo, dbo


def _outer_sum(a, b):
    """sum over batch and time of a[..., :, None] * b[..., None, :]."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def span_matrix(spans, length, dtype):
    """(B, M, 2) [start, end) spans -> (B, M, length) averaging weights (rows sum to 1 or 0)."""
    pos = np.arange(length)
    start = spans[..., 0:1]
    end = spans[..., 1:2]
    inside = (pos >= start) & (pos < end)
    n = np.maximum(end - start, 1).astype(dtype)
    return inside.astype(dtype) / n
