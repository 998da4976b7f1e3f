"""Forward passes for the sequence mixers compared in the recall study.

All mixers map an ``(N, d)`` float matrix to an ``(N, d)`` float matrix and
carry no positional information of their own.  Each has a matching
``*_naive`` loop implementation used as a test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import as_seq, causal_conv, circular_conv, softmax_rows


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ------------------------------------------------------------- parameters


@dataclass
class AttentionParams:
    W_Q: np.ndarray
    W_K: np.ndarray
    W_V: np.ndarray
    num_heads: int = 1
    variant: str = "attention"


@dataclass
class BaseConvParams:
    """``y = (u W + b1) * (h conv u + b2)`` plus an optional residual."""

    W: np.ndarray
    h: np.ndarray
    b1: np.ndarray | float = 0.0
    b2: np.ndarray | float = 0.0
    residual: bool = True
    conv_mode: str = "causal"
    conv_method: str = "auto"
    variant: str = "baseconv"


@dataclass
class HyenaParams:
    W_in: np.ndarray  # (d, (L+1) d)
    filters: list  # L filter banks, each (N or shorter, d)
    short_filter: np.ndarray | None = None  # (taps, (L+1) d); None = identity
    b_in: np.ndarray | None = None
    variant: str = "hyena"

    @property
    def order(self):
        return len(self.filters)


@dataclass
class RWKVParams:
    mu: np.ndarray  # (d,) time-shift mix in [0, 1]
    W: np.ndarray  # (d, 3d)
    w: np.ndarray  # (d,) decay exponents
    variant: str = "rwkv"


@dataclass
class RetNetParams:
    W_A: np.ndarray
    W_C: np.ndarray
    W_V: np.ndarray
    gamma: float = 1.0
    variant: str = "retnet"


@dataclass
class SelectorSpec:
    kind: str = "full"  # full | random | programmatic | learned
    p: float = 1.0
    weight: np.ndarray | None = None
    k: int | None = None
    noise: float = 0.0
    seed: int = 0
    training: bool = False

    def validate(self, n):
        if self.kind not in ("full", "random", "programmatic", "learned"):
            raise ValueError(f"unknown selector kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("selection probability must be in [0, 1]")
        if self.kind == "learned":
            if self.weight is None or self.k is None:
                raise ValueError("learned selector needs a weight vector and a budget k")
            if self.k > n:
                raise ValueError(f"budget k={self.k} exceeds sequence length {n}")


MixerParams = AttentionParams | BaseConvParams | HyenaParams | RWKVParams | RetNetParams


# -------------------------------------------------------------- attention


def causal_mask(n):
    return np.tril(np.ones((n, n), dtype=bool))


def attention_forward(u, params: AttentionParams, causal=True, use_softmax=True, bias=None, mask=None, scale=None):
    """Scaled dot-product attention.

    ``mask`` is an optional boolean ``(N, N)`` matrix of allowed pairs and is
    combined with the causal mask.  ``scale`` defaults to ``1/sqrt(d_head)``.
    Multi-head attention splits the projected channels evenly.
    """
    u = as_seq(u)
    n = u.shape[0]
    if bias is not None:
        bias = np.asarray(bias, dtype=np.float64)
        if bias.shape != (n, n):
            raise ValueError(f"bias must be ({n}, {n}), got {bias.shape}")
    allowed = np.ones((n, n), dtype=bool)
    if causal:
        allowed &= causal_mask(n)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (n, n):
            raise ValueError(f"mask must be ({n}, {n}), got {mask.shape}")
        allowed &= mask
    q, k, v = u @ params.W_Q, u @ params.W_K, u @ params.W_V
    H = params.num_heads
    if q.shape[1] % H or v.shape[1] % H:
        raise ValueError("projection width must be divisible by the head count")
    dq, dv = q.shape[1] // H, v.shape[1] // H
    s = scale if scale is not None else 1.0 / np.sqrt(dq)
    outs = []
    for h in range(H):
        qs, ks, vs = q[:, h * dq : (h + 1) * dq], k[:, h * dq : (h + 1) * dq], v[:, h * dv : (h + 1) * dv]
        scores = (qs @ ks.T) * s
        if bias is not None:
            scores = scores + bias
        if use_softmax:
            weights = softmax_rows(np.where(allowed, scores, -np.inf))
        else:
            weights = np.where(allowed, scores, 0.0)
        outs.append(weights @ vs)
    return np.hstack(outs)


def attention_naive(u, params: AttentionParams, causal=True, use_softmax=True, bias=None, mask=None, scale=None):
    u = as_seq(u)
    n = u.shape[0]
    q, k, v = u @ params.W_Q, u @ params.W_K, u @ params.W_V
    H = params.num_heads
    dq, dv = q.shape[1] // H, v.shape[1] // H
    s = scale if scale is not None else 1.0 / np.sqrt(dq)
    y = np.zeros((n, v.shape[1]))
    for h in range(H):
        for i in range(n):
            ok = [j for j in range(n) if (not causal or j <= i) and (mask is None or mask[i][j])]
            sc = {}
            for j in ok:
                val = 0.0
                for c in range(dq):
                    val += q[i, h * dq + c] * k[j, h * dq + c]
                val *= s
                if bias is not None:
                    val += bias[i][j]
                sc[j] = val
            if use_softmax and ok:
                top = max(sc.values())
                z = sum(np.exp(x - top) for x in sc.values())
                sc = {j: np.exp(x - top) / z for j, x in sc.items()}
            for j in ok:
                y[i, h * dv : (h + 1) * dv] += sc[j] * v[j, h * dv : (h + 1) * dv]
    return y


def window_mask(n, w, mode="sliding"):
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    if mode == "sliding":
        return (j <= i) & (j > i - w)
    if mode == "blocked":
        return (j <= i) & (j // w == i // w)
    raise ValueError(f"unknown window mode {mode!r}")


def windowed_attention(u, params: AttentionParams, w, mode="sliding"):
    """Causal attention restricted to a sliding window or to fixed blocks."""
    u = as_seq(u)
    n = u.shape[0]
    if not 1 <= w <= n:
        raise ValueError(f"window must be in [1, {n}]")
    return attention_forward(u, params, causal=True, mask=window_mask(n, w, mode))


# --------------------------------------------------------------- selective


def programmatic_selection(tokens):
    """1 where the token already occurred earlier in the sequence."""
    seen = set()
    out = np.zeros(len(tokens))
    for i, t in enumerate(np.asarray(tokens).tolist()):
        if t in seen:
            out[i] = 1.0
        seen.add(t)
    return out


def selection_scores(u, sel: SelectorSpec):
    """Sigmoid scores of the learned selector, noised when training."""
    z = as_seq(u) @ np.asarray(sel.weight, dtype=np.float64)
    if sel.training and sel.noise > 0:
        z = z + sel.noise * np.random.default_rng(sel.seed).standard_normal(z.shape)
    return sigmoid(z)


def selection_mask(u, tokens, sel: SelectorSpec):
    """The 0/1 selection vector ``f(u)`` and the sparsity penalty."""
    n = as_seq(u).shape[0]
    sel.validate(n)
    if sel.kind == "full":
        return np.ones(n), 0.0
    if sel.kind == "random":
        rng = np.random.default_rng(sel.seed)
        return (rng.random(n) < sel.p).astype(np.float64), 0.0
    if sel.kind == "programmatic":
        if tokens is None:
            raise ValueError("programmatic selection needs the raw token ids")
        return programmatic_selection(tokens), 0.0
    scores = selection_scores(u, sel)
    # top-k by score, ties to the earlier position
    order = np.lexsort((np.arange(n), -scores))
    f = np.zeros(n)
    f[order[: sel.k]] = 1.0
    aux = max(0.0, float(scores.sum()) - sel.k) / n
    return f, aux


def selective_attention(u, tokens, params: AttentionParams, sel: SelectorSpec):
    """Causal softmax attention whose row ``i`` is multiplied by ``f(u)[i]``.

    Returns ``(y, aux_loss)``.
    """
    f, aux = selection_mask(u, tokens, sel)
    y = attention_forward(u, params, causal=True)
    return y * f[:, None], aux


# ---------------------------------------------------------------- baseconv


def _conv(u, h, mode, method="auto"):
    if mode == "causal":
        return causal_conv(u, h, method)
    if mode == "circular":
        return circular_conv(u, h, method)
    raise ValueError(f"unknown conv mode {mode!r}")


def baseconv_forward(u, params: BaseConvParams):
    u = as_seq(u)
    W = np.asarray(params.W, dtype=np.float64)
    if W.shape[0] != u.shape[1] or W.shape[1] != u.shape[1]:
        raise ValueError(f"W must be ({u.shape[1]}, {u.shape[1]}), got {W.shape}")
    y = (u @ W + params.b1) * (_conv(u, params.h, params.conv_mode, params.conv_method) + params.b2)
    if params.residual:
        y = y + u
    return y


def baseconv_naive(u, params: BaseConvParams):
    u = as_seq(u)
    n, d = u.shape
    h = np.zeros((n, d))
    hp = as_seq(params.h)
    h[: hp.shape[0]] = hp
    b1 = np.broadcast_to(np.asarray(params.b1, dtype=np.float64), (n, d))
    b2 = np.broadcast_to(np.asarray(params.b2, dtype=np.float64), (n, d))
    y = np.zeros((n, d))
    for i in range(n):
        for t in range(d):
            lin = sum(u[i, s] * params.W[s, t] for s in range(d)) + b1[i, t]
            if params.conv_mode == "causal":
                conv = sum(h[j, t] * u[i - j, t] for j in range(i + 1))
            else:
                conv = sum(h[j, t] * u[(i - j) % n, t] for j in range(n))
            y[i, t] = lin * (conv + b2[i, t])
            if params.residual:
                y[i, t] += u[i, t]
    return y


# ---------------------------------------------------------- implicit filter


@dataclass
class ImplicitFilterParams:
    W1: np.ndarray  # (emb_dim, hidden)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (hidden, d)
    b2: np.ndarray  # (d,)


def positional_features(emb_dim, N):
    """Time plus complex-exponential features, one row per position."""
    if emb_dim < 3 or emb_dim % 2 == 0:
        raise ValueError("emb_dim must be odd and at least 3")
    t = np.linspace(0, 1, N)[:, None]
    bands = (emb_dim - 1) // 2
    t_rescaled = np.linspace(0, N - 1, N)[:, None]
    w = 2 * np.pi * t_rescaled / N
    f = np.linspace(1e-4, bands - 1, bands)[None, :]
    z = np.exp(-1j * f * w)
    return np.concatenate([t, z.real, z.imag], axis=-1)


def init_implicit_filter(emb_dim, d, hidden=16, seed=0):
    rng = np.random.default_rng(seed)
    return ImplicitFilterParams(
        W1=rng.standard_normal((emb_dim, hidden)) / np.sqrt(emb_dim),
        b1=np.zeros(hidden),
        W2=rng.standard_normal((hidden, d)) / np.sqrt(hidden),
        b2=np.zeros(d),
    )


def implicit_filter(params: ImplicitFilterParams, emb_dim, N):
    """Filter bank ``(N, d)`` produced by a 2-layer ReLU MLP over positions."""
    z = positional_features(emb_dim, N)
    hidden = np.maximum(z @ params.W1 + params.b1, 0.0)
    return hidden @ params.W2 + params.b2


# ------------------------------------------------------------------- hyena


def hyena_projection(u, params: HyenaParams):
    u = as_seq(u)
    d = u.shape[1]
    L = params.order
    if params.W_in.shape != (d, (L + 1) * d):
        raise ValueError(f"W_in must be ({d}, {(L + 1) * d}), got {params.W_in.shape}")
    z = u @ params.W_in
    if params.b_in is not None:
        z = z + params.b_in
    if params.short_filter is not None:
        z = causal_conv(z, params.short_filter)
    parts = [z[:, i * d : (i + 1) * d] for i in range(L + 1)]
    return parts[:L], parts[L]


def hyena_forward(u, params: HyenaParams):
    gates, v = hyena_projection(u, params)
    z = v
    for p, h in zip(gates, params.filters):
        z = p * causal_conv(z, h)
    return z


def hyena_naive(u, params: HyenaParams):
    u = as_seq(u)
    n, d = u.shape
    L = params.order
    zhat = np.zeros((n, (L + 1) * d))
    for i in range(n):
        for c in range((L + 1) * d):
            zhat[i, c] = sum(u[i, s] * params.W_in[s, c] for s in range(d))
    if params.b_in is not None:
        zhat = zhat + params.b_in
    if params.short_filter is not None:
        sf = as_seq(params.short_filter)
        z = np.zeros_like(zhat)
        for i in range(n):
            for c in range(zhat.shape[1]):
                z[i, c] = sum(sf[j, c] * zhat[i - j, c] for j in range(min(i + 1, sf.shape[0])))
    else:
        z = zhat
    cur = z[:, L * d :].copy()
    for ell in range(L):
        p = z[:, ell * d : (ell + 1) * d]
        h = as_seq(params.filters[ell])
        nxt = np.zeros((n, d))
        for i in range(n):
            for t in range(d):
                acc = sum(h[j, t] * cur[i - j, t] for j in range(min(i + 1, h.shape[0])))
                nxt[i, t] = p[i, t] * acc
        cur = nxt
    return cur


# -------------------------------------------------------------------- rwkv


def rwkv_decay_filter(w, N):
    """``h[i, t] = exp(w_t (i - 1))`` for ``i >= 1`` and ``h[0, t] = 1``."""
    w = np.asarray(w, dtype=np.float64)
    i = np.arange(N)[:, None]
    h = np.exp(w[None, :] * (i - 1))
    h[0] = 1.0
    return h


def rwkv_forward(u, params: RWKVParams):
    """Time shift, 3-way projection, then ``sigmoid(q) * (h conv (softmax(k) * v))``.

    The softmax over ``k`` normalizes across channels within each row, which
    keeps the layer causal.
    """
    u = as_seq(u)
    n, d = u.shape
    mu = np.asarray(params.mu, dtype=np.float64)
    shift = np.vstack([mu[None, :], (1 - mu)[None, :]])
    x = causal_conv(u, shift) if n >= 2 else u * mu
    z = x @ params.W
    q, k, v = z[:, :d], z[:, d : 2 * d], z[:, 2 * d :]
    inner = softmax_rows(k) * v
    return sigmoid(q) * causal_conv(inner, rwkv_decay_filter(params.w, n))


def rwkv_naive(u, params: RWKVParams):
    u = as_seq(u)
    n, d = u.shape
    x = np.zeros((n, d))
    for i in range(n):
        for t in range(d):
            prev = u[i - 1, t] if i > 0 else 0.0
            x[i, t] = params.mu[t] * u[i, t] + (1 - params.mu[t]) * prev
    z = x @ params.W
    q, k, v = z[:, :d], z[:, d : 2 * d], z[:, 2 * d :]
    y = np.zeros((n, d))
    for i in range(n):
        for t in range(d):
            acc = 0.0
            for j in range(i + 1):
                lag = i - j
                h = 1.0 if lag == 0 else np.exp(params.w[t] * (lag - 1))
                e = np.exp(k[j] - k[j].max())
                acc += h * e[t] / e.sum() * v[j, t]
            y[i, t] = acc / (1.0 + np.exp(-q[i, t]))
    return y


# ------------------------------------------------------------------ retnet


def retnet_forward(u, params: RetNetParams):
    """Recurrent retention: ``z^n = gamma z^{n-1} + A[n]^T V[n]``,
    ``Out[n] = C[n] z^n`` (including ``n = 0``)."""
    if not 0.0 <= params.gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    u = as_seq(u)
    A, C, V = u @ params.W_A, u @ params.W_C, u @ params.W_V
    n = u.shape[0]
    out = np.zeros((n, V.shape[1]))
    z = np.zeros((A.shape[1], V.shape[1]))
    for t in range(n):
        z = params.gamma * z + np.outer(A[t], V[t])
        out[t] = C[t] @ z
    return out


def retnet_state_closed_form(u, params: RetNetParams, n):
    """``z^n = W_A^T (sum_i gamma^{n-i} u[i]^T u[i]) W_V``."""
    u = as_seq(u)
    weights = np.array([float(params.gamma) ** (n - i) for i in range(n + 1)])
    M = (u[: n + 1] * weights[:, None]).T @ u[: n + 1]
    return params.W_A.T @ M @ params.W_V


def retnet_closed_form(u, params: RetNetParams):
    u = as_seq(u)
    C = u @ params.W_C
    return np.vstack([C[t] @ retnet_state_closed_form(u, params, t) for t in range(u.shape[0])])


def retnet_parallel(u, params: RetNetParams):
    """Masked-decay matrix form ``((C A^T) * D) V`` with ``D[n, i] = gamma^{n-i}``."""
    u = as_seq(u)
    A, C, V = u @ params.W_A, u @ params.W_C, u @ params.W_V
    n = u.shape[0]
    i = np.arange(n)
    lag = i[:, None] - i[None, :]
    D = np.where(lag >= 0, float(params.gamma) ** np.maximum(lag, 0), 0.0)
    return ((C @ A.T) * D) @ V
