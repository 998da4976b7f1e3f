"""A small numpy trainer for two-block attention and BaseConv language models.

Model (pre-norm, one head)::

    x = Embed[tokens] (+ Pos for attention)
    for each of the 2 blocks:
        x = x + Mixer(LN(x))
        x = x + MLP(LN(x))          # ReLU, width = mult * d
    logits = LN(x)[label positions] @ W_out + b_out

Mixers:

* ``attention``: ``softmax(q k^T / sqrt(d) + causal mask) v W_O``
* ``baseconv``:  ``(a W + b1) * (h conv a + b2)`` with an explicit ``(N, d)``
  filter and ``(N, d)`` biases.

Gradients are written out by hand; :func:`fd_gradcheck` compares them with
central differences.  The loss is the mean cross-entropy over label
positions only.
"""

from __future__ import annotations

import csv
import io
import math
import os
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .datagen import GenConfig, gen_mqar

LN_EPS = 1e-5


@dataclass(frozen=True)
class ModelSpec:
    variant: str  # "attention" | "baseconv"
    d_model: int
    vocab: int  # includes the pad id
    seq_len: int
    n_layers: int = 2
    mlp_mult: int = 2
    pos_emb: bool | None = None  # default: attention only
    tied: bool = False

    def __post_init__(self):
        if self.variant not in ("attention", "baseconv"):
            raise ValueError(f"trainable variants are attention and baseconv, got {self.variant!r}")
        if self.n_layers != 2:
            raise ValueError("models have exactly two sequence-mixing blocks")
        if min(self.d_model, self.vocab, self.seq_len, self.mlp_mult) < 1:
            raise ValueError("widths must be positive")

    @property
    def use_pos(self):
        return self.variant == "attention" if self.pos_emb is None else self.pos_emb


@dataclass
class TrainConfig:
    lrs: tuple = tuple(float(x) for x in np.logspace(-4, -2, 4))
    epochs: int = 64
    batch_size: int = 64
    weight_decay: float = 0.1
    warmup: float = 0.1
    betas: tuple = (0.9, 0.95)
    seed: int = 0
    train_size: int = 10_000
    test_size: int = 1_000
    num_pairs: int | None = None  # None: seq_len // 8
    alpha: float = 0.1
    vocab_size: int = 8192
    # Stop a run early once test accuracy reaches this value (None = never).
    early_stop: float | None = None
    # Parameter and activation precision; sweeps may use float32 for speed.
    dtype: str = "float64"

    def batch_for(self, seq_len, d_model):
        if seq_len >= 512 or d_model >= 512:
            return min(self.batch_size, 8)
        if seq_len >= 256 or d_model >= 256:
            return min(self.batch_size, 16)
        return self.batch_size

    def pairs_for(self, seq_len):
        return self.num_pairs if self.num_pairs is not None else max(1, seq_len // 8)


@dataclass
class Batch:
    tokens: np.ndarray  # (B, N) int
    lb: np.ndarray  # label batch index
    lp: np.ndarray  # label position
    lt: np.ndarray  # label target

    def __post_init__(self):
        B, N = self.tokens.shape
        if self.lp.size and (self.lp.min() < 0 or self.lp.max() >= N):
            raise ValueError("label position out of range")
        if self.lb.size and (self.lb.min() < 0 or self.lb.max() >= B):
            raise ValueError("label batch index out of range")


def make_batch(instances):
    tokens = np.stack([np.asarray(x.tokens, dtype=np.int64) for x in instances])
    lb, lp, lt = [], [], []
    for b, inst in enumerate(instances):
        for pos, target in inst.labels:
            lb.append(b)
            lp.append(pos)
            lt.append(target)
    return Batch(tokens, np.array(lb, dtype=np.int64), np.array(lp, dtype=np.int64), np.array(lt, dtype=np.int64))


# ------------------------------------------------------------------ params


def init_model(spec: ModelSpec, seed=0):
    rng = np.random.default_rng(np.random.SeedSequence([int.from_bytes(b"init", "little"), seed]))
    d, V, N, H = spec.d_model, spec.vocab, spec.seq_len, spec.mlp_mult * spec.d_model
    std = 0.02
    p = {"embed": rng.normal(0, std, (V, d))}
    if spec.use_pos:
        p["pos"] = rng.normal(0, std, (N, d))
    for l in range(spec.n_layers):
        pre = f"b{l}."
        p[pre + "ln1.g"] = np.ones(d)
        p[pre + "ln1.b"] = np.zeros(d)
        if spec.variant == "attention":
            for name in ("W_Q", "W_K", "W_V", "W_O"):
                p[pre + name] = rng.normal(0, 1 / math.sqrt(d), (d, d))
        else:
            p[pre + "W"] = rng.normal(0, 1 / math.sqrt(d), (d, d))
            p[pre + "b1"] = np.zeros((N, d))
            p[pre + "h"] = rng.normal(0, 1 / math.sqrt(N), (N, d))
            p[pre + "b2"] = np.zeros((N, d))
        p[pre + "ln2.g"] = np.ones(d)
        p[pre + "ln2.b"] = np.zeros(d)
        p[pre + "mlp.W1"] = rng.normal(0, 1 / math.sqrt(d), (d, H))
        p[pre + "mlp.c1"] = np.zeros(H)
        p[pre + "mlp.W2"] = rng.normal(0, 1 / math.sqrt(H), (H, d))
        p[pre + "mlp.c2"] = np.zeros(d)
    p["lnf.g"] = np.ones(d)
    p["lnf.b"] = np.zeros(d)
    if not spec.tied:
        p["head.W"] = rng.normal(0, 1 / math.sqrt(d), (d, V))
    p["head.b"] = np.zeros(V)
    return p


def decays(name):
    """Weight decay applies to matrices, not to norms, biases or embeddings."""
    return name.endswith(("W_Q", "W_K", "W_V", "W_O", ".W", "W1", "W2", "head.W", ".h"))


# ------------------------------------------------------------- primitives


def _ln_fwd(x, g, b):
    mu = x.mean(-1, keepdims=True)
    var = x.var(-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * rstd
    return xhat * g + b, (xhat, rstd, g)


def _ln_bwd(dy, cache):
    xhat, rstd, g = cache
    dg = np.sum(dy * xhat, axis=tuple(range(dy.ndim - 1)))
    db = np.sum(dy, axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    dx = rstd * (dxhat - dxhat.mean(-1, keepdims=True) - xhat * (dxhat * xhat).mean(-1, keepdims=True))
    return dx, dg, db


def _outer_sum(x, y):
    """``sum_{b,n} x[b,n,:]^T y[b,n,:]`` as one matrix product."""
    return x.reshape(-1, x.shape[-1]).T @ y.reshape(-1, y.shape[-1])


def _fft_conv(u, h):
    """Batched causal convolution of ``(B, N, d)`` with ``(N, d)``."""
    N = u.shape[1]
    n = 2 * N
    U = np.fft.rfft(u, n=n, axis=1)
    Hf = np.fft.rfft(h, n=n, axis=0)
    return np.fft.irfft(U * Hf[None], n=n, axis=1)[:, :N], (U, Hf)


def _fft_conv_bwd(g, cache, N):
    U, Hf = cache
    n = 2 * N
    G = np.fft.rfft(g, n=n, axis=1)
    du = np.fft.irfft(G * np.conj(Hf)[None], n=n, axis=1)[:, :N]
    dh = np.fft.irfft(np.sum(G * np.conj(U), axis=0), n=n, axis=0)[:N]
    return du, dh


def _attn_fwd(a, p, pre):
    B, N, d = a.shape
    q, k, v = a @ p[pre + "W_Q"], a @ p[pre + "W_K"], a @ p[pre + "W_V"]
    s = 1.0 / math.sqrt(d)
    S = (q @ np.swapaxes(k, 1, 2)) * s
    mask = np.triu(np.ones((N, N), dtype=bool), 1)
    S = np.where(mask[None], -np.inf, S)
    S = S - S.max(-1, keepdims=True)
    A = np.exp(S)
    A /= A.sum(-1, keepdims=True)
    o = A @ v
    return o @ p[pre + "W_O"], (a, q, k, v, A, o, s)


def _attn_bwd(dm, cache, p, pre, g):
    a, q, k, v, A, o, s = cache
    g[pre + "W_O"] = _outer_sum(o, dm)
    do = dm @ p[pre + "W_O"].T
    dv = np.swapaxes(A, 1, 2) @ do
    dA = do @ np.swapaxes(v, 1, 2)
    dS = A * (dA - np.sum(dA * A, -1, keepdims=True))
    dq = dS @ k * s
    dk = np.swapaxes(dS, 1, 2) @ q * s
    g[pre + "W_Q"] = _outer_sum(a, dq)
    g[pre + "W_K"] = _outer_sum(a, dk)
    g[pre + "W_V"] = _outer_sum(a, dv)
    return dq @ p[pre + "W_Q"].T + dk @ p[pre + "W_K"].T + dv @ p[pre + "W_V"].T


def _bc_fwd(a, p, pre):
    P = a @ p[pre + "W"] + p[pre + "b1"][None]
    conv, cc = _fft_conv(a, p[pre + "h"])
    Cv = conv + p[pre + "b2"][None]
    return P * Cv, (a, P, Cv, cc)


def _bc_bwd(dm, cache, p, pre, g):
    a, P, Cv, cc = cache
    dP = dm * Cv
    dC = dm * P
    g[pre + "W"] = _outer_sum(a, dP)
    g[pre + "b1"] = dP.sum(0)
    g[pre + "b2"] = dC.sum(0)
    du, dh = _fft_conv_bwd(dC, cc, a.shape[1])
    g[pre + "h"] = dh
    return dP @ p[pre + "W"].T + du


# ------------------------------------------------------------ forward/back


def _head_W(spec, p):
    return p["embed"].T if spec.tied else p["head.W"]


def forward(spec: ModelSpec, p, batch: Batch):
    """Returns ``(loss, logits, cache)``; logits are ``(num_labels, vocab)``."""
    tokens = batch.tokens
    B, N = tokens.shape
    if N != spec.seq_len and spec.use_pos:
        raise ValueError("sequence length differs from the model's position table")
    if spec.variant == "baseconv" and N != spec.seq_len:
        raise ValueError("sequence length differs from the model's filter length")
    x = p["embed"][tokens]
    if spec.use_pos:
        x = x + p["pos"][None, :N]
    caches = []
    for l in range(spec.n_layers):
        pre = f"b{l}."
        a, ln1 = _ln_fwd(x, p[pre + "ln1.g"], p[pre + "ln1.b"])
        if spec.variant == "attention":
            m, mc = _attn_fwd(a, p, pre)
        else:
            m, mc = _bc_fwd(a, p, pre)
        x = x + m
        a2, ln2 = _ln_fwd(x, p[pre + "ln2.g"], p[pre + "ln2.b"])
        hpre = a2 @ p[pre + "mlp.W1"] + p[pre + "mlp.c1"]
        hact = np.maximum(hpre, 0.0)
        x = x + hact @ p[pre + "mlp.W2"] + p[pre + "mlp.c2"]
        caches.append((ln1, mc, ln2, a2, hpre, hact))
    xf, lnf = _ln_fwd(x, p["lnf.g"], p["lnf.b"])
    sel = xf[batch.lb, batch.lp]
    logits = sel @ _head_W(spec, p) + p["head.b"]
    z = logits - logits.max(-1, keepdims=True)
    logz = np.log(np.exp(z).sum(-1))
    n_lab = max(len(batch.lt), 1)
    # reduce in double, in a fixed order
    loss = float(np.sum((logz - z[np.arange(len(batch.lt)), batch.lt]).astype(np.float64)) / n_lab)
    return loss, logits, (caches, lnf, sel, z, logz, xf)


def forward_loss(spec, p, batch):
    loss, logits, _ = forward(spec, p, batch)
    return loss, logits


def backward(spec: ModelSpec, p, batch: Batch, cache=None):
    """Gradients of the mean label cross-entropy for every parameter."""
    if cache is None:
        _, _, cache = forward(spec, p, batch)
    caches, lnf, sel, z, logz, xf = cache
    B, N = batch.tokens.shape
    n_lab = max(len(batch.lt), 1)
    g = {}
    probs = np.exp(z - logz[:, None])
    probs[np.arange(len(batch.lt)), batch.lt] -= 1.0
    dlogits = probs / n_lab
    Wh = _head_W(spec, p)
    g["head.b"] = dlogits.sum(0)
    dWh = sel.T @ dlogits
    dsel = dlogits @ Wh.T
    dxf = np.zeros_like(xf)
    np.add.at(dxf, (batch.lb, batch.lp), dsel)
    dx, g["lnf.g"], g["lnf.b"] = _ln_bwd(dxf, lnf)
    for l in reversed(range(spec.n_layers)):
        pre = f"b{l}."
        ln1, mc, ln2, a2, hpre, hact = caches[l]
        g[pre + "mlp.c2"] = dx.sum((0, 1))
        g[pre + "mlp.W2"] = _outer_sum(hact, dx)
        dh = (dx @ p[pre + "mlp.W2"].T) * (hpre > 0)
        g[pre + "mlp.c1"] = dh.sum((0, 1))
        g[pre + "mlp.W1"] = _outer_sum(a2, dh)
        da2 = dh @ p[pre + "mlp.W1"].T
        dxa, g[pre + "ln2.g"], g[pre + "ln2.b"] = _ln_bwd(da2, ln2)
        dx = dx + dxa
        if spec.variant == "attention":
            da = _attn_bwd(dx, mc, p, pre, g)
        else:
            da = _bc_bwd(dx, mc, p, pre, g)
        dxa, g[pre + "ln1.g"], g[pre + "ln1.b"] = _ln_bwd(da, ln1)
        dx = dx + dxa
    if spec.use_pos:
        g["pos"] = np.zeros_like(p["pos"])
        g["pos"][:N] = dx.sum(0)
    g["embed"] = np.zeros_like(p["embed"])
    np.add.at(g["embed"], batch.tokens, dx)
    if spec.tied:
        g["embed"] += dWh.T
    else:
        g["head.W"] = dWh
    return g


def predict(spec, p, batch):
    _, logits, _ = forward(spec, p, batch)
    return logits.argmax(-1)


def accuracy(spec, p, batch):
    if not len(batch.lt):
        return float("nan")
    return float(np.mean(predict(spec, p, batch) == batch.lt))


# --------------------------------------------------------------- gradcheck


def _relu_pattern(cache):
    return [hpre > 0 for (_, _, _, _, hpre, _) in cache[0]]


def fd_gradcheck(spec, p, batch, eps=1e-5, samples=200, seed=0, floor=1e-5, max_tries=None):
    """Worst relative error between analytic and central-difference gradients.

    Entries are sampled across every parameter tensor (at least one per
    tensor).  Relative error is ``|a - n| / max(|a|, |n|, floor)``.  A probe
    whose two evaluations fall on different sides of a ReLU kink has no
    meaningful central difference, so it is redrawn from the same tensor.
    Returns ``(max_rel_err, worst_name, worst_index)``.
    """
    rng = np.random.default_rng(seed)
    grads = backward(spec, p, batch)
    names = sorted(p)
    picks = list(names)
    while len(picks) < samples:
        picks.append(names[int(rng.integers(len(names)))])
    max_tries = max_tries or 20
    worst = (0.0, None, None)
    for name in picks:
        arr = p[name].reshape(-1)
        for _ in range(max_tries):
            flat = int(rng.integers(arr.size))
            old = arr[flat]
            arr[flat] = old + eps
            lp, _, cp = forward(spec, p, batch)
            arr[flat] = old - eps
            lm, _, cm = forward(spec, p, batch)
            arr[flat] = old
            if all(np.array_equal(a, b) for a, b in zip(_relu_pattern(cp), _relu_pattern(cm))):
                break
        else:
            raise RuntimeError(f"every probe of {name} straddles a ReLU kink")
        num = (lp - lm) / (2 * eps)
        ana = grads[name].reshape(-1)[flat]
        rel = abs(ana - num) / max(abs(ana), abs(num), floor)
        if rel > worst[0]:
            worst = (rel, name, flat)
    return worst


# ---------------------------------------------------------------- training


class AdamW:
    def __init__(self, params, lr, betas=(0.9, 0.95), weight_decay=0.1, eps=1e-8):
        self.lr, self.betas, self.wd, self.eps = lr, betas, weight_decay, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, lr_scale=1.0):
        self.t += 1
        b1, b2 = self.betas
        lr = self.lr * lr_scale
        for k in sorted(params):
            gk = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * gk
            self.v[k] = b2 * self.v[k] + (1 - b2) * gk * gk
            mhat = self.m[k] / (1 - b1**self.t)
            vhat = self.v[k] / (1 - b2**self.t)
            if self.wd and decays(k):
                params[k] -= lr * self.wd * params[k]
            params[k] -= lr * mhat / (np.sqrt(vhat) + self.eps)


def lr_scale(step, total, warmup):
    """Linear warmup over ``warmup * total`` steps, then cosine decay to 0."""
    w = max(1, int(round(warmup * total)))
    if step < w:
        return (step + 1) / w
    frac = (step - w) / max(1, total - w)
    return 0.5 * (1 + math.cos(math.pi * min(frac, 1.0)))


@dataclass
class RunResult:
    params: dict
    history: list
    failed: bool = False
    wall_seconds: float = 0.0

    @property
    def best_test_acc(self):
        accs = [h["test_acc"] for h in self.history if np.isfinite(h["test_acc"])]
        return max(accs) if accs and not self.failed else float("nan")

    @property
    def final_train_loss(self):
        return self.history[-1]["train_loss"] if self.history else float("nan")


def train(spec: ModelSpec, train_data, test_data, cfg: TrainConfig, lr: float, params=None):
    """AdamW training with warmup; evaluates test accuracy after every epoch.

    Deterministic given ``cfg.seed``.  A non-finite loss aborts the run and
    marks it failed.
    """
    t0 = time.perf_counter()
    p = init_model(spec, cfg.seed) if params is None else params
    p = {k: np.array(v, dtype=cfg.dtype) for k, v in p.items()}
    opt = AdamW(p, lr, cfg.betas, cfg.weight_decay)
    bs = cfg.batch_for(spec.seq_len, spec.d_model)
    n = len(train_data)
    steps_per_epoch = max(1, math.ceil(n / bs))
    total = steps_per_epoch * cfg.epochs
    shuffle = np.random.default_rng(np.random.SeedSequence([int.from_bytes(b"shuffle", "little"), cfg.seed]))
    test_batches = [make_batch(test_data[i : i + 256]) for i in range(0, len(test_data), 256)]
    history = []
    step = 0
    failed = False
    for epoch in range(cfg.epochs):
        order = shuffle.permutation(n)
        losses = []
        for s in range(steps_per_epoch):
            batch = make_batch([train_data[i] for i in order[s * bs : (s + 1) * bs]])
            loss, _, cache = forward(spec, p, batch)
            if not np.isfinite(loss):
                failed = True
                break
            grads = backward(spec, p, batch, cache)
            opt.step(p, grads, lr_scale(step, total, cfg.warmup))
            step += 1
            losses.append(loss)
        if failed:
            break
        correct = sum(float(np.sum(predict(spec, p, b) == b.lt)) for b in test_batches)
        count = sum(len(b.lt) for b in test_batches)
        acc = correct / count if count else float("nan")
        history.append({"epoch": epoch, "train_loss": float(np.mean(losses)), "test_acc": acc})
        if cfg.early_stop is not None and acc >= cfg.early_stop:
            break
    return RunResult(p, history, failed, time.perf_counter() - t0)


# -------------------------------------------------------------- checkpoints

CKPT_MAGIC = b"MQCK"
CKPT_VERSION = 1


def save_checkpoint(params, path):
    """Flat little-endian binary: magic, version, count, then per tensor
    name length, name, ndim, shape, float64 data."""
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<II", CKPT_VERSION, len(params)))
        for name in sorted(params):
            arr = np.ascontiguousarray(params[name], dtype="<f8")
            raw = name.encode()
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path):
    data = Path(path).read_bytes()
    if data[:4] != CKPT_MAGIC:
        raise ValueError("not a checkpoint file")
    version, count = struct.unpack_from("<II", data, 4)
    if version != CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 12
    out = {}
    for _ in range(count):
        (ln,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off : off + ln].decode()
        off += ln
        (ndim,) = struct.unpack_from("<B", data, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}Q", data, off)
        off += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        out[name] = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape).copy()
        off += 8 * size
    if off != len(data):
        raise ValueError("trailing bytes in checkpoint")
    return out


# ------------------------------------------------------------------ sweeps

SWEEP_COLUMNS = ["variant", "seq_len", "d_model", "lr", "seed", "epochs", "best_test_acc", "final_train_loss", "wall_seconds"]


def cell_data(seq_len, cfg: TrainConfig):
    """Train and test sets for one sequence length; test indices follow the
    training indices so the two never overlap."""
    gen = GenConfig(
        seq_len=seq_len,
        num_pairs=cfg.pairs_for(seq_len),
        alpha=cfg.alpha,
        vocab_size=cfg.vocab_size,
        seed=cfg.seed,
    ).validate()
    train_data = [gen_mqar(gen, i) for i in range(cfg.train_size)]
    test_data = [gen_mqar(gen, cfg.train_size + i) for i in range(cfg.test_size)]
    return train_data, test_data


def _fmt(x):
    if isinstance(x, float):
        return "nan" if not np.isfinite(x) else repr(round(x, 6))
    return str(x)


def run_cell(variant, seq_len, d_model, cfg: TrainConfig):
    """Train one grid cell over the learning-rate grid.

    Returns one row per learning rate plus a final row with ``lr = "max"``
    holding the best accuracy over the grid.
    """
    train_data, test_data = cell_data(seq_len, cfg)
    spec = ModelSpec(variant=variant, d_model=d_model, vocab=cfg.vocab_size + 1, seq_len=seq_len)
    rows = []
    for lr in cfg.lrs:
        try:
            res = train(spec, train_data, test_data, cfg, lr)
            acc, loss, wall, epochs = res.best_test_acc, res.final_train_loss, res.wall_seconds, len(res.history)
        except FloatingPointError:
            acc, loss, wall, epochs = float("nan"), float("nan"), 0.0, 0
        rows.append(
            {
                "variant": variant,
                "seq_len": seq_len,
                "d_model": d_model,
                "lr": lr,
                "seed": cfg.seed,
                "epochs": epochs,
                "best_test_acc": acc,
                "final_train_loss": loss,
                "wall_seconds": wall,
            }
        )
    finite = [r for r in rows if np.isfinite(r["best_test_acc"])]
    best = max(finite, key=lambda r: r["best_test_acc"]) if finite else rows[0]
    summary = dict(best)
    summary["lr"] = "max"
    if not finite:
        summary["best_test_acc"] = float("nan")
    summary["wall_seconds"] = sum(r["wall_seconds"] for r in rows)
    rows.append(summary)
    return rows


def _run_cell_star(args):
    return run_cell(*args)


def iter_sweep(grid, cfg: TrainConfig, jobs=1, skip=()):
    """Yield ``(cell, rows)`` for every ``(variant, seq_len, d_model)`` cell
    not in ``skip``, in grid order regardless of scheduling."""
    skip = set(map(tuple, skip))
    cells = [tuple(c) for c in grid if tuple(c) not in skip]
    if jobs <= 1 or len(cells) <= 1:
        for c in cells:
            yield c, run_cell(*c, cfg)
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")
    ctx = get_context("spawn")
    with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
        yield from zip(cells, pool.map(_run_cell_star, [(*c, cfg) for c in cells]))


def capacity_sweep(grid, cfg: TrainConfig, jobs=1, skip=()):
    """All rows of :func:`iter_sweep` as one list."""
    return [row for _, rows in iter_sweep(grid, cfg, jobs, skip) for row in rows]


def rows_to_csv(rows, header=True):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def completed_cells(rows):
    """Cells that already have their ``lr = max`` summary row."""
    return {(r["variant"], int(r["seq_len"]), int(r["d_model"])) for r in rows if r["lr"] == "max"}
