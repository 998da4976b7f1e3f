"""Hand-set weights that solve recall exactly, plus the BaseConv primitives.

Nothing here is trained.  Every construction is checked against the oracles
in :mod:`mqar_lab.oracle` or against a direct numpy computation.

Layouts are written top to bottom as row blocks, e.g. ``[x; S; 0]`` is ``x``
in rows ``0..n-1``, ``S`` in rows ``n..2n-1`` and zeros below.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mixers import AttentionParams, BaseConvParams, HyenaParams, attention_forward, baseconv_forward
from .numerics import as_seq, causal_conv, channel_autocorrelation

# ------------------------------------------------------------------ stacks


def smear_rows(y):
    """Rows with any nonzero entry become all ones, the rest all zeros."""
    y = as_seq(y)
    hit = np.any(np.abs(y) > 0.5, axis=1)
    return np.repeat(hit[:, None].astype(np.float64), y.shape[1], axis=1)


@dataclass
class BaseConvStack:
    """Ordered BaseConv layers, evaluated left to right without residuals."""

    layers: list = field(default_factory=list)

    def __len__(self):
        return len(self.layers)

    def __call__(self, y):
        y = as_seq(y)
        for layer in self.layers:
            y = baseconv_forward(y, layer)
        return y

    def then(self, other):
        return BaseConvStack(self.layers + other.layers)


def _layer(N, d, *, W=None, h=None, b1=0.0, b2=0.0, mode="causal", method="direct"):
    """Residual-free layer.  Primitives default to the direct convolution so
    their 0/1 filters produce bit-exact results."""
    W = np.zeros((d, d)) if W is None else W
    h = np.zeros((N, d)) if h is None else h
    return BaseConvParams(W=W, h=h, b1=b1, b2=b2, residual=False, conv_mode=mode, conv_method=method)


def _spike(N, d, lag):
    h = np.zeros((N, d))
    h[lag] = 1.0
    return h


def _rows(N, d, start, stop, value=1.0):
    b = np.zeros((N, d))
    b[start:stop] = value
    return b


# -------------------------------------------------------------- primitives


def build_shift_down(s, N, d):
    """One layer: ``W = 0``, ``b1 = 1``, ``b2 = 0`` and ``h = e_s``."""
    if not 0 <= s <= N:
        raise ValueError(f"shift must be in [0, {N}]")
    h = _spike(N, d, s) if s < N else np.zeros((N, d))
    return BaseConvStack([_layer(N, d, h=h, b1=np.ones((N, d)))])


def build_shift_up(s, N, d):
    """One circular layer: rotating by ``N - s`` moves row ``i + s`` to row
    ``i``; the ``b1`` row mask then zeroes the ``s`` rows that wrapped."""
    if not 0 <= s <= N:
        raise ValueError(f"shift must be in [0, {N}]")
    h = _spike(N, d, (N - s) % N)
    return BaseConvStack([_layer(N, d, h=h, b1=_rows(N, d, 0, N - s), mode="circular")])


def build_add(n, N, d):
    """Two layers mapping ``[x; S; 0]`` to ``[1; S + x; 0]``.

    The first layer forms ``y + shift_down(y, n)`` and keeps only the middle
    block.  The second layer passes the middle block through and refills the
    top block with ones, ready for the next accumulation.
    """
    if n < 1 or 2 * n > N:
        raise ValueError("need 1 <= n and 2n <= N")
    h1 = _spike(N, d, 0) + _spike(N, d, n)
    first = _layer(N, d, h=h1, b1=_rows(N, d, n, 2 * n))
    second = _layer(N, d, h=_spike(N, d, 0), b1=_rows(N, d, 0, 2 * n), b2=_rows(N, d, 0, n))
    return BaseConvStack([first, second])


def remember_rows_needed(n, m, s, t):
    return 2 * n + 2 * s + 2 * m + t


def build_remember(n, m, s, t, h, p, N, d):
    """Stack mapping ``[x; 0_s; v; 0]`` to ``[p * (x conv h); v; 0]``.

    ``x`` has ``n`` rows, ``v`` has ``m`` rows starting at row ``n + s``,
    ``h`` has at most ``s + 1`` taps and ``p`` is an ``(n + s, d)`` gate.
    With ``K = n + m + s + t``:

    1. ``h + e_K`` convolves ``x`` in place while parking a copy of ``v``
       ``K`` rows lower; ``b1`` gates the top block with ``p`` and keeps
       the parked copy.
    2. ``e_0 + e_K`` lays the gated block directly above the parked ``v``.
    3. A shift up by ``K`` moves the result to the top.
    """
    K = n + m + s + t
    need = remember_rows_needed(n, m, s, t)
    if N < need:
        raise ValueError(f"remember needs N >= 2n + 2s + 2m + t = {need}, got {N}")
    h = as_seq(h)
    if h.shape[0] > s + 1:
        raise ValueError("filter h may have at most s + 1 taps")
    p = np.broadcast_to(np.asarray(p, dtype=np.float64), (n + s, d))
    h1 = np.zeros((N, d))
    h1[: h.shape[0]] = h
    h1[K] += 1.0
    b1 = np.zeros((N, d))
    b1[: n + s] = p
    b1[K + n + s : K + n + s + m] = 1.0
    first = _layer(N, d, h=h1, b1=b1)
    second = _layer(N, d, h=_spike(N, d, 0) + _spike(N, d, K), b1=_rows(N, d, K, K + n + s + m))
    return BaseConvStack([first, second]).then(build_shift_up(K, N, d))


# --------------------------------------------------------- hyena simulation


def hyena_sim_block(N, taps):
    return N + max(taps, 1) - 1


def simulate_hyena_stack(params: HyenaParams, N):
    """Four circular BaseConv layers on ``4K`` rows reproducing one Hyena
    gating stage on the first ``N`` rows (``K = N + taps - 1``).

    Input ``[u; 0; 0; 0]`` in blocks of ``K`` rows.

    1. ``W = W_v``, rotate by ``K``: ``[u W_v + b_v; u; 0; 0]``.
    2. ``W = W_p``, rotate by ``2K``: ``[0; u W_p + b_p; u W_v + b_v; 0]``.
    3. ``W = 0``, short filters rotated by ``3K`` (gate) and ``K`` (value),
       masked to blocks 0 and 3: ``[p; 0; 0; v]``.
    4. ``W = I``, long filter rotated by ``K``: block 0 becomes
       ``p * (h conv v)``.
    """
    if params.order != 1:
        raise ValueError("the simulation covers a single gating stage (L = 1)")
    d = params.W_in.shape[0]
    W_p, W_v = params.W_in[:, :d], params.W_in[:, d:]
    if params.b_in is None:
        b_p = b_v = np.zeros(d)
    else:
        b_in = np.broadcast_to(np.asarray(params.b_in, dtype=np.float64), (N, 2 * d))
        b_p, b_v = b_in[:, :d], b_in[:, d:]
    if params.short_filter is None:
        short = np.zeros((1, 2 * d))
        short[0] = 1.0
    else:
        short = as_seq(params.short_filter)
    taps = short.shape[0]
    K = hyena_sim_block(N, taps)
    M = 4 * K
    s_p, s_v = short[:, :d], short[:, d:]

    b1 = np.zeros((M, d))
    b1[K : K + N] = 1.0
    b1[0:N] += b_v
    b2 = _rows(M, d, 0, N)
    l1 = _layer(M, d, W=W_v, h=_spike(M, d, K), b1=b1, b2=b2, mode="circular", method="auto")

    b1 = np.zeros((M, d))
    b1[2 * K : 2 * K + N] = 1.0
    b1[K : K + N] += b_p
    b2 = _rows(M, d, K, K + N)
    l2 = _layer(M, d, W=W_p, h=_spike(M, d, 2 * K), b1=b1, b2=b2, mode="circular", method="auto")

    h3 = np.zeros((M, d))
    h3[3 * K : 3 * K + taps] += s_p
    h3[K : K + taps] += s_v
    b1 = _rows(M, d, 0, N) + _rows(M, d, 3 * K, 3 * K + N)
    l3 = _layer(M, d, h=h3, b1=b1, mode="circular", method="auto")

    long = as_seq(params.filters[0])
    if long.shape[0] > N:
        raise ValueError("long filter longer than the sequence")
    h4 = np.zeros((M, d))
    h4[K : K + long.shape[0]] = long
    l4 = _layer(M, d, W=np.eye(d), h=h4, mode="circular", method="auto")
    return BaseConvStack([l1, l2, l3, l4])


def simulate_hyena_layer(params: HyenaParams, u):
    """Hyena output for ``u`` computed by the BaseConv stack above."""
    u = as_seq(u)
    N, d = u.shape
    stack = simulate_hyena_stack(params, N)
    M = stack.layers[0].h.shape[0]
    y = np.zeros((M, d))
    y[:N] = u
    return stack(y)[:N]


# -------------------------------------------------------- triple encodings


def encode_triples(keys, values, queries, c):
    """``(3T, 3c)`` one-hot rows ``[k:0:0]``, ``[0:v:0]``, ``[0:0:q]``.

    Token ids outside ``[0, c)`` (padding) encode as zero rows.
    """
    T = len(keys)
    enc = np.zeros((3 * T, 3 * c))
    for block, toks in enumerate((keys, values, queries)):
        toks = np.asarray(toks, dtype=np.int64)
        ok = (toks >= 0) & (toks < c)
        rows = 3 * np.arange(T)[ok] + block
        enc[rows, block * c + toks[ok]] = 1.0
    return enc


def encode_triples_compact(keys, values, queries, c):
    """``(3T, c)`` one-hot rows in key, value, query order (``d = c``)."""
    T = len(keys)
    seq = np.empty(3 * T, dtype=np.int64)
    seq[0::3], seq[1::3], seq[2::3] = keys, values, queries
    out = np.zeros((3 * T, c))
    ok = (seq >= 0) & (seq < c)
    out[np.flatnonzero(ok), seq[ok]] = 1.0
    return out


def decode_rows(rows, threshold=0.5):
    """Argmax per row, or -1 where the row maximum is below ``threshold``."""
    rows = as_seq(rows)
    best = rows.argmax(axis=1)
    return np.where(rows.max(axis=1) >= threshold, best, -1)


# ------------------------------------------------------ attention solver


def up_shift_matrix(N, s=1):
    """``B[i, i + s] = 1``: row ``i`` of ``B V`` is row ``i + s`` of ``V``."""
    return np.eye(N, k=s)


def attention_solver_params(c):
    """The two layers' projection matrices; they depend on ``c`` only."""
    d = 3 * c
    I = np.eye(c)
    Z = np.zeros((d, d))
    W_v1 = Z.copy()
    W_v1[c : 2 * c, c : 2 * c] = I
    first = AttentionParams(W_Q=Z.copy(), W_K=Z.copy(), W_V=W_v1)
    W_K, W_Q, W_V = Z.copy(), Z.copy(), Z.copy()
    W_K[0:c, 0:c] = I
    W_Q[2 * c : 3 * c, 0:c] = I
    W_V[c : 2 * c, 0:c] = I
    second = AttentionParams(W_Q=W_Q, W_K=W_K, W_V=W_V)
    return first, second


def attention_solver_forward(enc, c):
    """Raw output rows of the two-layer softmax-free attention model.

    Layer 1 (no causal mask, bias = up-shift by one, plus a residual) copies
    each value into its key's row, giving ``[k:v:0]``.  Layer 2 scores query
    rows against key rows of strictly earlier triples and reads out the
    value block.  Scores are left unscaled so a match reads exactly 1.
    """
    enc = as_seq(enc)
    N = enc.shape[0]
    first, second = attention_solver_params(c)
    y1 = enc + attention_forward(enc, first, causal=False, use_softmax=False, bias=up_shift_matrix(N), scale=1.0)
    triple = np.arange(N) // 3
    earlier = triple[None, :] < triple[:, None]
    return attention_forward(y1, second, causal=True, use_softmax=False, mask=earlier, scale=1.0)


def solve_mqar_attention(keys, values, queries, c):
    """Recalled value per triple (``-1`` = no match), read at query rows.

    Duplicate keys with different values add up in the output row; the
    decoder then reports the value with the largest count, so callers that
    care must supply distinct keys.
    """
    out = attention_solver_forward(encode_triples(keys, values, queries, c), c)
    return decode_rows(out[2::3, :c])


# ---------------------------------------------------- autocorrelation solver


def top_shifts(u_onehot, t, admissible=None):
    """The ``t`` nonzero cyclic lags with the most autocorrelation mass.

    Ties go to the smaller lag.  ``admissible`` optionally restricts the
    candidate lags (boolean vector of length ``N``).
    """
    u = as_seq(u_onehot)
    N = u.shape[0]
    if t >= N:
        raise ValueError(f"t must be smaller than N = {N}")
    w = np.rint(channel_autocorrelation(u, method="fft"))
    return _top_lags(w, t, admissible)


def _top_lags(w, t, admissible=None):
    w = np.asarray(w, dtype=np.float64).copy()
    w[0] = -np.inf
    if admissible is not None:
        w[~np.asarray(admissible, dtype=bool)] = -np.inf
    lags = np.arange(w.size)
    order = np.lexsort((lags, -w))
    order = [int(s) for s in order if np.isfinite(w[s])]
    return order[:t]


def query_key_correlation(enc):
    """``c[s] = sum_r <Q[r], K[r - s]>`` for a compact triple encoding.

    Only lags ``3g + 2`` with ``g >= 1`` can be nonzero: a query at row
    ``3i + 2`` meeting an equal key at row ``3j`` of an earlier triple.
    """
    enc = as_seq(enc)
    N = enc.shape[0]
    Q, K, _ = kqv_projections(enc)
    fft = 2 * N
    spec = np.fft.rfft(Q, n=fft, axis=0) * np.conj(np.fft.rfft(K, n=fft, axis=0))
    corr = np.fft.irfft(spec, n=fft, axis=0)[:N].sum(axis=1)
    corr = np.rint(corr)
    corr[:5] = 0.0
    return corr


def interaction_lags(gaps):
    """Row lag in the compact encoding for each triple gap ``i - j``."""
    return [3 * int(g) + 2 for g in gaps]


def kqv_projections(enc):
    """Row masks: keys on rows ``3i``, values on ``3i+1``, queries on ``3i+2``."""
    enc = as_seq(enc)
    r = np.arange(enc.shape[0]) % 3
    K = enc * (r == 0)[:, None]
    V = enc * (r == 1)[:, None]
    Q = enc * (r == 2)[:, None]
    return Q, K, V


def sparse_causal_conv(u, taps):
    """Causal convolution with a kernel given as ``{lag: coefficient}``.

    Identical to :func:`numerics.causal_conv` with the dense kernel, but
    exact for 0/1 data because it only adds shifted copies.
    """
    u = as_seq(u)
    out = np.zeros_like(u)
    n = u.shape[0]
    for lag, coef in taps.items():
        if 0 <= lag < n:
            out[lag:] += coef * u[: n - lag]
    return out


def autocorr_kernels(shifts, N):
    """Kernels ``h^K = sum_l X^(s_l + l B)`` and ``h^V = sum_l X^(s_l - 1 + l B)``
    on ``t`` stacked blocks of ``B = 2N`` rows."""
    B = 2 * N
    hK = {int(s) + l * B: 1.0 for l, s in enumerate(shifts)}
    hV = {int(s) - 1 + l * B: 1.0 for l, s in enumerate(shifts)}
    return hK, hV


def autocorr_parameter_count(t, N, c):
    """Entries of the two dense kernel banks (``t`` blocks of ``2N`` rows)."""
    return 2 * (2 * t * N) * c


def solve_mqar_autocorr(enc, t=None, shifts=None):
    """Recall with input-dependent shift kernels on a compact ``(3T, c)``
    encoding.  Returns the recalled value per triple (``-1`` = none).

    The lags are the ``t`` strongest query-to-earlier-key lags unless
    ``shifts`` (row lags, see :func:`interaction_lags`) is given.  Each lag
    ``s`` gets its own block of ``2N`` rows: the first gated layer
    ``y = Q' * (h^K conv K')`` marks queries whose key sits ``s`` rows
    earlier, the row smear turns each hit into an all-ones row ``E``, and the
    second gated layer ``z = E * (h^V conv V')`` pulls in the value one row
    after that key.  Summing the blocks gives the answer rows.
    """
    enc = as_seq(enc)
    N, c = enc.shape
    if shifts is None:
        if t is None:
            raise ValueError("give either t or explicit shifts")
        if t >= N:
            raise ValueError(f"t must be smaller than N = {N}")
        corr = query_key_correlation(enc)
        shifts = _top_lags(corr, t, admissible=corr > 0)
    shifts = [int(s) for s in shifts]
    if any(s < 1 or s >= N for s in shifts):
        raise ValueError("shifts must lie in [1, N)")
    if not shifts:
        return np.full(N // 3, -1, dtype=np.int64)
    tt = len(shifts)
    B = 2 * N
    M = tt * B
    Q, K, V = kqv_projections(enc)
    Kp = np.zeros((M, c))
    Vp = np.zeros((M, c))
    Qp = np.zeros((M, c))
    Kp[:N] = K
    Vp[:N] = V
    for l in range(tt):
        Qp[l * B : l * B + N] = Q
    hK, hV = autocorr_kernels(shifts, N)
    y = Qp * sparse_causal_conv(Kp, hK)
    E = smear_rows(y)
    z = E * sparse_causal_conv(Vp, hV)
    z_out = z.reshape(tt, B, c)[:, :N].sum(axis=0)
    return decode_rows(z_out[2::3])


# ------------------------------------------------------------- instances


def random_gap_triples(rng, T, c, gaps, p_match=0.7):
    """Triples with distinct keys whose queries match only at given gaps.

    Needs ``c >= 2T`` so unmatched queries can use ids that are never keys.
    Returns ``keys, values, queries, gap_of_query`` (gap 0 = no match).
    """
    if c < 2 * T:
        raise ValueError("need c >= 2T for distinct keys plus non-key query ids")
    perm = rng.permutation(c)
    keys = perm[:T]
    spare = perm[T:]
    values = rng.integers(0, c, T)
    queries = np.empty(T, dtype=np.int64)
    gap_of = np.zeros(T, dtype=np.int64)
    gaps = [int(g) for g in gaps]
    for i in range(T):
        options = [g for g in gaps if 1 <= g <= i]
        if options and rng.random() < p_match:
            g = options[int(rng.integers(len(options)))]
            queries[i] = keys[i - g]
            gap_of[i] = g
        else:
            queries[i] = spare[int(rng.integers(spare.size))]
    return keys.astype(np.int64), values.astype(np.int64), queries, gap_of


def random_triples(rng, T, c, p_match=0.7):
    """Distinct keys (needs ``T <= c``); each query is an earlier key with
    probability ``p_match`` when one exists, else a uniform id."""
    keys = rng.permutation(c)[:T]
    values = rng.integers(0, c, T)
    queries = rng.integers(0, c, T)
    for i in range(1, T):
        if rng.random() < p_match:
            queries[i] = keys[int(rng.integers(i))]
    return keys.astype(np.int64), values.astype(np.int64), queries.astype(np.int64)


def token_instance_triples(tokens, c):
    """Token triples for a generated instance; the pad id ``c`` stays as is
    and encodes to zero rows."""
    tokens = np.asarray(tokens, dtype=np.int64)
    values = np.append(tokens[1:], c)
    return tokens.copy(), values, tokens.copy()


# ------------------------------------------------------------ self checks

SUITES = ("primitives", "attention", "autocorr", "hyena-sim")


@dataclass
class CheckRow:
    name: str
    cases: int
    max_error: float
    passed: bool
    note: str = ""


def _int_seq(rng, N, d, lo=-3, hi=4):
    return rng.integers(lo, hi, size=(N, d)).astype(np.float64)


def _check_shift(rng, trials, up):
    worst = 0.0
    for _ in range(trials):
        N, d = int(rng.integers(1, 33)), int(rng.integers(1, 5))
        s = int(rng.integers(0, N + 1))
        u = _int_seq(rng, N, d)
        want = np.zeros_like(u)
        if up:
            want[: N - s] = u[s:]
            got = build_shift_up(s, N, d)(u)
        else:
            want[s:] = u[: N - s]
            got = build_shift_down(s, N, d)(u)
        worst = max(worst, float(np.max(np.abs(got - want))))
    return worst


def _check_add(rng, trials):
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 9))
        N, d = 2 * n + int(rng.integers(0, 9)), int(rng.integers(1, 5))
        x, S = _int_seq(rng, n, d), _int_seq(rng, n, d)
        y = np.zeros((N, d))
        y[:n], y[n : 2 * n] = x, S
        want = np.zeros((N, d))
        want[:n], want[n : 2 * n] = 1.0, S + x
        worst = max(worst, float(np.max(np.abs(build_add(n, N, d)(y) - want))))
    return worst


def _check_remember(rng, trials):
    worst = 0.0
    for _ in range(trials):
        n, m = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        s, t = int(rng.integers(0, 4)), int(rng.integers(0, 3))
        d = int(rng.integers(1, 4))
        N = remember_rows_needed(n, m, s, t) + int(rng.integers(0, 4))
        x, v = _int_seq(rng, n, d), _int_seq(rng, m, d)
        h = _int_seq(rng, int(rng.integers(1, s + 2)), d)
        p = _int_seq(rng, n + s, d)
        y = np.zeros((N, d))
        y[:n], y[n + s : n + s + m] = x, v
        xs = np.zeros((n + s, d))
        xs[:n] = x
        want = np.zeros((N, d))
        want[: n + s] = p * causal_conv(xs, h, method="direct")
        want[n + s : n + s + m] = v
        got = build_remember(n, m, s, t, h, p, N, d)(y)
        worst = max(worst, float(np.max(np.abs(got - want))))
    return worst


def _random_hyena(rng, N, d):
    taps = int(rng.integers(1, 4))
    return HyenaParams(
        W_in=rng.normal(size=(d, 2 * d)),
        filters=[rng.normal(size=(int(rng.integers(1, N + 1)), d))],
        short_filter=rng.normal(size=(taps, 2 * d)) if rng.random() < 0.8 else None,
        b_in=rng.normal(size=2 * d) if rng.random() < 0.5 else None,
    )


def _check_hyena_sim(rng, trials):
    from .mixers import hyena_forward

    worst = 0.0
    for _ in range(trials):
        N, d = int(rng.integers(1, 33)), int(rng.integers(1, 9))
        params = _random_hyena(rng, N, d)
        u = rng.normal(size=(N, d))
        worst = max(worst, float(np.max(np.abs(simulate_hyena_layer(params, u) - hyena_forward(u, params)))))
    return worst


def _check_attention(rng, trials, cs=(16, 64), max_T=64):
    from .oracle import sequential_mqar

    wrong = 0
    for c in cs:
        for _ in range(trials):
            T = int(rng.integers(1, min(max_T, c) + 1))
            keys, values, queries = random_triples(rng, T, c)
            got = solve_mqar_attention(keys, values, queries, c)
            wrong += int(np.sum(got != sequential_mqar(keys, values, queries).value))
    return wrong


def _distinct_gaps(rng, t, T):
    return sorted(int(g) for g in rng.choice(np.arange(1, T), size=t, replace=False))


def _check_autocorr(rng, trials, ts=(1, 2, 4, 8), c=64, T=24):
    """Errors with all distances available, plus errors of the withheld runs
    outside the withheld distance (both must be zero), and the count of
    withheld queries that still got answered (must be zero)."""
    from .oracle import sequential_mqar

    wrong = leaked = 0
    for t in ts:
        for _ in range(trials):
            gaps = _distinct_gaps(rng, t, T)
            keys, values, queries, gap_of = random_gap_triples(rng, T, c, gaps)
            truth = sequential_mqar(keys, values, queries).value
            enc = encode_triples_compact(keys, values, queries, c)
            wrong += int(np.sum(solve_mqar_autocorr(enc, t=t) != truth))
            drop = gaps[int(rng.integers(t))]
            kept = interaction_lags([g for g in gaps if g != drop])
            got = solve_mqar_autocorr(enc, shifts=kept)
            lost = gap_of == drop
            wrong += int(np.sum(got[~lost] != truth[~lost]))
            leaked += int(np.sum(got[lost] != -1))
    return wrong + leaked


def _check_autocorr_boundary(rng, trials, t, c=64, T=24):
    """With ``t`` distances and budget ``t`` every query is recalled; with
    ``t + 1`` distances and budget ``t`` the misses fall on one distance."""
    from .oracle import sequential_mqar

    bad = 0
    for _ in range(trials):
        gaps = _distinct_gaps(rng, t, T)
        keys, values, queries, _ = random_gap_triples(rng, T, c, gaps)
        truth = sequential_mqar(keys, values, queries).value
        bad += int(np.sum(solve_mqar_autocorr(encode_triples_compact(keys, values, queries, c), t=t) != truth))
        if t + 1 < T:
            gaps = _distinct_gaps(rng, t + 1, T)
            keys, values, queries, gap_of = random_gap_triples(rng, T, c, gaps)
            truth = sequential_mqar(keys, values, queries).value
            miss = solve_mqar_autocorr(encode_triples_compact(keys, values, queries, c), t=t) != truth
            bad += int(len(set(gap_of[miss].tolist())) > 1)
    return bad


def verify_suite(suite="all", trials=None, t=None, seed=0, fault=None):
    """Run the construction checks and return one :class:`CheckRow` each.

    ``trials`` scales the number of random cases per check.  ``fault`` names
    a check whose result is deliberately corrupted (negative control).
    """
    if suite != "all" and suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; expected 'all' or one of {SUITES}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x636F6E73]))
    want = SUITES if suite == "all" else (suite,)
    n = trials
    checks = []
    if "primitives" in want:
        k = n or 2500
        checks += [
            ("shift_down", k, lambda: _check_shift(rng, k, up=False), 0.0),
            ("shift_up", k, lambda: _check_shift(rng, k, up=True), 0.0),
            ("add", k, lambda: _check_add(rng, k), 0.0),
            ("remember", k, lambda: _check_remember(rng, k), 0.0),
        ]
    if "hyena-sim" in want:
        k = n or 1000
        checks.append(("hyena_sim", k, lambda: _check_hyena_sim(rng, k), 1e-9))
    if "attention" in want:
        k = n or 1000
        checks.append(("attention_solver", 2 * k, lambda: _check_attention(rng, k), 0.0))
    if "autocorr" in want:
        k = n or 500
        if t is None:
            checks.append(("autocorr_solver", 4 * k, lambda: _check_autocorr(rng, k), 0.0))
        else:
            checks.append((f"autocorr_t{t}", k, lambda: _check_autocorr_boundary(rng, k, t), 0.0))
    rows = []
    for name, cases, fn, tol in checks:
        err = float(fn())
        if fault == name:
            err += 1.0
        rows.append(CheckRow(name, cases, err, err <= tol, "fault injected" if fault == name else ""))
    return rows
