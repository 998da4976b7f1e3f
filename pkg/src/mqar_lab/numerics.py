"""Dense kernels shared by the rest of the package.

Every sequence tensor is a float64 ``(N, d)`` numpy array with one row per
time step.  Filter banks use the same layout: ``h[j, t]`` is tap ``j`` of the
filter for channel ``t``.
"""

from __future__ import annotations

import numpy as np

# Below this length the direct O(N^2) path is used by default.
FFT_THRESHOLD = 32


def as_seq(u, name="u"):
    """Return ``u`` as a 2-D float array, promoting 1-D input to one channel."""
    arr = np.asarray(u, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty (N, d) matrix, got shape {arr.shape}")
    return arr


def _check_filter(u, h, truncate=False):
    """Validate shapes and zero-pad ``h`` to ``N`` taps.

    Taps at lag ``>= N`` cannot reach any causal output, so with ``truncate``
    they are dropped instead of rejected.
    """
    u = as_seq(u)
    h = as_seq(h, "h")
    n, d = u.shape
    if h.shape[1] != d:
        raise ValueError(f"filter has {h.shape[1]} channels but input has {d}")
    if truncate:
        h = h[:n]
    if h.shape[0] > n:
        raise ValueError(f"filter length {h.shape[0]} exceeds sequence length {n}")
    if h.shape[0] < n:
        h = np.vstack([h, np.zeros((n - h.shape[0], d))])
    return u, h


def causal_conv_direct(u, h):
    """Truncated linear convolution as an explicit Toeplitz sum."""
    u, h = _check_filter(u, h, truncate=True)
    n = u.shape[0]
    lag = np.arange(n)[:, None] - np.arange(n)[None, :]
    taps = np.where((lag >= 0)[:, :, None], h[np.clip(lag, 0, n - 1)], 0.0)
    # y[i] = sum_j h[i - j] * u[j]
    return np.einsum("ijt,jt->it", taps, u)


def causal_conv_fft(u, h):
    """FFT convolution padded to length ``2N`` so no wrap-around occurs."""
    u, h = _check_filter(u, h, truncate=True)
    n = u.shape[0]
    fft_size = 2 * n
    k_f = np.fft.rfft(h, n=fft_size, axis=0) / fft_size
    u_f = np.fft.rfft(u, n=fft_size, axis=0)
    y = np.fft.irfft(u_f * k_f, n=fft_size, axis=0, norm="forward")
    return y[:n]


def causal_conv(u, h, method="auto"):
    """Causal convolution ``y[i,t] = sum_{j<=i} h[j,t] u[i-j,t]``.

    ``method`` is ``"fft"``, ``"direct"`` or ``"auto"`` (FFT from
    ``FFT_THRESHOLD`` rows upward).
    """
    if method == "auto":
        method = "fft" if as_seq(u).shape[0] >= FFT_THRESHOLD else "direct"
    if method == "fft":
        return causal_conv_fft(u, h)
    if method == "direct":
        return causal_conv_direct(u, h)
    raise ValueError(f"unknown convolution method {method!r}")


def circular_conv_direct(u, h):
    u, h = _check_filter(u, h)
    n = u.shape[0]
    lag = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return np.einsum("ijt,jt->it", h[lag], u)


def circular_conv_fft(u, h):
    u, h = _check_filter(u, h)
    n = u.shape[0]
    y = np.fft.irfft(np.fft.rfft(u, axis=0) * np.fft.rfft(h, axis=0), n=n, axis=0)
    return y


def circular_conv(u, h, method="auto"):
    """Cyclic convolution ``y[i,t] = sum_j h[j,t] u[(i-j) mod N, t]``."""
    if method == "auto":
        method = "fft" if as_seq(u).shape[0] >= FFT_THRESHOLD else "direct"
    if method == "fft":
        return circular_conv_fft(u, h)
    if method == "direct":
        return circular_conv_direct(u, h)
    raise ValueError(f"unknown convolution method {method!r}")


def autocorrelation(v, method="direct"):
    """Cyclic autocorrelation ``w[s] = sum_i v[i] v[(i+s) mod N]``."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("autocorrelation expects a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("autocorrelation input must be finite")
    if method == "fft":
        f = np.fft.rfft(v)
        return np.fft.irfft(np.conj(f) * f, n=v.size)
    n = v.size
    return np.array([v @ np.roll(v, -s) for s in range(n)])


def channel_autocorrelation(u, method="direct"):
    """Sum of the per-channel cyclic autocorrelations of an ``(N, d)`` matrix."""
    u = as_seq(u)
    if method == "fft":
        f = np.fft.rfft(u, axis=0)
        return np.fft.irfft(np.conj(f) * f, n=u.shape[0], axis=0).sum(axis=1)
    n = u.shape[0]
    return np.array([np.sum(u * np.roll(u, -s, axis=0)) for s in range(n)])


def softmax_rows(m):
    """Row-wise softmax with max subtraction; ``-inf`` entries get weight 0.

    A row that is entirely ``-inf`` yields a zero row rather than NaN.
    """
    m = np.asarray(m, dtype=np.float64)
    row_max = np.max(m, axis=-1, keepdims=True)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)
    e = np.exp(m - row_max)
    s = e.sum(axis=-1, keepdims=True)
    return np.divide(e, s, out=np.zeros_like(e), where=s > 0)


def one_hot_embed(tokens, c):
    """Stack of standard basis rows, one per token."""
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 1:
        raise ValueError("tokens must be a 1-D sequence")
    if tokens.size and (tokens.min() < 0 or tokens.max() >= c):
        raise ValueError(f"token ids must lie in [0, {c})")
    out = np.zeros((tokens.size, c))
    out[np.arange(tokens.size), tokens] = 1.0
    return out
