import numpy as np
import pytest

from mqar_lab.numerics import (
    autocorrelation,
    causal_conv,
    causal_conv_direct,
    causal_conv_fft,
    channel_autocorrelation,
    circular_conv,
    one_hot_embed,
    softmax_rows,
)


def spike(N, k, d=1):
    h = np.zeros((N, d))
    h[k] = 1.0
    return h


def test_identity_filter():
    u = np.random.default_rng(0).normal(size=(7, 3))
    assert np.array_equal(causal_conv(u, spike(7, 0, 3)), u)


def test_shift_by_one():
    y = causal_conv(np.array([1.0, 2, 3, 4]), spike(4, 1))
    assert y[:, 0].tolist() == [0.0, 1.0, 2.0, 3.0]


@pytest.mark.parametrize("N", [1, 2, 16, 33, 200, 512])
def test_fft_matches_direct(N):
    rng = np.random.default_rng(N)
    u, h = rng.normal(size=(N, 3)), rng.normal(size=(N, 3))
    assert np.max(np.abs(causal_conv_fft(u, h) - causal_conv_direct(u, h))) <= 1e-10


def test_direct_against_loop():
    rng = np.random.default_rng(1)
    u, h = rng.normal(size=(9, 2)), rng.normal(size=(9, 2))
    want = np.array([[sum(h[j, t] * u[i - j, t] for j in range(i + 1)) for t in range(2)] for i in range(9)])
    assert np.allclose(causal_conv_direct(u, h), want, atol=1e-12)


def test_short_filter_is_zero_padded():
    u = np.arange(5.0)
    assert causal_conv(u, np.array([[1.0], [1.0]]))[:, 0].tolist() == [0.0, 1.0, 3.0, 5.0, 7.0]


def test_linearity():
    rng = np.random.default_rng(2)
    u, w, h = rng.normal(size=(40, 2)), rng.normal(size=(40, 2)), rng.normal(size=(40, 2))
    a, b = 1.7, -0.3
    lhs = causal_conv(a * u + b * w, h)
    rhs = a * causal_conv(u, h) + b * causal_conv(w, h)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_shape_errors():
    with pytest.raises(ValueError):
        causal_conv(np.zeros((4, 2)), np.zeros((4, 3)))
    with pytest.raises(ValueError):
        circular_conv(np.zeros((4, 1)), np.zeros((5, 1)))
    with pytest.raises(ValueError):
        causal_conv(np.zeros((4, 1)), np.zeros((4, 1)), method="magic")


def test_causal_conv_drops_taps_beyond_sequence():
    # a tap at lag >= N can never reach a causal output
    u = np.array([1.0, 2.0])
    h = np.array([[1.0], [0.0], [5.0]])
    assert causal_conv(u, h)[:, 0].tolist() == [1.0, 2.0]


def test_circular_identity_and_wrap():
    u = np.array([[1.0], [0.0], [0.0], [0.0]])
    h = spike(4, 3)
    y = circular_conv(u, h)
    assert y[:, 0].tolist() == [0.0, 0.0, 0.0, 1.0]
    y2 = circular_conv(y, h)
    assert y2[:, 0].tolist() == [0.0, 0.0, 1.0, 0.0]
    y = u
    for _ in range(4):
        y = circular_conv(y, h)
    assert np.array_equal(y, u)
    assert np.array_equal(circular_conv(u, spike(4, 0)), u)


@pytest.mark.parametrize("N", [5, 40])
def test_circular_against_modular_sum(N):
    rng = np.random.default_rng(N)
    u, h = rng.normal(size=(N, 2)), rng.normal(size=(N, 2))
    want = np.array([[sum(h[j, t] * u[(i - j) % N, t] for j in range(N)) for t in range(2)] for i in range(N)])
    for method in ("direct", "fft"):
        assert np.max(np.abs(circular_conv(u, h, method) - want)) <= 1e-10


def test_autocorrelation_examples():
    v = np.zeros(6)
    v[4] = 1.0
    assert autocorrelation(v).tolist() == [1.0, 0, 0, 0, 0, 0]
    assert autocorrelation(np.array([1.0, 0, 1, 0])).tolist() == [2.0, 0.0, 2.0, 0.0]


def test_autocorrelation_zero_lag_is_energy():
    v = np.random.default_rng(3).normal(size=50)
    for method in ("direct", "fft"):
        assert abs(autocorrelation(v, method)[0] - np.sum(v * v)) <= 1e-12 * max(1.0, np.sum(v * v))


def test_autocorrelation_rejects_nonfinite():
    with pytest.raises(ValueError):
        autocorrelation(np.array([1.0, np.nan]))


def test_channel_autocorrelation_counts_repeats():
    tokens = np.array([0, 1, 0, 2, 1, 0])
    u = one_hot_embed(tokens, 3)
    N = tokens.size
    want = [sum(tokens[i] == tokens[(i + s) % N] for i in range(N)) for s in range(N)]
    for method in ("direct", "fft"):
        assert np.allclose(channel_autocorrelation(u, method), want, atol=1e-9)


def test_softmax_rows():
    assert np.allclose(softmax_rows(np.array([[2.0, 2.0, 2.0, 2.0]])), 0.25)
    assert np.allclose(softmax_rows(np.array([[0.0, np.log(3.0)]])), [[0.25, 0.75]], atol=1e-12)
    m = softmax_rows(np.array([[1.0, -np.inf, 3.0]]))
    assert m[0, 1] == 0.0
    assert abs(m.sum() - 1.0) <= 1e-9


def test_softmax_rows_shift_invariant_and_normalised():
    m = np.random.default_rng(4).normal(size=(5, 7)) * 10
    a = softmax_rows(m)
    assert np.allclose(a.sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(softmax_rows(m + 123.0), a, atol=1e-12)


def test_softmax_fully_masked_row_is_zero():
    out = softmax_rows(np.array([[-np.inf, -np.inf], [0.0, 0.0]]))
    assert out[0].tolist() == [0.0, 0.0]
    assert np.all(np.isfinite(out))


def test_one_hot_embed():
    assert one_hot_embed([0], 3).tolist() == [[1.0, 0.0, 0.0]]
    assert one_hot_embed([2, 1], 3).tolist() == [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]
    tokens = np.random.default_rng(5).integers(0, 11, 30)
    assert np.array_equal(one_hot_embed(tokens, 11).argmax(axis=1), tokens)
    with pytest.raises(ValueError):
        one_hot_embed([3], 3)
