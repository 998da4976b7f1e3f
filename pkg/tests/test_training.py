import math

import numpy as np
import pytest

from mqar_lab.datagen import GenConfig, gen_mqar
from mqar_lab.training import (
    SWEEP_COLUMNS,
    AdamW,
    Batch,
    ModelSpec,
    TrainConfig,
    accuracy,
    backward,
    capacity_sweep,
    completed_cells,
    fd_gradcheck,
    forward,
    forward_loss,
    init_model,
    load_checkpoint,
    lr_scale,
    make_batch,
    rows_to_csv,
    save_checkpoint,
    train,
)

VARIANTS = ("attention", "baseconv")


def small_data(n=8, seq_len=16, pairs=2, vocab=16, seed=0, start=0):
    cfg = GenConfig(seq_len=seq_len, num_pairs=pairs, vocab_size=vocab, seed=seed)
    return [gen_mqar(cfg, start + i) for i in range(n)]


def small_model(variant, d=8, seq_len=16, vocab=16, seed=0, **kw):
    spec = ModelSpec(variant, d, vocab + 1, seq_len, **kw)
    return spec, init_model(spec, seed)


# ----------------------------------------------------------------- forward


@pytest.mark.parametrize("variant", VARIANTS)
def test_uniform_logits_give_log_vocab(variant):
    spec, p = small_model(variant)
    p["head.W"][:] = 0
    loss, logits = forward_loss(spec, p, make_batch(small_data()))
    assert np.allclose(logits, 0)
    assert loss == pytest.approx(math.log(spec.vocab), abs=1e-12)


def test_confident_correct_logits_give_zero_loss():
    spec, p = small_model("attention")
    batch = make_batch(small_data())
    p["head.W"][:] = 0
    p["head.b"][:] = 0
    p["head.b"][batch.lt[0]] = 1e3
    batch = Batch(batch.tokens, batch.lb[:1], batch.lp[:1], batch.lt[:1])
    assert forward_loss(spec, p, batch)[0] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("variant", VARIANTS)
def test_loss_matches_scalar_recomputation(variant):
    spec, p = small_model(variant, seed=3)
    batch = make_batch(small_data(seed=3))
    loss, logits = forward_loss(spec, p, batch)
    total = 0.0
    for row, target in zip(logits.tolist(), batch.lt.tolist()):
        top = max(row)
        total += top + math.log(sum(math.exp(v - top) for v in row)) - row[target]
    assert abs(loss - total / len(batch.lt)) <= 1e-9


def test_label_position_out_of_range():
    with pytest.raises(ValueError):
        Batch(np.zeros((1, 4), dtype=int), np.array([0]), np.array([4]), np.array([1]))


def test_attention_is_causal():
    spec, p = small_model("attention")
    data = small_data(n=1)
    batch = make_batch(data)
    _, logits, _ = forward(spec, p, batch)
    later = batch.tokens.copy()
    last = int(batch.lp.max())
    later[0, last + 1 :] = 0
    _, logits2, _ = forward(spec, p, Batch(later, batch.lb, batch.lp, batch.lt))
    assert np.allclose(logits, logits2, atol=1e-12)


# ---------------------------------------------------------------- backward


@pytest.mark.parametrize("variant", VARIANTS)
def test_gradcheck(variant):
    spec, p = small_model(variant, seed=1)
    err, name, _ = fd_gradcheck(spec, p, make_batch(small_data(n=4, seed=1)), eps=1e-5, samples=200)
    assert err <= 1e-4, (name, err)


def test_gradcheck_tied_embeddings():
    spec, p = small_model("attention", seed=2, tied=True)
    err, name, _ = fd_gradcheck(spec, p, make_batch(small_data(n=4, seed=2)), samples=100)
    assert err <= 1e-4, (name, err)


@pytest.mark.parametrize("variant", VARIANTS)
def test_no_labels_no_gradient(variant):
    spec, p = small_model(variant)
    full = make_batch(small_data())
    empty = Batch(full.tokens, full.lb[:0], full.lp[:0], full.lt[:0])
    grads = backward(spec, p, empty)
    assert set(grads) == set(p)
    assert all(not np.any(g) for g in grads.values())


@pytest.mark.parametrize("variant", VARIANTS)
def test_unused_embedding_has_zero_gradient(variant):
    spec, p = small_model(variant)
    batch = make_batch(small_data())
    unused = sorted(set(range(spec.vocab)) - set(batch.tokens.ravel().tolist()))
    assert unused
    g = backward(spec, p, batch)["embed"]
    assert not np.any(g[unused])
    used = sorted(set(batch.tokens.ravel().tolist()))
    assert np.all(np.any(g[used] != 0, axis=1))


# ---------------------------------------------------------------- optimiser


def test_lr_schedule():
    assert lr_scale(0, 100, 0.1) == pytest.approx(0.1)
    assert lr_scale(9, 100, 0.1) == pytest.approx(1.0)
    assert lr_scale(10, 100, 0.1) == pytest.approx(1.0)
    assert lr_scale(99, 100, 0.1) == pytest.approx(0.5 * (1 + math.cos(math.pi * 89 / 90)))


def test_adamw_first_step_is_sign_sized():
    p = {"w.W": np.array([1.0, -2.0]), "emb": np.array([3.0])}
    opt = AdamW(p, lr=0.1, weight_decay=0.0)
    opt.step(p, {"w.W": np.array([0.5, -4.0]), "emb": np.array([1e-3])})
    assert np.allclose(p["w.W"], [0.9, -1.9]) and np.allclose(p["emb"], [2.9])


def test_weight_decay_only_on_matrices():
    p = {"b0.W_Q": np.ones(2), "embed": np.ones(2)}
    AdamW(p, lr=0.5, weight_decay=0.1).step(p, {k: np.zeros(2) for k in p})
    assert np.allclose(p["b0.W_Q"], 0.95) and np.allclose(p["embed"], 1.0)


# ----------------------------------------------------------------- training


def test_zero_lr_leaves_params_unchanged():
    spec, p0 = small_model("baseconv")
    data, test = small_data(n=16), small_data(n=8, start=16)
    cfg = TrainConfig(epochs=2, batch_size=8, weight_decay=0.1)
    res = train(spec, data, test, cfg, 0.0, params={k: v.copy() for k, v in p0.items()})
    assert all(np.array_equal(res.params[k], p0[k]) for k in p0)
    assert res.history[-1]["test_acc"] == accuracy(spec, p0, make_batch(test))


@pytest.mark.parametrize("dtype", ["float64", "float32"])
def test_training_is_deterministic(dtype):
    spec, _ = small_model("attention")
    data, test = small_data(n=16), small_data(n=8, start=16)
    cfg = TrainConfig(epochs=3, batch_size=4, seed=5, dtype=dtype)
    a, b = train(spec, data, test, cfg, 3e-3), train(spec, data, test, cfg, 3e-3)
    assert a.history == b.history
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    assert a.params["embed"].dtype == np.dtype(dtype)


@pytest.mark.filterwarnings("ignore:invalid value:RuntimeWarning")
def test_divergence_is_recorded():
    spec, p = small_model("baseconv")
    p["head.b"][0] = np.inf
    res = train(spec, small_data(), small_data(start=8), TrainConfig(epochs=2, batch_size=8), 1e-3, params=p)
    assert res.failed and math.isnan(res.best_test_acc)


def memorization_setup(seed=0):
    gen = GenConfig(seq_len=32, num_pairs=4, alpha=0.1, vocab_size=64, seed=seed)
    data = [gen_mqar(gen, i) for i in range(512)]
    spec = ModelSpec("attention", 64, 65, 32)
    return spec, data


def test_memorization_smoke():
    spec, data = memorization_setup()
    cfg = TrainConfig(epochs=64, batch_size=64, dtype="float32", early_stop=0.99)
    res = train(spec, data, data, cfg, 1e-3)
    assert not res.failed
    assert res.best_test_acc >= 0.99


def test_early_epochs_mostly_decrease_loss():
    spec, data = memorization_setup()
    ok = 0
    seeds = range(10)
    for seed in seeds:
        cfg = TrainConfig(epochs=5, batch_size=64, seed=seed, dtype="float32")
        hist = train(spec, data, data[:64], cfg, 1e-3).history
        losses = [h["train_loss"] for h in hist]
        ok += all(b <= a for a, b in zip(losses, losses[1:]))
    assert ok >= 0.9 * len(seeds)


# ------------------------------------------------------------- checkpoints


def test_checkpoint_round_trip(tmp_path):
    _, p = small_model("attention")
    save_checkpoint(p, tmp_path / "m.ckpt")
    q = load_checkpoint(tmp_path / "m.ckpt")
    assert sorted(q) == sorted(p)
    assert all(np.array_equal(p[k], q[k]) and p[k].shape == q[k].shape for k in p)


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "x.ckpt"
    path.write_bytes(b"nope")
    with pytest.raises(ValueError):
        load_checkpoint(path)
    _, p = small_model("baseconv")
    save_checkpoint(p, path)
    path.write_bytes(path.read_bytes() + b"\0")
    with pytest.raises(ValueError):
        load_checkpoint(path)


# ------------------------------------------------------------------ sweeps

TINY = dict(lrs=(1e-3, 1e-2), epochs=1, batch_size=8, train_size=16, test_size=8, vocab_size=8)


def test_one_cell_sweep():
    rows = capacity_sweep([("baseconv", 8, 4)], TrainConfig(**TINY))
    assert [r["lr"] for r in rows] == [1e-3, 1e-2, "max"]
    best = max(r["best_test_acc"] for r in rows[:2])
    assert rows[-1]["best_test_acc"] == best
    assert completed_cells([{k: str(v) for k, v in r.items()} for r in rows]) == {("baseconv", 8, 4)}


def test_sweep_csv_reproducible():
    grid = [("attention", 8, 4), ("baseconv", 8, 8)]
    a = rows_to_csv(capacity_sweep(grid, TrainConfig(**TINY)))
    b = rows_to_csv(capacity_sweep(grid, TrainConfig(**TINY)))
    strip = lambda text: [line.rsplit(",", 1)[0] for line in text.splitlines()]
    assert a.splitlines()[0].split(",") == SWEEP_COLUMNS
    assert strip(a) == strip(b)


def test_sweep_parallel_matches_serial():
    grid = [("attention", 8, 4), ("baseconv", 8, 4)]
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_seconds"} for r in rows]
    cfg = TrainConfig(**TINY)
    assert strip(capacity_sweep(grid, cfg, jobs=2)) == strip(capacity_sweep(grid, cfg))


def test_model_spec_checks():
    with pytest.raises(ValueError):
        ModelSpec("rwkv", 8, 16, 16)
    with pytest.raises(ValueError):
        ModelSpec("attention", 8, 16, 16, n_layers=3)
