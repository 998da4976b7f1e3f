import math

import numpy as np
import pytest

from mqar_lab.analysis import (
    ARCHS,
    TIE,
    SliceReport,
    compare_models,
    describe_attribution,
    find_ar_hits,
    flops,
    format_csv,
    gap_attribution,
    gap_histogram,
    layer_macs,
    loglog_slope,
    overall_nll,
    read_freq,
    read_logprobs,
    read_stream,
    slice_perplexity,
)
from mqar_lab.datagen import GenConfig, gap_exposure, gen_filler_eval, gen_mqar


def words(text):
    ids = {}
    return [ids.setdefault(w, len(ids)) for w in text.split()]


# ------------------------------------------------------------------ hits


def test_hakuna_matata():
    doc = words("Hakuna Matata it means no worries for the rest of your days Hakuna Matata")
    assert find_ar_hits(doc) == [len(doc) - 1]


def test_no_repeats_no_hits():
    assert find_ar_hits([1, 2, 3, 4, 5]) == []
    assert find_ar_hits([]) == []
    assert find_ar_hits([7]) == []


def test_threshold_boundary():
    doc = [1, 2, 9, 1, 2]
    assert find_ar_hits(doc, {(1, 2): 1250}) == [4]
    assert find_ar_hits(doc, {(1, 2): 1251}) == []
    assert find_ar_hits(doc, {(1, 2): 0}, threshold=0) == [4]
    with pytest.raises(ValueError):
        find_ar_hits(doc, threshold=-1)


def test_every_repeat_after_the_first_is_a_hit():
    assert find_ar_hits([1, 2, 1, 2, 1, 2]) == [3, 4, 5]


def test_exclude_list():
    doc = [0, 5, 3, 0, 5, 3]
    assert find_ar_hits(doc) == [4, 5]
    assert find_ar_hits(doc, exclude=[0]) == [5]


def test_hits_are_causal():
    rng = np.random.default_rng(0)
    for _ in range(50):
        doc = rng.integers(0, 6, 40).tolist()
        full = find_ar_hits(doc)
        for p in range(len(doc)):
            assert find_ar_hits(doc[: p + 1]) == [h for h in full if h <= p]


def test_trigram_hits():
    assert find_ar_hits([1, 2, 3, 1, 2, 3], n=3) == [5]


# --------------------------------------------------------------- slicing


def test_constant_logprob_gives_perplexity_two():
    doc = [1, 2, 1, 2, 3]
    rep = slice_perplexity([np.full(5, -math.log(2))], [find_ar_hits(doc)])
    assert rep.ar_ppl == pytest.approx(2.0) and rep.other_ppl == pytest.approx(2.0)


def test_hand_built_stream():
    doc = [4, 5, 6, 4, 5, 7, 8, 6, 7, 8]
    hits = find_ar_hits(doc)
    assert hits == [4, 9]
    lp = np.log([0.5, 0.25, 0.5, 0.5, 0.8, 0.1, 0.5, 0.5, 0.5, 0.4])
    rep = slice_perplexity([lp], [hits])
    ar = -(math.log(0.8) + math.log(0.4)) / 2
    other = -(6 * math.log(0.5) + math.log(0.25) + math.log(0.1)) / 8
    assert (rep.total, rep.ar_count, rep.other_count) == (10, 2, 8)
    assert rep.p_H == 0.2
    assert rep.ar_nll == pytest.approx(ar, abs=1e-12)
    assert rep.other_nll == pytest.approx(other, abs=1e-12)
    assert rep.ar_ppl == pytest.approx(math.exp(ar))
    assert overall_nll(rep) == pytest.approx(-np.mean(lp))


def test_unscored_tokens_and_empty_slice():
    rep = slice_perplexity([np.array([np.nan, -1.0, -2.0])], [[]])
    assert (rep.total, rep.ar_count, rep.other_count) == (2, 0, 2)
    assert rep.ar_nll is None and rep.ar_ppl is None
    rec = rep.as_record()
    assert rec["ar_ppl"] == "undefined" and rec["other_nll"] == 1.5


def test_slice_rejects_bad_hits():
    with pytest.raises(ValueError):
        slice_perplexity([np.zeros(3)], [[3]])
    with pytest.raises(ValueError):
        slice_perplexity([np.zeros(3)], [])


def test_filler_stream_hit_fraction():
    N, vocab = 1024, 512
    for P in (16, 64, 256):
        inst = gen_filler_eval(P, N, vocab, seed=3)
        hits = find_ar_hits(inst.tokens.tolist(), exclude=[vocab])
        assert hits == sorted(p + 1 for p, _ in inst.labels)
        rep = slice_perplexity([np.full(N, -1.0)], [hits])
        assert rep.p_H == P / N


def test_slice_totals_random():
    rng = np.random.default_rng(1)
    docs = [rng.integers(0, 8, int(rng.integers(1, 60))).tolist() for _ in range(20)]
    lps = [np.where(rng.random(len(d)) < 0.1, np.nan, -rng.random(len(d))) for d in docs]
    rep = slice_perplexity(lps, [find_ar_hits(d) for d in docs])
    assert rep.ar_count + rep.other_count == rep.total == sum(int(np.isfinite(x).sum()) for x in lps)


# ----------------------------------------------------------- attribution


def test_attribution_example():
    assert abs(gap_attribution(3.0, 2.0, 2.078, 2.0, 0.064) - 0.064 / 0.078) <= 1e-6
    assert abs(gap_attribution(3.0, 2.0, 2.078, 2.0, 0.064) - 0.8205128) <= 1e-6


def test_attribution_tie_and_clamp():
    assert gap_attribution(2.0, 2.0, 1.5, 1.5, 0.1) is None
    assert describe_attribution(None) == TIE
    assert gap_attribution(2.0, 1.0, 1.0, 1.5, 0.1) is None
    assert gap_attribution(100.0, 0.0, 1.01, 1.0, 0.5) == 1.0
    assert gap_attribution(0.0, 1.0, 1.1, 1.0, 0.5) == 0.0


def test_attribution_in_unit_interval():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        a = gap_attribution(*rng.normal(size=4), rng.random())
        assert a is None or 0.0 <= a <= 1.0


def test_compare_models():
    doc = [1, 2, 1, 2]
    hits = [find_ar_hits(doc)]
    m = slice_perplexity([np.log([0.5, 0.5, 0.5, 0.1])], hits)
    M = slice_perplexity([np.log([0.5, 0.5, 0.5, 0.9])], hits)
    want = (math.log(0.9) - math.log(0.1)) * 0.25 / (overall_nll(m) - overall_nll(M))
    assert compare_models(m, M) == pytest.approx(min(want, 1.0))
    assert compare_models(m, m) is None


# ------------------------------------------------------------- histogram


def test_gap_histogram_examples():
    assert gap_histogram(words("A B x A B")) == {3: 1}
    assert gap_histogram([1, 2, 3]) == {}
    assert gap_histogram([1, 2, 1, 2, 1, 2]) == {2: 3}


def test_loglog_slope():
    hist = {g: int(1000 * g ** -1.5) for g in (1, 2, 4, 8, 16)}
    assert loglog_slope(hist) == pytest.approx(-1.5, abs=0.02)
    with pytest.raises(ValueError):
        loglog_slope({3: 1})


def test_generated_gap_slope_negative():
    cfg = GenConfig(seq_len=256, num_pairs=1, alpha=0.1, vocab_size=4, seed=5)
    hist = {}
    for i in range(3000):
        inst = gen_mqar(cfg, i)
        for g, c in gap_histogram(inst.tokens.tolist(), n=1, exclude=[cfg.pad_id]).items():
            hist[g] = hist.get(g, 0) + c
    gaps, weight = gap_exposure(cfg)
    # divide out the finite-sequence truncation before fitting
    rates = {int(g): hist[g] / w for g, w in zip(gaps, weight) if g in hist and w > 0}
    assert loglog_slope(rates) < 0


# ------------------------------------------------------------------ FLOPs


def test_flops_125m():
    got = flops("attention", B=1, N=2048, D=768, L=12, H=12)
    assert abs(got - 2.46e12) / 2.46e12 <= 0.15
    lit = flops("attention", B=1, N=2048, D=768, L=12, H=12, convention="literal")
    assert abs(lit - 2.46e12) / 2.46e12 <= 0.25


def test_flops_zero_batch_and_linearity():
    for arch in ARCHS:
        assert flops(arch, B=0, N=256, D=64, L=2) == 0
        one = flops(arch, B=1, N=256, D=64, L=2)
        assert flops(arch, B=2, N=256, D=64, L=2) == pytest.approx(2 * one)
        per_layer = 2 * 3 * sum(layer_macs(arch, 1, 256, 64).values())
        assert flops(arch, B=1, N=256, D=64, L=3) - one == pytest.approx(per_layer)


def test_flops_rejects():
    with pytest.raises(ValueError):
        flops("mamba", 1, 2, 3, 4)
    with pytest.raises(ValueError):
        flops("attention", 1, 0, 3, 4)
    with pytest.raises(ValueError):
        flops("attention", 1, 8, 8, 1, convention="other")


def test_forward_only_is_a_third():
    assert flops("hyena", 1, 1024, 256, 4) == pytest.approx(3 * flops("hyena", 1, 1024, 256, 4, training=False))


# -------------------------------------------------------------------- I/O


def test_stream_and_sidecar(tmp_path):
    (tmp_path / "s.txt").write_text("1 2 3\n4 5\n")
    (tmp_path / "lp.txt").write_text("nan -1 -2\n-0.5 -0.5\n")
    docs = read_stream(tmp_path / "s.txt")
    assert docs == [[1, 2, 3], [4, 5]]
    lps = read_logprobs(tmp_path / "lp.txt", docs)
    assert np.isnan(lps[0][0]) and lps[1].tolist() == [-0.5, -0.5]
    (tmp_path / "bad.txt").write_text("-1 -2\n-0.5 -0.5\n")
    with pytest.raises(ValueError, match="line 1"):
        read_logprobs(tmp_path / "bad.txt", docs)
    (tmp_path / "f.txt").write_text("1 2 40\n3 4 0\n")
    assert read_freq(tmp_path / "f.txt") == {(1, 2): 40, (3, 4): 0}


def test_format_csv():
    rep = SliceReport(3, 1, 2, 0.5, None, 1.6, None, 1 / 3)
    text = format_csv([rep.as_record()])
    assert text.splitlines()[0].startswith("total,ar_count")
    assert "undefined" in text.splitlines()[1]
