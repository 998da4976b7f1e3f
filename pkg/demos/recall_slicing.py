"""Slice a synthetic stream into recall hits and other tokens.

A fixed-filler sequence holds P key-value bigrams twice each.  Two made-up
models score it: one recalls the second value of every bigram, the other
guesses.  Their perplexity gap sits entirely on the hit slice.

    python3 demos/recall_slicing.py
"""

import numpy as np

from mqar_lab.analysis import compare_models, describe_attribution, find_ar_hits, slice_perplexity
from mqar_lab.datagen import gen_filler_eval

N, vocab = 512, 256
for P in (8, 32, 128):
    inst = gen_filler_eval(P, N, vocab, seed=1)
    doc = inst.tokens.tolist()
    hits = find_ar_hits(doc, exclude=[vocab])
    recall = np.full(N, np.log(0.5))
    recall[hits] = np.log(0.95)
    guess = np.full(N, np.log(0.5))
    guess[hits] = np.log(1 / (vocab // 2))
    good = slice_perplexity([recall], [hits])
    bad = slice_perplexity([guess], [hits])
    share = compare_models(bad, good)
    print(
        f"P={P:>3}  hit fraction={bad.p_H:.4f} (P/N={P / N:.4f})  "
        f"hit ppl guess={bad.ar_ppl:7.2f} recall={good.ar_ppl:5.2f}  "
        f"other ppl={bad.other_ppl:.2f}  gap share on hits={describe_attribution(share)}"
    )
