"""Solve random MQAR instances with the hand-built layers and compare them
against the reference oracle.

    python3 demos/exact_constructions.py
"""

import numpy as np

from mqar_lab.constructions import (
    encode_triples_compact,
    random_gap_triples,
    random_triples,
    solve_mqar_attention,
    solve_mqar_autocorr,
    top_shifts,
)
from mqar_lab.numerics import one_hot_embed
from mqar_lab.oracle import sequential_mqar

rng = np.random.default_rng(0)

# Two attention layers with weights fixed by the vocabulary size alone.
c = 16
keys, values, queries = random_triples(rng, 12, c)
truth = sequential_mqar(keys, values, queries).value
got = solve_mqar_attention(keys, values, queries, c)
print("attention solver")
print("  queries:", queries.tolist())
print("  oracle :", truth.tolist())
print("  layers :", got.tolist())

# Input-dependent convolutions: the filter taps are chosen from the data.
print("\ntop cyclic autocorrelation lags of 'A B A B C A B':", top_shifts(one_hot_embed([0, 1, 0, 1, 2, 0, 1], 3), 2))

print("\nautocorrelation solver, 3 interaction distances")
keys, values, queries, gap_of = random_gap_triples(rng, 20, 48, [2, 5, 9])
truth = sequential_mqar(keys, values, queries).value
enc = encode_triples_compact(keys, values, queries, 48)
for t in (1, 2, 3):
    acc = np.mean(solve_mqar_autocorr(enc, t=t) == truth)
    print(f"  filter budget t={t}: accuracy {acc:.3f}")
