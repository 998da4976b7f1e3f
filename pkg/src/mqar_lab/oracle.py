"""Reference solvers for multi-query associative recall.

Two input formats are supported.  A *token sequence* is a flat array of ids.
A *triple sequence* is three aligned arrays ``keys``, ``values`` and
``queries``; step ``i`` first looks up ``queries[i]`` among the keys inserted
at earlier steps and then inserts ``(keys[i], values[i])``.  A token sequence
``x`` converts to triples ``(x[i], x[i+1], x[i])``.

When a query matches several earlier keys the ``tie`` argument decides:
``"recent"`` (default) reports the latest one, ``"first"`` the earliest.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

NO_MATCH = -1


@dataclass
class RecallLabeling:
    """Per step: index of the matched key (or -1) and its value (or -1)."""

    match: np.ndarray
    value: np.ndarray

    def __eq__(self, other):
        return (
            isinstance(other, RecallLabeling)
            and np.array_equal(self.match, other.match)
            and np.array_equal(self.value, other.value)
        )

    def answered(self):
        """Map from step index to the recalled value, for matched steps only."""
        idx = np.flatnonzero(self.match != NO_MATCH)
        return {int(i): int(self.value[i]) for i in idx}


def _check_tie(tie):
    if tie not in ("recent", "first"):
        raise ValueError(f"tie must be 'recent' or 'first', got {tie!r}")


def tokens_to_triples(tokens, end=-1):
    """Triples ``(x_i, x_{i+1}, x_i)``; the last value is ``end``."""
    tokens = np.asarray(tokens, dtype=np.int64)
    values = np.append(tokens[1:], end)
    return tokens.copy(), values, tokens.copy()


def sequential_mqar(keys, values, queries, ignore=(), tie="recent"):
    _check_tie(tie)
    ignore = set(int(x) for x in ignore)
    keys = np.asarray(keys, dtype=np.int64).tolist()
    values = np.asarray(values, dtype=np.int64).tolist()
    queries = np.asarray(queries, dtype=np.int64).tolist()
    n = len(keys)
    match = np.full(n, NO_MATCH, dtype=np.int64)
    value = np.full(n, NO_MATCH, dtype=np.int64)
    table = {}
    for i in range(n):
        q = queries[i]
        if q not in ignore and q in table:
            j = table[q]
            match[i] = j
            value[i] = values[j]
        k = keys[i]
        if k in ignore:
            continue
        if tie == "recent" or k not in table:
            table[k] = i
    return RecallLabeling(match, value)


def token_mqar(tokens, ignore=(), tie="recent"):
    """Def.-style recall on a flat sequence: position ``i`` recalls
    ``tokens[j+1]`` for a prior ``j`` with ``tokens[j] == tokens[i]``."""
    _check_tie(tie)
    ignore = set(int(x) for x in ignore)
    toks = np.asarray(tokens, dtype=np.int64).tolist()
    n = len(toks)
    match = np.full(n, NO_MATCH, dtype=np.int64)
    value = np.full(n, NO_MATCH, dtype=np.int64)
    last = {}
    for i, tok in enumerate(toks):
        if tok in ignore:
            continue
        if tok in last:
            j = last[tok]
            match[i] = j
            value[i] = toks[j + 1]
        if tie == "recent" or tok not in last:
            last[tok] = i
    return RecallLabeling(match, value)


def pbs_multiple_search(A, B, check=True):
    """For sorted ``A`` and ``B`` return ``C[i] = min{j : A[i] <= B[j]}``
    (``len(B)`` when no such ``j`` exists).

    Recursive midpoint scheme: the middle query is located first, which
    splits both the query range and the candidate range of ``B`` for the two
    halves.  The recursion is run with an explicit stack.
    """
    A = np.asarray(A)
    B = np.asarray(B)
    if check:
        if A.size > 1 and np.any(A[1:] < A[:-1]):
            raise ValueError("A must be sorted in nondecreasing order")
        if B.size > 1 and np.any(B[1:] < B[:-1]):
            raise ValueError("B must be sorted in nondecreasing order")
    n, m = A.size, B.size
    C = np.empty(n, dtype=np.int64)
    a = A.tolist()
    b = B.tolist()
    # (s, t) query range, (x, y) candidate range in B, both inclusive.
    stack = [(0, n - 1, 0, m - 1)]
    while stack:
        s, t, x, y = stack.pop()
        if s > t:
            continue
        if x > y:
            # every query in the range lands on the same insertion point
            C[s : t + 1] = x
            continue
        mid = (s + t) // 2
        q = a[mid]
        if q <= b[x]:
            C[s : mid + 1] = x
            stack.append((mid + 1, t, x, y))
        elif q > b[y]:
            C[mid : t + 1] = y + 1
            stack.append((s, mid - 1, x, y))
        else:
            # b[x] < q <= b[y]: binary search for the first b[z] >= q
            lo, hi = x + 1, y
            while lo < hi:
                h = (lo + hi) // 2
                if b[h] >= q:
                    hi = h
                else:
                    lo = h + 1
            z = lo
            C[mid] = z
            stack.append((s, mid - 1, x, z - 1))
            stack.append((mid + 1, t, z, y))
    return C


def _level(k, keys, queries, tie):
    """Matches between key block ``x0`` and query block ``x1`` for every
    dyadic prefix ``x`` at block size ``2**k``, solved in one pbs call.

    Block id is folded into the sort key, so concatenating all block pairs
    still gives globally sorted arrays.
    """
    T = keys.size
    idx = np.arange(T)
    pair_id = idx >> (k + 1)
    in_key_half = ((idx >> k) & 1) == 0
    key_idx = idx[in_key_half]
    qry_idx = idx[~in_key_half]
    span = int(max(keys.max(), queries.max())) + 2
    key_comp = pair_id[key_idx] * span + keys[key_idx]
    qry_comp = pair_id[qry_idx] * span + queries[qry_idx]
    # Among equal keys the preferred index must come first.
    secondary = -key_idx if tie == "recent" else key_idx
    korder = np.lexsort((secondary, key_comp))
    qorder = np.argsort(qry_comp, kind="stable")
    B = key_comp[korder]
    A = qry_comp[qorder]
    C = pbs_multiple_search(A, B, check=False)
    hit = C < B.size
    hit[hit] = B[C[hit]] == A[hit]
    out = np.full(T, NO_MATCH, dtype=np.int64)
    out[qry_idx[qorder[hit]]] = key_idx[korder[C[hit]]]
    return out


def parallel_mqar(keys, values, queries, ignore=(), tie="recent", workers=None):
    """Dyadic-interval MQAR solver.

    The ``T`` steps are padded to a power of two with sentinel triples.  For
    each level ``k`` every query in the right half of an aligned block of
    size ``2**(k+1)`` is searched among the keys of the left half.  Each pair
    ``j < i`` shares exactly one such block, so combining the per-level
    answers gives the full labeling.  Levels are independent and may run on a
    thread pool; the combination is order-independent.
    """
    _check_tie(tie)
    keys = np.asarray(keys, dtype=np.int64)
    values = np.asarray(values, dtype=np.int64)
    queries = np.asarray(queries, dtype=np.int64)
    n = keys.size
    match = np.full(n, NO_MATCH, dtype=np.int64)
    value = np.full(n, NO_MATCH, dtype=np.int64)
    if n == 0:
        return RecallLabeling(match, value)
    top = int(max(keys.max(), queries.max(), 0))
    key_sentinel, query_sentinel = top + 1, top + 2
    T = 1 << max(0, int(np.ceil(np.log2(n))))
    k_arr = np.full(T, key_sentinel, dtype=np.int64)
    q_arr = np.full(T, query_sentinel, dtype=np.int64)
    k_arr[:n] = keys
    q_arr[:n] = queries
    if ignore:
        ign = np.asarray(sorted(set(int(x) for x in ignore)), dtype=np.int64)
        k_arr[:n][np.isin(keys, ign)] = key_sentinel
        q_arr[:n][np.isin(queries, ign)] = query_sentinel
    # Sentinels are non-negative so the composite keys in _level stay ordered.
    shift = -min(int(k_arr.min()), int(q_arr.min()), 0)
    k_arr += shift
    q_arr += shift

    levels = range(int(np.log2(T)))
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda k: _level(k, k_arr, q_arr, tie), levels))
    else:
        results = [_level(k, k_arr, q_arr, tie) for k in levels]

    best = np.full(T, NO_MATCH, dtype=np.int64)
    for res in results:
        found = res != NO_MATCH
        if tie == "recent":
            best = np.where(found, np.maximum(best, res), best)
        else:
            take = found & ((best == NO_MATCH) | (res < best))
            best = np.where(take, res, best)
    match[:] = best[:n]
    hit = match != NO_MATCH
    value[hit] = values[match[hit]]
    return RecallLabeling(match, value)


def instance_triples(tokens):
    """Triples for a token instance, with the trailing value set to -1."""
    return tokens_to_triples(tokens, end=-1)


def score(predictions, labels):
    """Fraction of labels whose position carries the target in ``predictions``.

    ``predictions`` is a mapping from position to token, or a sequence aligned
    with ``labels``.
    """
    labels = list(labels)
    if not labels:
        raise ValueError("cannot score an empty label set")
    if isinstance(predictions, dict):
        missing = [p for p, _ in labels if p not in predictions]
        if missing:
            raise ValueError(f"no prediction for label positions {missing[:5]}")
        preds = [predictions[p] for p, _ in labels]
    else:
        preds = list(predictions)
        if len(preds) != len(labels):
            raise ValueError(f"{len(preds)} predictions for {len(labels)} labels")
    correct = sum(int(p) == int(t) for p, (_, t) in zip(preds, labels))
    return correct / len(labels)


def labels_from_oracle(tokens, ignore=()):
    """Recall labels ``(pos, value)`` implied by ``token_mqar``."""
    lab = token_mqar(tokens, ignore=ignore)
    return sorted(lab.answered().items())
