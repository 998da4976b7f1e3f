"""Synthetic recall data: MQAR, single-query AR and fixed-filler sequences.

Token layout for an MQAR instance of length ``N`` with ``D`` pairs and key /
value vocabulary ``c``:

* positions ``0 .. 2D-1`` hold the pairs, keys at even offsets (ids in
  ``[0, c/2)``) and their values at odd offsets (ids in ``[c/2, c)``);
* each key is repeated exactly once somewhere in ``[2D, N)``; that position is
  a label whose target is the key's value;
* every other position holds the pad id ``c``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = "mqar-v1"


@dataclass(frozen=True)
class GenConfig:
    seq_len: int
    num_pairs: int
    alpha: float = 0.1
    vocab_size: int = 8192
    seed: int = 0
    num_examples: int = 1
    # "gap": weight (p - p_first)^-alpha.  "absolute": weight (p + 1)^-alpha.
    placement: str = "gap"

    def validate(self):
        if self.vocab_size < 2 or self.vocab_size % 2:
            raise ValueError("vocab_size must be even and at least 2")
        if self.num_pairs < 1:
            raise ValueError("num_pairs must be positive")
        if self.num_pairs > self.vocab_size // 2:
            raise ValueError("num_pairs cannot exceed vocab_size / 2")
        if 2 * self.num_pairs > self.seq_len:
            raise ValueError("2 * num_pairs must not exceed seq_len")
        if self.seq_len - 2 * self.num_pairs < self.num_pairs:
            raise ValueError(
                f"cannot place {self.num_pairs} repeated keys in "
                f"{self.seq_len - 2 * self.num_pairs} free slots"
            )
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.placement not in ("gap", "absolute"):
            raise ValueError(f"unknown placement {self.placement!r}")
        return self

    @property
    def pad_id(self):
        return self.vocab_size


@dataclass
class MqarInstance:
    tokens: np.ndarray
    labels: list[tuple[int, int]]
    meta: dict = field(default_factory=dict)
    # Positions scored as ordinary language modelling (fixed-filler variant).
    other_labels: list[tuple[int, int]] = field(default_factory=list)

    def __eq__(self, other):
        return (
            isinstance(other, MqarInstance)
            and np.array_equal(self.tokens, other.tokens)
            and list(self.labels) == list(other.labels)
            and self.meta == other.meta
            and list(self.other_labels) == list(other.other_labels)
        )


def instance_rng(seed, index, stream="datagen"):
    """Generator for one instance, derived from the global seed and the index.

    The result does not depend on how many instances were drawn before, so
    datasets can be sharded across workers freely.
    """
    tag = int.from_bytes(stream.encode(), "little") % (2**32)
    return np.random.default_rng(np.random.SeedSequence([tag, seed % 2**64, index]))


def _pick(rng, weights):
    cdf = np.cumsum(weights)
    return int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right").clip(0, len(cdf) - 1))


def _draw_pairs(rng, num_pairs, vocab):
    half = vocab // 2
    keys = rng.choice(half, size=num_pairs, replace=False)
    values = half + rng.choice(half, size=num_pairs, replace=False)
    return keys.astype(np.int64), values.astype(np.int64)


def gen_mqar(cfg: GenConfig, index: int) -> MqarInstance:
    cfg.validate()
    rng = instance_rng(cfg.seed, index)
    n, d, c = cfg.seq_len, cfg.num_pairs, cfg.vocab_size
    keys, values = _draw_pairs(rng, d, c)

    tokens = np.full(n, cfg.pad_id, dtype=np.int64)
    tokens[0 : 2 * d : 2] = keys
    tokens[1 : 2 * d : 2] = values

    free = np.arange(2 * d, n)
    labels = []
    for pair in rng.permutation(d):
        if cfg.placement == "gap":
            base = free - 2 * pair
        else:
            base = free + 1
        weights = base.astype(np.float64) ** (-cfg.alpha)
        slot = _pick(rng, weights)
        pos = int(free[slot])
        free = np.delete(free, slot)
        tokens[pos] = keys[pair]
        labels.append((pos, int(values[pair])))
    labels.sort()
    meta = _meta(cfg, index, "mqar")
    return MqarInstance(tokens, labels, meta)


def gen_single_query(cfg: GenConfig, index: int) -> MqarInstance:
    """``D`` pairs, pad, then one previously seen key at position ``N-1``."""
    cfg.validate()
    n, d, c = cfg.seq_len, cfg.num_pairs, cfg.vocab_size
    if n < 2 * d + 1:
        raise ValueError("single-query instances need seq_len >= 2 * num_pairs + 1")
    rng = instance_rng(cfg.seed, index, "single")
    keys, values = _draw_pairs(rng, d, c)
    tokens = np.full(n, cfg.pad_id, dtype=np.int64)
    tokens[0 : 2 * d : 2] = keys
    tokens[1 : 2 * d : 2] = values
    pick = int(rng.integers(d))
    tokens[n - 1] = keys[pick]
    return MqarInstance(tokens, [(n - 1, int(values[pick]))], _meta(cfg, index, "single"))


def gen_filler_eval(P: int, N: int, vocab: int, seed: int, index: int = 0) -> MqarInstance:
    """Each of ``P`` key-value bigrams occurs twice; every other slot is filler.

    The filler id is ``vocab`` (the pad id).  Bigrams sit on even-aligned
    slots, and no bigram other than the ``P`` pairs and filler bigrams
    repeats.  ``labels`` holds the recall positions (second occurrence of
    each key, target = its value).  ``other_labels`` holds every position whose
    successor is filler, with target = filler.
    """
    if P < 1 or vocab < 2 or vocab % 2:
        raise ValueError("need P >= 1 and an even vocabulary of at least 2")
    if 4 * P > N:
        raise ValueError(f"{P} bigrams occurring twice do not fit in {N} tokens")
    if P > vocab // 2:
        raise ValueError("P cannot exceed vocab / 2")
    rng = instance_rng(seed, index, "filler")
    keys, values = _draw_pairs(rng, P, vocab)
    filler = vocab
    # Redraw layouts in which two bigrams sit back to back in the same order
    # twice: the repeated (value, next key) bigram would be a spurious hit.
    for _ in range(10_000):
        slots = np.sort(rng.choice(N // 2, size=2 * P, replace=False)) * 2
        order = rng.permutation(np.repeat(np.arange(P), 2))
        adjacent = [(a, b) for s, t, a, b in zip(slots, slots[1:], order, order[1:]) if t == s + 2]
        if len(adjacent) == len(set(adjacent)):
            break
    else:
        raise RuntimeError("could not find a layout without repeated cross-pair bigrams")
    tokens = np.full(N, filler, dtype=np.int64)
    seen = set()
    labels = []
    for start, pair in zip(slots, order):
        tokens[start] = keys[pair]
        tokens[start + 1] = values[pair]
        if pair in seen:
            labels.append((int(start), int(values[pair])))
        seen.add(pair)
    other = [(p, filler) for p in range(N - 1) if tokens[p + 1] == filler]
    meta = {"N": N, "D": P, "alpha": 0.0, "vocab": vocab, "seed": seed, "index": index, "variant": "filler"}
    return MqarInstance(tokens, labels, meta, other)


def _meta(cfg, index, variant):
    return {
        "N": cfg.seq_len,
        "D": cfg.num_pairs,
        "alpha": cfg.alpha,
        "vocab": cfg.vocab_size,
        "seed": cfg.seed,
        "index": index,
        "variant": variant,
    }


def generate(cfg: GenConfig, variant="mqar", start=0):
    fn = {"mqar": gen_mqar, "single": gen_single_query}[variant]
    return [fn(cfg, i) for i in range(start, start + cfg.num_examples)]


def check_instance(inst: MqarInstance):
    """Raise ``ValueError`` unless ``inst`` follows the MQAR token layout
    described in the module docstring (sizes are read from ``meta``)."""
    n, d, c = inst.meta["N"], inst.meta["D"], inst.meta["vocab"]
    toks = np.asarray(inst.tokens)
    if toks.shape != (n,):
        raise ValueError(f"expected {n} tokens, got shape {toks.shape}")
    keys, values = toks[0 : 2 * d : 2], toks[1 : 2 * d : 2]
    if np.any(keys < 0) or np.any(keys >= c // 2):
        raise ValueError("key id outside [0, c/2)")
    if np.any(values < c // 2) or np.any(values >= c):
        raise ValueError("value id outside [c/2, c)")
    if len(set(keys.tolist())) != d:
        raise ValueError("keys are not distinct")
    if len(inst.labels) != d:
        raise ValueError(f"expected {d} labels, got {len(inst.labels)}")
    value_of = dict(zip(keys.tolist(), values.tolist()))
    rest = np.ones(n, dtype=bool)
    rest[: 2 * d] = False
    for pos, target in inst.labels:
        if not 2 * d <= pos < n:
            raise ValueError(f"label position {pos} outside [2D, N)")
        if value_of.get(int(toks[pos])) != target:
            raise ValueError(f"label at {pos} does not recall its key's value")
        rest[pos] = False
    if len({pos for pos, _ in inst.labels}) != d:
        raise ValueError("two labels share a position")
    if np.any(toks[rest] != c):
        raise ValueError("non-pad token outside the pair block and label positions")


def instance_gaps(inst: MqarInstance):
    """Distance from each key's first occurrence to its repeat (pad and
    filler ids, which equal ``meta["vocab"]``, are skipped)."""
    pad = inst.meta.get("vocab")
    first = {}
    gaps = []
    for pos, tok in enumerate(inst.tokens.tolist()):
        if tok == pad:
            continue
        if tok in first:
            gaps.append(pos - first[tok])
        else:
            first[tok] = pos
    return gaps


def gap_exposure(cfg: GenConfig):
    """Expected relative frequency of each gap under gap-relative placement.

    Collisions between pairs are ignored, so this is exact for one pair and a
    close approximation when ``D`` is small next to ``N``.  Returns
    ``(gaps, weight)`` where ``weight[g]`` is the summed per-pair chance that
    gap ``g`` is drawn, divided by ``g^-alpha``; dividing an observed histogram
    by it removes the truncation caused by the finite sequence.
    """
    n, d = cfg.seq_len, cfg.num_pairs
    gaps = np.arange(1, n)
    weight = np.zeros(gaps.size)
    for pair in range(d):
        feasible = (2 * pair + gaps >= 2 * d) & (2 * pair + gaps < n)
        z = np.sum(gaps[feasible] ** (-cfg.alpha))
        weight += feasible / z
    return gaps, weight


# ---------------------------------------------------------------- files


def _record(inst: MqarInstance):
    rec = {
        "tokens": inst.tokens.tolist(),
        "labels": [{"pos": int(p), "target": int(t)} for p, t in inst.labels],
        "meta": inst.meta,
    }
    if inst.other_labels:
        rec["other_labels"] = [{"pos": int(p), "target": int(t)} for p, t in inst.other_labels]
    return rec


def dumps_instance(inst):
    return json.dumps(_record(inst), sort_keys=True, separators=(",", ":"))


def write_dataset(instances, path):
    path = Path(path)
    with path.open("w") as fh:
        fh.write(json.dumps({"format": FORMAT_VERSION}, separators=(",", ":")) + "\n")
        for inst in instances:
            fh.write(dumps_instance(inst) + "\n")


class DatasetFormatError(ValueError):
    pass


def _parse_labels(rec, name, lineno):
    try:
        return [(int(x["pos"]), int(x["target"])) for x in rec[name]]
    except (KeyError, TypeError) as exc:
        raise DatasetFormatError(f"line {lineno}: bad or missing field {name!r}") from exc


def read_dataset(path):
    instances = []
    with Path(path).open() as fh:
        lines = fh.read().splitlines()
    if not lines:
        return instances
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"line 1: malformed header ({exc.msg})") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT_VERSION:
        raise DatasetFormatError(f"line 1: expected format {FORMAT_VERSION!r}, got {header!r}")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"line {lineno}: malformed record ({exc.msg})") from exc
        if not isinstance(rec, dict):
            raise DatasetFormatError(f"line {lineno}: record is not a map")
        for name in ("tokens", "labels", "meta"):
            if name not in rec:
                raise DatasetFormatError(f"line {lineno}: missing field {name!r}")
        labels = _parse_labels(rec, "labels", lineno)
        other = _parse_labels(rec, "other_labels", lineno) if "other_labels" in rec else []
        tokens = np.asarray(rec["tokens"], dtype=np.int64)
        instances.append(MqarInstance(tokens, labels, rec["meta"], other))
    return instances
