"""Recall analysis on token streams and per-architecture FLOPs counts.

An *AR hit* is the last token of an n-gram (bigram by default) that already
occurred earlier in the same document and whose training-set count is at or
below a threshold.  Slicing per-token log-probabilities by hit status gives
the two perplexities whose gap is attributed to recall.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

DEFAULT_THRESHOLD = 1250


# ------------------------------------------------------------------- hits


def _ngrams_ending(doc, n):
    for p in range(n - 1, len(doc)):
        yield p, tuple(doc[p - n + 1 : p + 1])


def find_ar_hits(doc, freq=None, threshold=DEFAULT_THRESHOLD, n=2, exclude=()):
    """Positions ``p`` whose n-gram ending at ``p`` occurred earlier in
    ``doc`` and has training count ``<= threshold`` (missing = 0).

    n-grams containing a token from ``exclude`` never count.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    freq = freq or {}
    exclude = set(int(x) for x in exclude)
    doc = [int(x) for x in doc]
    seen = set()
    hits = []
    for p, gram in _ngrams_ending(doc, n):
        if exclude and any(t in exclude for t in gram):
            continue
        if gram in seen and freq.get(gram, 0) <= threshold:
            hits.append(p)
        seen.add(gram)
    return hits


def gap_histogram(doc, n=2, freq=None, threshold=None, exclude=()):
    """Distance from each repeated n-gram to its most recent earlier
    occurrence, aggregated as ``{distance: count}``."""
    exclude = set(int(x) for x in exclude)
    doc = [int(x) for x in doc]
    last = {}
    hist = {}
    for p, gram in _ngrams_ending(doc, n):
        if exclude and any(t in exclude for t in gram):
            continue
        if gram in last:
            if threshold is None or (freq or {}).get(gram, 0) <= threshold:
                g = p - last[gram]
                hist[g] = hist.get(g, 0) + 1
        last[gram] = p
    return dict(sorted(hist.items()))


def loglog_slope(hist, min_count=1):
    """Least-squares slope of log(count) against log(distance)."""
    xs = [math.log(g) for g, c in hist.items() if c >= min_count and g > 0]
    ys = [math.log(c) for g, c in hist.items() if c >= min_count and g > 0]
    if len(xs) < 2:
        raise ValueError("need at least two populated distances")
    return float(np.polyfit(xs, ys, 1)[0])


# ---------------------------------------------------------------- slicing


@dataclass
class SliceReport:
    total: int
    ar_count: int
    other_count: int
    ar_nll: float | None
    other_nll: float | None
    ar_ppl: float | None
    other_ppl: float | None
    p_H: float
    attribution: float | None = None

    def as_record(self):
        return {k: ("undefined" if v is None else v) for k, v in asdict(self).items()}


def _mean_or_none(xs):
    return float(np.mean(xs)) if len(xs) else None


def slice_perplexity(logprobs, hits):
    """Split scored tokens into the hit slice and the rest.

    ``logprobs`` is a list of per-document arrays (NaN = not scored) and
    ``hits`` the matching list of hit position lists.  Empty slices report
    ``None`` for their NLL and perplexity.
    """
    if len(logprobs) != len(hits):
        raise ValueError("need one hit list per document")
    ar, other = [], []
    for lp, hs in zip(logprobs, hits):
        lp = np.asarray(lp, dtype=np.float64)
        mask = np.zeros(lp.size, dtype=bool)
        hs = np.asarray(list(hs), dtype=np.int64)
        if hs.size and (hs.min() < 0 or hs.max() >= lp.size):
            raise ValueError("hit position outside the document")
        mask[hs] = True
        scored = np.isfinite(lp)
        ar.extend((-lp[mask & scored]).tolist())
        other.extend((-lp[~mask & scored]).tolist())
    total = len(ar) + len(other)
    ar_nll, other_nll = _mean_or_none(ar), _mean_or_none(other)
    return SliceReport(
        total=total,
        ar_count=len(ar),
        other_count=len(other),
        ar_nll=ar_nll,
        other_nll=other_nll,
        ar_ppl=None if ar_nll is None else math.exp(ar_nll),
        other_ppl=None if other_nll is None else math.exp(other_nll),
        p_H=len(ar) / total if total else 0.0,
    )


def overall_nll(report: SliceReport):
    parts = [(report.ar_count, report.ar_nll), (report.other_count, report.other_nll)]
    num = sum(c * v for c, v in parts if v is not None)
    return num / report.total if report.total else None


TIE = "undefined (models tie overall)"


def gap_attribution(lH_m, lH_M, l_m, l_M, p_H):
    """Share of the overall loss gap explained by the hit slice:
    ``min((lH_m - lH_M) * p_H / (l_m - l_M), 1)``, floored at 0.

    Returns ``None`` when the overall gap is zero or negative (the model is
    not worse overall, so there is nothing to attribute).
    """
    denom = l_m - l_M
    if denom <= 0:
        return None
    return float(min(max((lH_m - lH_M) * p_H / denom, 0.0), 1.0))


def describe_attribution(value):
    return TIE if value is None else f"{value:.6f}"


def compare_models(report_m: SliceReport, report_M: SliceReport):
    """Gap attribution from two slice reports over the same stream."""
    if report_m.ar_nll is None or report_M.ar_nll is None:
        return None
    return gap_attribution(report_m.ar_nll, report_M.ar_nll, overall_nll(report_m), overall_nll(report_M), report_m.p_H)


# ------------------------------------------------------------------- I/O


def read_stream(path):
    """One document per line of space-separated integer ids."""
    docs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        try:
            docs.append([int(x) for x in line.split()])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return docs


def read_logprobs(path, docs):
    """Sidecar of per-token log-probs aligned with ``docs`` (``nan`` allowed)."""
    lines = Path(path).read_text().splitlines()
    if len(lines) != len(docs):
        raise ValueError(f"{path}: {len(lines)} lines for {len(docs)} documents")
    out = []
    for lineno, (line, doc) in enumerate(zip(lines, docs), start=1):
        vals = np.array([float(x) for x in line.split()])
        if vals.size != len(doc):
            raise ValueError(f"{path} line {lineno}: {vals.size} log-probs for {len(doc)} tokens")
        out.append(vals)
    return out


def read_freq(path):
    """Lines ``a b count`` (or any n-gram followed by its count)."""
    table = {}
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if parts:
            table[tuple(int(x) for x in parts[:-1])] = int(parts[-1])
    return table


def format_record(mapping):
    return "".join(f"{k}={v}\n" for k, v in mapping.items())


def format_csv(rows):
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


# ------------------------------------------------------------------ FLOPs

ARCHS = ("attention", "hyena", "h3", "longconv", "baseconv", "rwkv")


def layer_macs(arch, B, N, D, H=1, convention="calibrated"):
    """Multiply-accumulates of one layer, forward pass, itemised."""
    logN = math.log2(N) if N > 1 else 0.0
    fftconv = 10 * N * logN * D * B
    if arch == "attention":
        rows = {"qkv": 3 * B * N * D * D, "out_proj": B * N * D * D}
        if convention == "calibrated":
            rows["scores"] = B * N * N * D
            rows["mix"] = B * N * N * D
            rows["ffn"] = 8 * B * N * D * D
        elif convention == "literal":
            rows["attention"] = B * H * H * D + B * H * N * N + B * N * N * D
            rows["ffn"] = B * D * D * 8 * (2 / 3) * N
        else:
            raise ValueError(f"unknown attention convention {convention!r}")
        return rows
    if arch in ("hyena", "h3"):
        return {
            "in_proj": 3 * B * N * D * D + 9 * B * N * D,
            "long_conv": fftconv,
            "short_conv": 3 * B * N * D,
            "implicit_mlp": B * D * 64,
            "out_proj": B * N * D * D,
            "ffn": 4 * B * N * D * D,
        }
    if arch == "longconv":
        return {"long_conv": fftconv, "out_proj": B * N * D * D, "ffn": 8 * (2 / 3) * B * N * D * D}
    if arch == "baseconv":
        half = 0.5 * D
        return {
            "long_conv": 10 * N * logN * half * B,
            "short_conv": B * N * half,
            "implicit_mlp": B * half * 64,
            "proj": B * N * D * D,
            "ffn": 4 * B * N * D * D,
        }
    if arch == "rwkv":
        # time mix 4 D^2 + channel mix 9 D^2 of linear parameters
        return {"linear": 13 * D * D * B * N}
    raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHS}")


def flops(arch, B, N, D, L, V=50257, H=1, convention="calibrated", training=True):
    """Total FLOPs: per-layer rows times ``L`` plus embedding and LM head.

    Each multiply-accumulate counts as 2 FLOPs; ``training`` triples the
    forward cost for the backward pass.
    """
    if min(N, D, L, V, H) <= 0 or B < 0:
        raise ValueError("dimensions must be positive")
    per_layer = sum(layer_macs(arch, B, N, D, H, convention).values())
    io_macs = 2 * B * V * N * D
    macs = L * per_layer + io_macs
    return 2 * macs * (3 if training else 1)
