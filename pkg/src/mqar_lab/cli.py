"""Command-line entry point: ``mqar-lab <command> [flags]``.

Every flag can also come from a flat ``key=value`` file given with
``--config``; keys are the flag names without the leading dashes (dashes
and underscores are interchangeable).  Flags on the command line win.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
import zlib
from pathlib import Path

import numpy as np

from . import analysis, constructions, datagen, oracle, training

FAULT_ENV = "MQAR_INJECT_FAULT"


def substream_seed(seed, name):
    """Independent 32-bit seed for a named component of one run."""
    ss = np.random.SeedSequence([int(seed) % 2**64, zlib.crc32(name.encode())])
    return int(ss.generate_state(1)[0])


def default_jobs():
    raw = os.environ.get("MQAR_JOBS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def read_config(path):
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path} line {lineno}: expected key=value")
        key, val = line.split("=", 1)
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _ints(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _floats(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


# --------------------------------------------------------------- manifest


def write_manifest(args, extra=None, stream=None):
    """Write the resolved configuration as ``key=value`` lines.

    Goes to ``--manifest`` when given, else next to ``--out`` as
    ``<out>.manifest``, else to stderr.
    """
    record = {"command": args.command}
    for key, val in sorted(vars(args).items()):
        if key in ("command", "func"):
            continue
        record[key] = ",".join(map(str, val)) if isinstance(val, (list, tuple)) else val
    record.update(extra or {})
    text = analysis.format_record(record)
    target = args.manifest or (f"{args.out}.manifest" if getattr(args, "out", None) else None)
    if target:
        Path(target).write_text(text)
    else:
        (stream or sys.stderr).write("".join(f"# {line}\n" for line in text.splitlines()))
    return record


# --------------------------------------------------------------- commands


def cmd_gen(args):
    cfg = datagen.GenConfig(
        seq_len=args.n,
        num_pairs=args.d_pairs,
        alpha=args.alpha,
        vocab_size=args.vocab,
        seed=substream_seed(args.seed, "datagen"),
        num_examples=args.count,
        placement=args.placement,
    ).validate()
    insts = datagen.generate(cfg, variant=args.variant)
    datagen.write_dataset(insts, args.out)
    write_manifest(args, {"datagen_seed": cfg.seed})
    print(f"wrote {len(insts)} records to {args.out}")
    return 0


def cmd_oracle(args):
    insts = datagen.read_dataset(args.dataset)
    algos = ("sequential", "parallel") if args.algo == "both" else (args.algo,)
    disagree = 0
    label_mismatch = 0
    out = open(args.out, "w") if args.out else None
    try:
        for idx, inst in enumerate(insts):
            pad = inst.meta.get("vocab")
            ignore = () if pad is None else (int(pad),)
            keys, values, queries = oracle.tokens_to_triples(inst.tokens)
            results = {}
            if "sequential" in algos:
                results["sequential"] = oracle.sequential_mqar(keys, values, queries, ignore=ignore)
            if "parallel" in algos:
                results["parallel"] = oracle.parallel_mqar(keys, values, queries, ignore=ignore, workers=args.jobs)
            first = next(iter(results.values()))
            if any(r != first for r in results.values()):
                disagree += 1
                print(f"record {idx}: oracles disagree", file=sys.stderr)
            answered = first.answered()
            if any(answered.get(p) != t for p, t in inst.labels):
                label_mismatch += 1
            if out:
                pairs = " ".join(f"{p}:{v}" for p, v in sorted(answered.items()))
                out.write(pairs + "\n")
    finally:
        if out:
            out.close()
    write_manifest(args)
    print(f"records={len(insts)} algos={'+'.join(algos)} disagreements={disagree} label_mismatches={label_mismatch}")
    return 1 if disagree or label_mismatch else 0


def cmd_verify(args):
    fault = args.fault or os.environ.get(FAULT_ENV) or None
    rows = constructions.verify_suite(
        args.suite, trials=args.trials, t=args.t, seed=substream_seed(args.seed, "constructions"), fault=fault
    )
    write_manifest(args)
    width = max(len(r.name) for r in rows)
    print(f"{'check':<{width}}  {'cases':>6}  {'max_error':>11}  result")
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        note = f"  ({r.note})" if r.note else ""
        print(f"{r.name:<{width}}  {r.cases:>6}  {r.max_error:>11.3e}  {status}{note}")
    return 0 if all(r.passed for r in rows) else 1


def cmd_sweep(args):
    cfg = training.TrainConfig(
        lrs=tuple(args.lrs),
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=substream_seed(args.seed, "sweep"),
        train_size=args.train_size,
        test_size=args.test_size,
        num_pairs=args.num_pairs,
        alpha=args.alpha,
        vocab_size=args.vocab,
        early_stop=args.early_stop,
        dtype=args.dtype,
    )
    grid = [(v, n, d) for v in args.variants for n in args.seq_lens for d in args.d_models]
    out = Path(args.out)
    done = set()
    if out.exists() and out.stat().st_size:
        done = training.completed_cells(training.read_sweep_csv(out))
    else:
        out.write_text(training.rows_to_csv([], header=True))
    todo = [c for c in grid if c not in done]
    write_manifest(args, {"sweep_seed": cfg.seed, "cells_total": len(grid), "cells_skipped": len(grid) - len(todo)})
    t0 = time.perf_counter()
    # Each finished cell is appended at once, so an interrupted sweep
    # resumes from the first cell without a summary row.
    for cell, rows in training.iter_sweep(todo, cfg, jobs=args.jobs):
        with out.open("a") as fh:
            fh.write(training.rows_to_csv(rows, header=False))
        print(f"{cell[0]} N={cell[1]} d={cell[2]} best_test_acc={rows[-1]['best_test_acc']:.4f}", flush=True)
    print(f"cells run={len(todo)} skipped={len(grid) - len(todo)} seconds={time.perf_counter() - t0:.1f}")
    return 0


def cmd_slice(args):
    docs = analysis.read_stream(args.stream)
    freq = analysis.read_freq(args.freq) if args.freq else {}
    exclude = _ints(args.exclude) if args.exclude else ()
    hits = [analysis.find_ar_hits(d, freq, args.threshold, exclude=exclude) for d in docs]
    reports = {"m": analysis.slice_perplexity(analysis.read_logprobs(args.logprobs_m, docs), hits)}
    if args.logprobs_ref:
        reports["M"] = analysis.slice_perplexity(analysis.read_logprobs(args.logprobs_ref, docs), hits)
        att = analysis.compare_models(reports["m"], reports["M"])
        reports["m"].attribution = att
    rows = []
    for name, rep in reports.items():
        rec = {"model": name, **rep.as_record()}
        rows.append(rec)
    text = "".join(analysis.format_record(r) + "\n" for r in rows)
    if args.out:
        Path(args.out).write_text(text)
        Path(args.out).with_suffix(".csv").write_text(analysis.format_csv(rows))
    else:
        sys.stdout.write(text)
    if "M" in reports:
        print(f"gap_attribution={analysis.describe_attribution(reports['m'].attribution)}")
    write_manifest(args)
    return 0


def cmd_flops(args):
    value = analysis.flops(
        args.arch, B=args.B, N=args.N, D=args.D, L=args.L, V=args.V, H=args.H, convention=args.convention,
        training=not args.forward_only,
    )
    write_manifest(args)
    print(f"{value:.6e}")
    return 0


# ----------------------------------------------------------------- parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file; flags override it")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=default_jobs())
    common.add_argument("--manifest", help="where to write the resolved configuration")

    parser = argparse.ArgumentParser(prog="mqar-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a dataset")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--d-pairs", type=int, default=4)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--vocab", type=int, default=8192)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--variant", choices=("mqar", "single"), default="mqar")
    p.add_argument("--placement", choices=("gap", "absolute"), default="gap")
    p.add_argument("--out", default="mqar.jsonl")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("oracle", parents=[common], help="label a dataset and cross-check the oracles")
    p.add_argument("dataset")
    p.add_argument("--algo", choices=("sequential", "parallel", "both"), default="both")
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify-constructions", parents=[common], help="check the exact constructions")
    p.add_argument("--suite", choices=("all",) + constructions.SUITES, default="all")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--t", type=int, default=None, help="distance budget for the autocorr boundary check")
    p.add_argument("--fault", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", parents=[common], help="capacity sweep to CSV (resumable)")
    p.add_argument("--variants", type=lambda s: s.split(","), default=["attention", "baseconv"])
    p.add_argument("--seq-lens", type=_ints, default=[32, 64, 128])
    p.add_argument("--d-models", type=_ints, default=[16, 32, 64, 128])
    p.add_argument("--lrs", type=_floats, default=list(training.TrainConfig().lrs))
    p.add_argument("--epochs", type=int, default=64)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--train-size", type=int, default=10_000)
    p.add_argument("--test-size", type=int, default=1_000)
    p.add_argument("--num-pairs", type=int, default=None)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--vocab", type=int, default=8192)
    p.add_argument("--early-stop", type=float, default=None)
    p.add_argument("--dtype", choices=("float64", "float32"), default="float64")
    p.add_argument("--out", default="sweep.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("slice", parents=[common], help="AR-hit slice perplexities and gap attribution")
    p.add_argument("stream")
    p.add_argument("logprobs_m")
    p.add_argument("logprobs_ref", nargs="?")
    p.add_argument("--freq")
    p.add_argument("--threshold", type=int, default=analysis.DEFAULT_THRESHOLD)
    p.add_argument("--exclude", default="")
    p.add_argument("--out")
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("flops", parents=[common], help="FLOPs of one architecture")
    p.add_argument("--arch", choices=analysis.ARCHS, required=True)
    p.add_argument("--B", type=int, default=1)
    p.add_argument("--N", type=int, default=2048)
    p.add_argument("--D", type=int, default=768)
    p.add_argument("--L", type=int, default=12)
    p.add_argument("--H", type=int, default=12)
    p.add_argument("--V", type=int, default=50257)
    p.add_argument("--convention", choices=("calibrated", "literal"), default="calibrated")
    p.add_argument("--forward-only", action="store_true")
    p.set_defaults(func=cmd_flops)
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults taken from the ``--config`` file, if any."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    values = read_config(args.config)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in subparser._actions}
    unknown = sorted(set(values) - set(actions))
    if unknown:
        parser.error(f"unknown config keys: {', '.join(unknown)}")
    defaults = {}
    for key, raw in values.items():
        act = actions[key]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes")
        elif act.type is not None:
            defaults[key] = act.type(raw)
        else:
            defaults[key] = raw
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
