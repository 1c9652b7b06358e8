"""Command-line interface.

Exit status: 0 on success, 2 for configuration errors (bad flags or
parameters), 3 for data errors (unreadable, malformed or empty input).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .batch import bartels_rvn
from .betting import parse_strategy, product_martingale
from .changedetect import DetectorState
from .core import DataError, DomainError, jeffreys_category_log10
from .datasets import StreamSpec, load_absenteeism, load_csv, load_usps, permute, synth_stream
from .nonconformity import SCORERS, get_scorer
from .pvalues import conformal_pvalues
from .upperprob import (
    EventSet,
    stirling_checks,
    ucp_bracket,
    uep_prob,
    uiid_prob,
    verify_prop1,
    verify_prop2,
)

EXIT_CONFIG = 2
EXIT_DATA = 3


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _default_seed() -> int:
    env = os.environ.get("CONFORMAL_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"CONFORMAL_SEED must be an integer, got {env!r}") from None


def _add_stream_args(p: argparse.ArgumentParser):
    p.add_argument("--input", help="data file (not needed for --format synthetic)")
    p.add_argument("--format", default="csv", choices=["usps", "absenteeism", "csv", "synthetic"])
    p.add_argument("--labelled", action="store_true", help="csv: last column is the label")
    p.add_argument("--extra-attributes", action="store_true",
                   help="absenteeism: add Social drinker and Social smoker features")
    p.add_argument("--n", type=int, default=1000, help="synthetic: stream length")
    p.add_argument("--pre", default="uniform", help="synthetic: pre-change generator")
    p.add_argument("--post", default=None, help="synthetic: post-change generator")
    p.add_argument("--change-point", type=int, default=None, help="synthetic: change point T")
    p.add_argument("--data-seed", type=int, default=None, help="synthetic: seed for the data")
    p.add_argument("--permute-seed", type=int, default=None, help="randomly permute the stream first")
    p.add_argument("--ncm", default="knn-ratio", choices=sorted(SCORERS))
    p.add_argument("--distance", default="euclidean", choices=["euclidean"])
    p.add_argument("--strategy", default="histogram:10,10", help="power:K | mixture:M | histogram:B,C")
    p.add_argument("--seed", type=int, default=None, help="tie-breaking seed (default $CONFORMAL_SEED or 0)")
    p.add_argument("--out", help="JSON-lines output, one record per step")
    p.add_argument("--csv", dest="csv_out", help="CSV output with columns n,log10_S")
    p.add_argument("--monte-carlo", type=int, default=0, metavar="K",
                   help="run K seeds (seed, seed+1, ...) and report one summary per seed")
    p.add_argument("--jobs", type=int, default=None, help="worker processes for --monte-carlo")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conformal-randomness", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("martingale", help="run a conformal test martingale over a stream")
    _add_stream_args(m)

    d = sub.add_parser("detect", help="CUSUM / Shiryaev-Roberts change detection")
    _add_stream_args(d)
    d.add_argument("--procedure", default="sr", choices=["cusum", "sr"])
    d.add_argument("--threshold", type=float, default=100.0)

    b = sub.add_parser("batch", help="batch test of randomness on nonconformity scores")
    b.add_argument("--input", help="data file")
    b.add_argument("--format", default="csv", choices=["usps", "absenteeism", "csv", "synthetic"])
    b.add_argument("--labelled", action="store_true")
    b.add_argument("--extra-attributes", action="store_true")
    b.add_argument("--n", type=int, default=1000)
    b.add_argument("--pre", default="uniform")
    b.add_argument("--post", default=None)
    b.add_argument("--change-point", type=int, default=None)
    b.add_argument("--data-seed", type=int, default=None)
    b.add_argument("--permute-seed", type=int, default=None)
    b.add_argument("--ncm", default="knn-ratio", choices=sorted(SCORERS))
    b.add_argument("--distance", default="euclidean", choices=["euclidean"])
    b.add_argument("--test", default="bartels")
    b.add_argument("--sided", default="two_sided", choices=["two_sided", "left_sided", "right_sided"])

    o = sub.add_parser("oracle", help="exact upper-probability oracles on {0,1}^N")
    o.add_argument("--op", required=True, choices=["uiid", "uep", "ucp", "prop1", "prop2", "stirling"])
    o.add_argument("--N", type=int, default=None)
    o.add_argument("--event", help="EventSet JSON file: {\"N\": int, \"members\": [bitstrings]}")
    o.add_argument("--trials", type=int, default=None)
    o.add_argument("--seed", type=int, default=None)
    o.add_argument("--n-max", type=int, default=170, help="stirling: largest n for the factorial bracket")
    o.add_argument("--even-max", type=int, default=1000, help="stirling: largest even N for the binomial bound")
    return parser


def _load_stream(args):
    if args.format == "synthetic":
        try:
            spec = StreamSpec(args.n, args.pre, args.post, args.change_point, args.data_seed)
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        stream = synth_stream(spec)
    else:
        if not args.input:
            raise ConfigError("--input is required unless --format synthetic")
        if args.format == "usps":
            stream = load_usps(args.input)
        elif args.format == "absenteeism":
            stream = load_absenteeism(args.input, extra_attributes=args.extra_attributes)
        else:
            stream = load_csv(args.input, labelled=args.labelled)
    if len(stream) == 0:
        raise DataError("input stream is empty")
    if args.permute_seed is not None:
        stream = permute(stream, args.permute_seed)
    return stream


def _check_scorer(args, stream):
    scorer = get_scorer(args.ncm)
    if scorer.needs_labels and stream.y is None:
        raise ConfigError(f"--ncm {args.ncm} needs labelled data (see --labelled / --format)")
    if args.ncm in ("identity", "median") and stream.X.shape[1] != 1:
        raise ConfigError(f"--ncm {args.ncm} needs one-dimensional observations")
    return scorer


def _run_one(args, stream, seed: int):
    """Per-step records and summary for one seed."""
    scorer = _check_scorer(args, stream)
    try:
        strategy = parse_strategy(args.strategy)
    except DomainError as exc:
        raise ConfigError(f"--strategy: {exc}") from None
    ps = conformal_pvalues(stream.X, stream.y, scorer, random_state=seed)
    traj = product_martingale(ps, strategy)
    detector = None
    if getattr(args, "procedure", None):
        try:
            detector = DetectorState(args.procedure, args.threshold)
        except DomainError as exc:
            raise ConfigError(f"--threshold: {exc}") from None
    records = []
    log10 = traj.log10_capital
    for n in range(1, len(traj) + 1):
        stat, alarm = None, False
        if detector is not None:
            alarm = detector.update(float(traj.multipliers[n - 1]))
            stat = detector.value
        records.append(_record(n, float(traj.p[n - 1]), float(log10[n]), stat, alarm))
    final = float(log10[-1])
    summary = {
        "seed": seed,
        "n": len(traj),
        "S": _raw(final),
        "log10_S": _finite_or_none(final),
        "evidence": jeffreys_category_log10(final).label if final > -math.inf else "supports_null",
    }
    if detector is not None:
        summary.update(
            procedure=detector.procedure,
            threshold=detector.threshold,
            alarms=list(detector.alarms),
            alarm_frequency=detector.alarm_frequency(),
        )
    return records, summary


def _raw(log10_s: float):
    if log10_s == -math.inf:
        return 0.0
    if log10_s > 308:
        return "inf"
    return 10.0 ** log10_s


def _finite_or_none(v: float):
    return v if math.isfinite(v) else None


def _record(n, p, log10_s, stat, alarm):
    return {
        "n": n,
        "p": p,
        "S": _raw(log10_s),
        "log10_S": _finite_or_none(log10_s),
        "R_or_W": stat,
        "alarm": bool(alarm),
    }


def _write_records(args, records):
    if args.out:
        with open(args.out, "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
    if args.csv_out:
        with open(args.csv_out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "log10_S"])
            w.writerow([0, 0.0])
            for rec in records:
                w.writerow([rec["n"], rec["log10_S"] if rec["log10_S"] is not None else "-inf"])


def _mc_worker(payload):
    args, stream, seed = payload
    return _run_one(args, stream, seed)[1]


def cmd_martingale(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    stream = _load_stream(args)
    _check_scorer(args, stream)
    if args.monte_carlo and args.monte_carlo > 0:
        seeds = [seed + i for i in range(args.monte_carlo)]
        jobs = args.jobs or os.cpu_count() or 1
        if jobs == 1:
            summaries = [_mc_worker((args, stream, s)) for s in seeds]
        else:
            with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
                summaries = list(pool.map(_mc_worker, [(args, stream, s) for s in seeds]))
        if args.out:
            with open(args.out, "w") as fh:
                for s in summaries:
                    fh.write(json.dumps(s) + "\n")
        finals = [s["log10_S"] for s in summaries if s["log10_S"] is not None]
        print(json.dumps({"runs": len(summaries), "median_log10_S": float(np.median(finals)) if finals else None,
                          "summaries": summaries}))
        return 0
    records, summary = _run_one(args, stream, seed)
    _write_records(args, records)
    print(json.dumps(summary))
    return 0


def cmd_detect(args) -> int:
    if not args.threshold > 1:
        raise ConfigError(f"--threshold must exceed 1, got {args.threshold}")
    return cmd_martingale(args)


def cmd_batch(args) -> int:
    if args.test != "bartels":
        raise ConfigError(f"--test: unknown test {args.test!r}; available: bartels")
    stream = _load_stream(args)
    scorer = _check_scorer(args, stream)
    scores = scorer(stream.X, stream.y)
    try:
        result = bartels_rvn(scores, args.sided)
    except DomainError as exc:
        raise DataError(str(exc)) from None
    print(result.to_json())
    return 0


def _event(args) -> EventSet:
    if not args.event:
        raise ConfigError(f"--op {args.op} needs --event FILE")
    try:
        text = Path(args.event).read_text()
    except OSError as exc:
        raise DataError(f"cannot read event file: {exc}") from None
    try:
        E = EventSet.from_json(text)
    except DomainError as exc:
        raise DataError(str(exc)) from None
    if args.N is not None and args.N != E.N:
        raise ConfigError(f"--N {args.N} disagrees with the event file (N={E.N})")
    return E


def cmd_oracle(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    op = args.op
    if op in ("uiid", "uep", "ucp"):
        E = _event(args)
        if op == "uiid":
            out = {"op": op, "N": E.N, "value": uiid_prob(E)}
        elif op == "uep":
            out = {"op": op, "N": E.N, "value": uep_prob(E)}
        else:
            lo, hi = ucp_bracket(E)
            out = {"op": op, "N": E.N, "lower": lo, "upper": hi}
    elif op in ("prop1", "prop2"):
        if args.N is None or args.N < 1:
            raise ConfigError(f"--op {op} needs --N >= 1")
        if op == "prop1":
            out = verify_prop1(args.N, args.trials if args.trials is not None else 10_000, seed)
        else:
            out = verify_prop2(args.N, args.trials if args.trials is not None else 1_000, random_state=seed)
        out = {"op": op, **out}
    else:
        out = {"op": op, **stirling_checks(args.n_max, args.even_max)}
    print(json.dumps(out))
    return 0


COMMANDS = {"martingale": cmd_martingale, "detect": cmd_detect, "batch": cmd_batch, "oracle": cmd_oracle}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
