"""Command line front end.

Three subcommands: cluster writes a JSON report of stable partitions for
one or more methods, compare writes a per-count error table as CSV, and
segment runs the image pipeline and writes the error curve plus PGM
approximations. Reports are byte-identical across runs with the same
inputs and options. Exit codes: 0 success, 2 usage or precondition, 3
unreadable input, 4 size guard.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import baselines, kh_engine, oracle, otsu1d, segment
from .core import (Dataset, InputFormatError, Partition, PreconditionError,
                   SizeGuardError, sigma)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_GUARD = 4

METHOD_ORDER = ("kmeans", "kh", "otsu", "oracle")


def thread_count() -> int:
    """Worker cap from KH_THREADS; unset or invalid means serial."""
    raw = os.environ.get("KH_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _thread_map(fn, items):
    """Order-preserving map, parallel only when KH_THREADS allows it."""
    workers = thread_count()
    if workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def load_csv(path) -> Dataset:
    """Numeric CSV, one point per row. A non-numeric first row is a header."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise InputFormatError("file is not UTF-8 text") from None
    rows = []
    width = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        fields = [f.strip() for f in body.split(",")]
        vals = []
        bad_col = None
        for col, f in enumerate(fields, start=1):
            try:
                vals.append(float(f))
            except ValueError:
                bad_col = col
                break
        if bad_col is not None:
            if not rows and width is None:
                width = len(fields)  # header row fixes the column count
                continue
            raise InputFormatError(f"not a number: {fields[bad_col - 1]!r}",
                                   line=line_no, column=bad_col)
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise InputFormatError(
                f"row has {len(fields)} fields, expected {width}", line=line_no)
        rows.append(vals)
    if not rows:
        raise InputFormatError("no data rows found")
    return Dataset(np.asarray(rows, dtype=np.float64))


def _load_dataset(args) -> Dataset:
    if args.format == "pgm":
        img = segment.read_pgm(args.input)
        return Dataset(img.intensities)
    return load_csv(args.input)


def _partition_record(p: Partition, moves: int) -> dict:
    report = kh_engine.verify_stability(p)
    return {
        "labels": [int(c) for c in p.labels],
        "E": p.total_e,
        "sigma": sigma(p.total_e, p.n),
        "stable": report.stable,
        "moves": moves,
    }


def _run_kmeans(ds, m_max, seed):
    seq = baselines.kmeans_sequence(ds, m_max, rng_seed=seed)
    return {str(m): _partition_record(seq.by_cluster_count[m],
                                      seq.info[m]["iterations"])
            for m in seq.cluster_counts()}


def _run_kh(ds, m_max, policy, l_max):
    seq = kh_engine.build_sequence(ds, m_max, "both",
                                   kh_engine.SubsetPolicy(policy), l_max=l_max)
    return {str(m): _partition_record(seq.by_cluster_count[m],
                                      seq.info[m]["tuple_moves"])
            for m in seq.cluster_counts()}


def _run_otsu(ds, m_max):
    if ds.d != 1:
        raise PreconditionError("otsu requires one-dimensional data")
    h = otsu1d.build_histogram(ds)
    out = {}
    for point in otsu1d.curve(h, m_max):
        labels = otsu1d.assign_classes(
            h, ds.points[:, 0], np.asarray(point.thresholds))
        p = Partition.from_labels(ds, labels.astype(np.int64), point.m)
        out[str(point.m)] = _partition_record(p, 0)
    return out


def _run_oracle(ds, m_max):
    out = {}
    for res in oracle.minimum_curve(ds, m_max):
        labels = np.asarray(res.best_labels, dtype=np.int64)
        p = Partition.from_labels(ds, labels, res.m)
        out[str(res.m)] = _partition_record(p, 0)
    return out


def _run_methods(ds, args) -> dict:
    if getattr(args, "scope", "all") != "all":
        # point data carries no adjacency graph to restrict pairs with
        raise PreconditionError("scope 'adjacent' needs adjacency; use segment")
    methods = args.methods.split(",")
    for name in methods:
        if name not in METHOD_ORDER:
            raise PreconditionError(f"unknown method {name!r}")
    if len(set(methods)) != len(methods):
        raise PreconditionError("duplicate method requested")

    def run(name):
        if name == "kmeans":
            return _run_kmeans(ds, args.m_max, args.seed)
        if name == "kh":
            return _run_kh(ds, args.m_max, args.policy, args.l_max)
        if name == "otsu":
            return _run_otsu(ds, args.m_max)
        return _run_oracle(ds, args.m_max)

    results = _thread_map(run, methods)
    return dict(zip(methods, results))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _write_comparison(by_method: dict, m_max: int, out: Path) -> None:
    names = [n for n in METHOD_ORDER if n in by_method]
    lines = ["m," + ",".join(f"E_{n}" for n in names)]
    for m in range(1, m_max + 1):
        cells = [by_method[n].get(str(m)) for n in names]
        lines.append(",".join([str(m)] + [repr(c["E"]) if c else "" for c in cells]))
    (out / "comparison.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_cluster(args) -> int:
    ds = _load_dataset(args)
    by_method = _run_methods(ds, args)
    report = {
        "schemaVersion": 1,
        "command": "cluster",
        "input": str(args.input),
        "n": ds.n,
        "d": ds.d,
        "seed": args.seed,
        "mMax": args.m_max,
        "lMax": args.l_max,
        "policy": args.policy,
        "methods": by_method,
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", report)
    _write_comparison(by_method, args.m_max, out)
    print(f"wrote {out / 'report.json'} and {out / 'comparison.csv'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    ds = _load_dataset(args)
    by_method = _run_methods(ds, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_comparison(by_method, args.m_max, out)
    print(f"wrote {out / 'comparison.csv'}")
    return EXIT_OK


def cmd_segment(args) -> int:
    if args.format != "pgm":
        raise PreconditionError("segment requires --format pgm")
    img = segment.read_pgm(args.input)
    result = segment.segment_curve(img, m_min=args.m_max, init=args.init)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["count,E,sigma,variant"]
    for variant, rows in (("merge_only", result.merge_only),
                          ("corrected", result.corrected)):
        for row in rows:
            lines.append(f"{row.count},{row.error!r},{row.sigma:.6g},{variant}")
    (out / "segment_curve.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    count = result.final_corrected.segment_count
    segment.write_pgm(result.final_merge_only.approximation(),
                      out / f"approx_merge_only_{count}.pgm")
    segment.write_pgm(result.final_corrected.approximation(),
                      out / f"approx_corrected_{count}.pgm")
    print(f"wrote {out / 'segment_curve.csv'} and two PGM approximations")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="khcluster",
        description="Minimum squared error clustering by subset reclassification.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt_default):
        p.add_argument("--input", required=True, help="input data file")
        p.add_argument("--format", choices=("csv", "pgm"), default=fmt_default)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--m-max", type=int, default=3, dest="m_max")
        p.add_argument("--seed", type=int, default=0)

    for name, fn in (("cluster", cmd_cluster), ("compare", cmd_compare)):
        p = sub.add_parser(name)
        common(p, "csv")
        p.add_argument("--methods", default="kh",
                       help="comma list from kmeans,kh,otsu,oracle")
        p.add_argument("--policy", choices=("singletons", "identical", "both"),
                       default="both")
        p.add_argument("--scope", choices=("all", "adjacent"), default="all")
        p.add_argument("--l-max", type=int, default=3, dest="l_max")
        p.set_defaults(fn=fn)

    p = sub.add_parser("segment")
    common(p, "pgm")
    p.set_defaults(m_max=1)  # segment counts run downward, stop at 1
    p.add_argument("--init", choices=("pixels", "flat_zones"), default="pixels")
    p.set_defaults(fn=cmd_segment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except (InputFormatError, FileNotFoundError, IsADirectoryError,
            PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except SizeGuardError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_GUARD
    except PreconditionError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
