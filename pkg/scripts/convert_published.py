#!/usr/bin/env python3
"""Convert an external CI result table into the replay CSV schema.

The input is any delimited file with one row per (cycle, target) execution.
Column names and status spellings are given on the command line, e.g.::

    python3 scripts/convert_published.py raw.csv data/published.csv \\
        --cycle-col build_id --target-col test_name --status-col result \\
        --duration-col duration --duration-unit s \\
        --status-map passed=PASSED,failed=FAILED,flaky=FLAKY,skipped=NO_STATUS

Cycle keys that are not integers are numbered in order of first appearance, or
in order of ``--order-col`` when given. Rows with an unmapped status are
reported and dropped. Repeated (cycle, target) rows keep the last one.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from pipeline_rto.dataset import Cycle, CycleSeries, ExecutionRecord, RawStatus, write_dataset

UNITS = {"ms": 1.0, "s": 1000.0, "us": 0.001}


def parse_status_map(text: str) -> dict[str, RawStatus]:
    out = {s.value.lower(): s for s in RawStatus}
    for item in filter(None, (p.strip() for p in text.split(","))):
        raw, _, target = item.partition("=")
        try:
            out[raw.strip().lower()] = RawStatus[target.strip().upper()]
        except KeyError:
            raise SystemExit(f"unknown target status {target!r} in --status-map") from None
    return out


def convert(rows, args) -> tuple[CycleSeries, int]:
    status_map = parse_status_map(args.status_map)
    scale = UNITS[args.duration_unit]
    order: dict[str, object] = {}
    records: dict[tuple[str, str], tuple[RawStatus, int]] = {}
    dropped = 0
    for row in rows:
        key = row[args.cycle_col].strip()
        status = status_map.get(row[args.status_col].strip().lower())
        if status is None:
            dropped += 1
            continue
        if key not in order:
            order[key] = row[args.order_col] if args.order_col else len(order)
        duration = int(round(float(row[args.duration_col] or 0) * scale)) if args.duration_col else 0
        records[(key, row[args.target_col].strip())] = (status, max(duration, 0))

    if all(k.lstrip("-").isdigit() for k in order) and not args.order_col:
        ids = {k: int(k) for k in order}
    else:
        ranked = sorted(order, key=lambda k: (order[k], k))
        ids = {k: i for i, k in enumerate(ranked)}
    per_cycle: dict[int, list[ExecutionRecord]] = {}
    for (key, target), (status, duration) in records.items():
        cid = ids[key]
        per_cycle.setdefault(cid, []).append(ExecutionRecord(cid, target, status, duration))
    cycles = tuple(Cycle(cid, tuple(sorted(recs, key=lambda r: r.target))) for cid, recs in sorted(per_cycle.items()))
    return CycleSeries(cycles, args.pipeline), dropped


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("source")
    p.add_argument("dest")
    p.add_argument("--cycle-col", required=True)
    p.add_argument("--target-col", required=True)
    p.add_argument("--status-col", required=True)
    p.add_argument("--duration-col")
    p.add_argument("--duration-unit", choices=sorted(UNITS), default="ms")
    p.add_argument("--order-col", help="column that orders cycles chronologically")
    p.add_argument("--status-map", default="", help="raw=STATUS pairs, comma separated")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--pipeline", choices=["pre_submit", "post_submit"], default="pre_submit")
    args = p.parse_args(argv)

    with open(args.source, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=args.delimiter)
        missing = [c for c in (args.cycle_col, args.target_col, args.status_col, args.duration_col, args.order_col)
                   if c and c not in (reader.fieldnames or [])]
        if missing:
            print(f"columns not found: {', '.join(missing)}", file=sys.stderr)
            return 2
        series, dropped = convert(reader, args)
    Path(args.dest).parent.mkdir(parents=True, exist_ok=True)
    write_dataset(series, args.dest)
    print(f"{len(series)} cycles, {sum(len(c.records) for c in series)} records, {dropped} rows dropped",
          file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
