"""Recompute the published threshold tables and write a deviation CSV.

    python scripts/reproduce_tables.py --out tables.csv
    python scripts/reproduce_tables.py --cell "V/(4,8)" --awgn --workers 4

Erasure cells take roughly half an hour on one core; AWGN cells take hours.
"""
import argparse
import logging
import sys

from isi_scldpc.tables import all_cells, reproduce_tables, select, write_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cell", action="append", help="id filter, e.g. 'V/(4,8)/CH-I' (repeatable)")
    ap.add_argument("--awgn", action="store_true", help="include AWGN cells")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cells = select(all_cells(include_awgn=args.awgn), args.cell)

    def progress(row):
        print(f"{row['cell']:32s} {row['status']:9s} published={row['published']} computed={row['computed']}",
              file=sys.stderr, flush=True)

    rows = reproduce_tables(cells, workers=args.workers, progress=progress)
    if args.out == "-":
        write_csv(rows, sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            write_csv(rows, fh)
    bad = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows) - bad}/{len(rows)} cells within tolerance", file=sys.stderr)


if __name__ == "__main__":
    main()
