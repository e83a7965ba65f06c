"""Walk counts per hop on synthetic topologies, as CSV on stdout."""

import argparse
import csv
import sys

from mhgrn.pathreason import count_paths
from mhgrn.relgraph import synthetic_graph


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--graphs", nargs="+", default=["complete:6", "chain:10", "erdos:200:10:34", "erdos:50:3:4"])
    ap.add_argument("--k", type=int, default=6)
    ap.add_argument("--seed", type=int, default=13)
    args = ap.parse_args()
    writer = csv.writer(sys.stdout)
    writer.writerow(["graph", "k", "walks", "ratio_to_previous"])
    for spec in args.graphs:
        counts = count_paths(synthetic_graph(spec, args.seed), args.k)
        for k, c in enumerate(counts, start=1):
            prev = counts[k - 2] if k > 1 else 0
            writer.writerow([spec, k, c, f"{c / prev:.3f}" if prev else ""])


if __name__ == "__main__":
    main()
