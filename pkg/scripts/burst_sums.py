#!/usr/bin/env python3
"""Exact burst partial sums ``S_N`` for several laws and windows.

    python3 scripts/burst_sums.py --N 40 --windows 1.2,1.8 1.2,1.9 1.5,1.9
"""
import argparse
import json

from gwspine.measure import burst_partial_sums, burst_tail_increment
from gwspine.offspring import parse_law
from gwspine.pgf import build_norming_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--law", nargs="+", default=["geometric:p=0.5", "dyadic:m=2"])
    ap.add_argument("--N", type=int, default=40)
    ap.add_argument("--tail-from", type=int, default=30)
    ap.add_argument("--windows", nargs="+", default=["1.2,1.8", "1.2,1.9", "1.5,1.9"])
    ap.add_argument("--s", type=float, default=0.5)
    args = ap.parse_args()
    for spec in args.law:
        law = parse_law(spec)
        table = build_norming_table(law, args.s, args.N + 1)
        for w in args.windows:
            a, b = map(float, w.split(","))
            S = burst_partial_sums(law, table, args.N, a, b)
            print(json.dumps({
                "law": spec, "window": [a, b],
                "S": {n: round(float(S[n]), 6) for n in (10, 20, 30, args.N)},
                "tail_increment": burst_tail_increment(law, table, args.tail_from, args.N, a, b),
            }))


if __name__ == "__main__":
    main()
