#!/usr/bin/env python3
"""Empirical convergence of ``Z_k / c_k`` along k for plain GW trees.

A replica counts as settled when every successive relative increment
``|W_{k+1}/W_k - 1|`` for ``k0 <= k < k1`` stays below ``--tol``.

    python3 scripts/w_convergence.py --law geometric:p=0.5 --replicas 1000
"""
import argparse
import json

import numpy as np

from gwspine.offspring import parse_law
from gwspine.pgf import build_norming_table
from gwspine.tree import martingale_values, simulate_populations


def settled_fraction(spec, k0, k1, replicas, seed, tol, s=0.5):
    law = parse_law(spec)
    table = build_norming_table(law, s, k1)
    z = simulate_populations(law, k1, replicas, np.random.default_rng(seed))
    w = martingale_values(z, table)[2][:, k0 : k1 + 1]
    inc = np.abs(w[:, 1:] / w[:, :-1] - 1)
    return {
        "law": spec, "k": [k0, k1], "tol": tol,
        "settled_fraction": float(np.mean(inc.max(axis=1) < tol)),
        "increment_quantiles": np.quantile(inc, [0.5, 0.95, 0.99]).round(5).tolist(),
        "first_step_quantiles": np.quantile(inc[:, 0], [0.5, 0.95]).round(5).tolist(),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--law", nargs="+", default=["geometric:p=0.5", "dyadic:m=2"])
    ap.add_argument("--k0", type=int, default=10)
    ap.add_argument("--k1", type=int, default=30)
    ap.add_argument("--replicas", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--tol", type=float, default=0.05)
    args = ap.parse_args()
    for spec in args.law:
        print(json.dumps(settled_fraction(spec, args.k0, args.k1, args.replicas, args.seed, args.tol)))


if __name__ == "__main__":
    main()
