#!/usr/bin/env python3
"""Empirical smoothing-exponent table for the semigroup and its derivative.

Fits log-log slopes of t -> ||op(t)||_{p->q} over probe functions and prints
them next to the predicted exponents -(1/2)(1/p - 1/q) (minus an extra 1/2
for the derivative variant).

Usage:
    python3 scripts/fit_exponents.py --graph star --mesh 100
"""

import argparse
import math
import sys

import numpy as np

from graphks import Mesh, build_plan, fit_operator_norm, interval_graph, star_graph

CASES = [
    ("heat", 1.0, 1.0),
    ("heat", 1.0, 2.0),
    ("heat", 2.0, math.inf),
    ("heat_dx", 1.0, 1.0),
    ("heat_dx", 2.0, 2.0),
    ("heat_dx", 1.0, 2.0),
    ("heat_dx", 2.0, math.inf),
]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--graph", choices=("interval", "star"), default="star")
    ap.add_argument("--length", type=float, default=2.0)
    ap.add_argument("--mesh", type=int, default=100)
    ap.add_argument("--t-min", type=float, default=1e-3)
    ap.add_argument("--t-max", type=float, default=1e-1)
    ap.add_argument("--n-times", type=int, default=12)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    g = interval_graph(2 * args.length) if args.graph == "interval" else star_graph(3, args.length)
    mesh = Mesh(g, args.mesh)
    plan = build_plan(g, T=args.t_max * 1.1)
    times = np.geomspace(args.t_min, args.t_max, args.n_times)

    print(f"{'operator':8s} {'p':>4s} {'q':>4s} {'slope':>8s} {'target':>8s}  verdict")
    bad = 0
    for kind, p, q in CASES:
        fit = fit_operator_norm(plan, mesh, kind, p, q, times, seed=args.seed)
        verdict = "ok" if fit.passed else "OFF"
        bad += not fit.passed
        qs = "inf" if q == math.inf else f"{q:g}"
        print(
            f"{kind:8s} {p:4g} {qs:>4s} {fit.fitted_slope:8.3f} {fit.target:8.3f}  {verdict}"
        )
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
