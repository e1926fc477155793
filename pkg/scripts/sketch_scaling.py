"""Sketch size and traversal counts against k ln|U| on random graphs.

    python3 scripts/sketch_scaling.py --n 2000 --m 8000 --reps 5

Prints, per (mode, |U|, k), the mean per-node |S u Z| over k ln|U| and the
traversal count over |E| k ln|U| for guarded and literal pruning.
"""
import argparse
import math

import numpy as np

from reachdiff.graph import Graph
from reachdiff.schemes import DISTANCE, REACH, Draw
from reachdiff.sketch import sketch_all


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--m", type=int, default=4000)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 64, 256])
    ap.add_argument("--ks", type=int, nargs="+", default=[1, 2, 4, 8, 16, 32])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print("mode      |U|    k   size/(k ln|U|)  guarded/(|E| k ln|U|)  literal/(|E| k ln|U|)")
    for mode in (REACH, DISTANCE):
        for n_u in args.sizes:
            for k in args.ks:
                size, trav = [], {"guarded": [], "literal": []}
                for rep in range(args.reps):
                    g = Graph.from_edges(args.n, rng.integers(0, args.n, args.m), rng.integers(0, args.n, args.m))
                    nv = rng.exponential(1.0, args.n) if mode == REACH else np.zeros(args.n)
                    d = Draw(mode, rng.exponential(1.0, args.m), nv, rep)
                    U = rng.choice(args.n, n_u, replace=False)
                    scale = k * math.log(n_u)
                    for prune in trav:
                        sk = sketch_all(g, d, U, k, rep, prune=prune)
                        trav[prune].append(sk.traversals / (args.m * scale))
                    size.append(sk.update_counts.mean() / scale)
                print(f"{mode:9s} {n_u:4d} {k:4d}   {np.mean(size):12.3f}   {np.max(trav['guarded']):19.3f}"
                      f"   {np.max(trav['literal']):19.3f}")


if __name__ == "__main__":
    main()
