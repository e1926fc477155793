"""Command line: run / validate / oracle-check / lp-baseline."""
from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

log = logging.getLogger("reachdiff")


def oracle_check(size: int, trials: int, seed: int = 0, ks=(1, 2, 3, 5)) -> dict:
    """Compare the engine with the brute-force references on random instances.

    Returns mismatch counts per check; all zero means agreement.
    """
    from . import oracle, search, sketch
    from .graph import Graph
    from .schemes import DISTANCE, REACH, Draw

    rng = np.random.default_rng(seed)
    bad = {"reach_search": 0, "distance_search": 0, "sketch": 0}
    for it in range(trials):
        mode = REACH if it % 2 else DISTANCE
        n = int(rng.integers(2, size + 1))
        E = int(rng.integers(1, 2 * size + 1))
        g = Graph.from_edges(n, rng.integers(0, n, E), rng.integers(0, n, E))
        nv = rng.exponential(1.0, n)
        nv[rng.random(n) < 0.5] = np.inf if mode == REACH else 0.0
        draw = Draw(mode, rng.exponential(1.0, E), nv, it)
        M = oracle.exact_thresholds(g, draw) if mode == REACH else oracle.exact_distances(g, draw)
        K = oracle.to_keys(M, mode)
        for j in range(n):
            if not np.array_equal(search.reverse_keys(g, draw, j), K[:, j]):
                bad[f"{mode}_search"] += 1
                break
        for k in ks:
            U = np.flatnonzero(rng.random(n) < 0.7)
            if len(U) == 0:
                continue
            ps = int(rng.integers(2**31))
            sk = sketch.sketch_all(g, draw, U, k, ps)
            ref = oracle.reference_sketches(K, U, k, sketch.make_permutation(U, ps))
            for i in range(n):
                got = {m: (sketch.to_key(v, mode), p) for m, (v, p) in sk.as_dict(i).items()}
                want = {int(m): (K[i, m], p) for m, p in ref[i].items()}
                if got != want:
                    bad["sketch"] += 1
                    break
    return bad


def main(argv=None) -> int:
    from .experiment import StageError, run_experiment, run_lp_baseline, validate_config

    ap = argparse.ArgumentParser(prog="reachdiff", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("run", help="run an experiment config (or replay a manifest.json)")
    p.add_argument("config")
    p.add_argument("--output", help="override the output directory")
    p = sub.add_parser("validate", help="parse and check a config, print the resolved form")
    p.add_argument("config")
    p = sub.add_parser("oracle-check", help="engine vs brute-force references on random graphs")
    p.add_argument("size", type=int)
    p.add_argument("trials", type=int)
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("lp-baseline", help="label propagation baseline only")
    p.add_argument("config")
    p.add_argument("--output")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")

    try:
        if args.cmd == "oracle-check":
            if args.size < 2 or args.size > 12:
                print("size must be in [2, 12]", file=sys.stderr)
                return 2
            t0 = time.perf_counter()
            bad = oracle_check(args.size, args.trials, args.seed)
            for key, v in bad.items():
                print(f"{key}: {'ok' if v == 0 else f'{v} mismatching instances'}")
            print(f"{args.trials} instances in {time.perf_counter() - t0:.1f}s")
            return 0 if not any(bad.values()) else 1
        cfg = validate_config(args.config)
        if args.cmd == "validate":
            print(cfg.to_text(), end="")
            return 0
        if getattr(args, "output", None):
            from dataclasses import replace
            cfg = replace(cfg, output=args.output)
        if args.cmd == "run":
            out = run_experiment(cfg)
        else:
            out = run_lp_baseline(cfg)
        print(f"wrote {out}")
        return 0
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
