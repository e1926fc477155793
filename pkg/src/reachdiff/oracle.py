"""Brute-force references for testing. Slow by design; not used by the pipeline.

The strategies deliberately differ from the engine: reach values come from a
threshold sweep with plain reachability, distances from enumerating simple
paths, sketches from the membership law applied to full value matrices.
"""
from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np

from .graph import Graph
from .schemes import DISTANCE, REACH, Draw

MAX_COMPONENTS = 2000


def _guard(graph: Graph):
    if graph.num_components > MAX_COMPONENTS:
        raise ValueError(f"oracle limited to {MAX_COMPONENTS} components, got {graph.num_components}")


def _reachable(graph, draw, src, tau):
    # nodes reachable from src using edges and middle nodes with value >= tau
    seen = np.zeros(graph.node_count, dtype=bool)
    seen[src] = True
    queue = deque([src])
    while queue:
        v = queue.popleft()
        if v != src and draw.node_value[v] < tau:
            continue  # v is reached but cannot be passed through
        for e in graph.out_edges(v):
            if draw.edge_value[e] >= tau:
                h = int(graph.head[e])
                if not seen[h]:
                    seen[h] = True
                    queue.append(h)
    return seen


def exact_thresholds(graph: Graph, draw: Draw) -> np.ndarray:
    """Full t matrix by threshold sweep; ``-inf`` marks unreachable pairs, ``t[i, i] = inf``."""
    if draw.mode != REACH:
        raise ValueError("exact_thresholds needs a reach draw")
    _guard(graph)
    n = graph.node_count
    taus = np.unique(np.concatenate([draw.edge_value, draw.node_value, [np.inf]]))
    t = np.full((n, n), -np.inf)
    for i in range(n):
        # sweep from weak to strong; the last tau at which j stays reachable wins
        for tau in taus:
            t[i, _reachable(graph, draw, i, tau)] = tau
        t[i, i] = np.inf
    return t


def exact_distances(graph: Graph, draw: Draw) -> np.ndarray:
    """Full d matrix by enumerating simple paths; ``inf`` marks unreachable pairs.

    Each path length is summed from the target end backwards, the same
    association order a reverse search uses, so results compare exactly.
    """
    if draw.mode != DISTANCE:
        raise ValueError("exact_distances needs a distance draw")
    _guard(graph)
    n = graph.node_count
    ev, nv = draw.edge_value, draw.node_value
    d = np.full((n, n), np.inf)
    for i in range(n):
        d[i, i] = 0.0
        on_path = [False] * n
        on_path[i] = True
        edges = []

        def walk(v):
            for e in graph.out_edges(v):
                h = int(graph.head[e])
                if on_path[h]:
                    continue
                edges.append(int(e))
                total = ev[edges[-1]]
                for q in range(len(edges) - 2, -1, -1):
                    mid = int(graph.head[edges[q]])
                    total = (total + nv[mid]) + ev[edges[q]]
                if total < d[i, h]:
                    d[i, h] = total
                on_path[h] = True
                walk(h)
                on_path[h] = False
                edges.pop()

        walk(i)
    return d


def to_keys(matrix, mode):
    """Values to keys where larger is stronger and -inf is unreachable."""
    return matrix if mode == REACH else -matrix + 0.0


def exact_rank_counts(matrix: np.ndarray, mass, mode: str = REACH) -> np.ndarray:
    """N[i, j] = mass of nodes at least as strongly connected to i as j; 0 if unreachable."""
    keys = to_keys(np.asarray(matrix, dtype=float), mode)
    mass = np.asarray(mass, dtype=float)
    n = keys.shape[0]
    N = np.zeros_like(keys)
    for i in range(n):
        row = keys[i]
        for j in range(keys.shape[1]):
            if row[j] == -np.inf:
                continue
            N[i, j] = mass[row >= row[j]].sum()
    return N


def exact_kernel(N: np.ndarray, alpha) -> np.ndarray:
    """kappa = alpha(N) where reachable (N > 0), else 0."""
    kappa = np.zeros_like(N)
    pos = N > 0
    kappa[pos] = alpha(np.maximum(N[pos], 1.0))
    return kappa


def exact_soft_labels(keys_or_matrix, mass, seed_ids, seed_labels, alpha, mode=REACH):
    """Exact per-simulation density labels f'_i; rows with no reachable seed are nan."""
    N = exact_rank_counts(keys_or_matrix, mass, mode)
    kappa = exact_kernel(N, alpha)[:, np.asarray(seed_ids)]
    Y = np.asarray(seed_labels, dtype=float)
    num = kappa @ Y
    den = kappa.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return num / den[:, None]


def membership(keys_row, U, ranks, k):
    """Sketch membership of every j in U for one node under one permutation.

    ``ranks`` maps node -> pi. Returns {j: p} for members, p per the definition.
    """
    U = list(U)
    out = {}
    for j in U:
        if keys_row[j] == -np.inf:
            continue
        at_least = sorted(ranks[h] for h in U if keys_row[h] >= keys_row[j])
        if ranks[j] > at_least[min(k, len(at_least)) - 1]:
            continue
        others = sorted(ranks[h] for h in U if h != j and keys_row[h] >= keys_row[j])
        p = 1.0 if len(others) < k else (others[k - 1] - 1) / len(U)
        out[j] = p
    return out


def reference_sketches(keys: np.ndarray, U, k: int, ranks: dict) -> list:
    """Unpruned reference: membership law plus the p definition for every node."""
    return [membership(keys[i], U, ranks, k) for i in range(keys.shape[0])]


def exact_inclusion_probabilities(keys: np.ndarray, U, k: int, samples: int = None, rng_seed: int = 0):
    """Inclusion frequency of each j in S(i) and mean inverse-probability estimate per node.

    Exhaustive over all |U|! permutations when |U| <= 8, otherwise Monte Carlo
    with ``samples`` uniform permutations. Returns (freq, est): freq is
    (n, |U|) in sorted-U column order, est[i] is the mean of sum 1/p.
    """
    U = sorted(int(u) for u in U)
    n = keys.shape[0]
    if len(U) <= 8 and samples is None:
        perms = itertools.permutations(range(1, len(U) + 1))
        total = math.factorial(len(U))
    else:
        rng = np.random.default_rng(rng_seed)
        samples = samples or 10000
        perms = (rng.permutation(len(U)) + 1 for _ in range(samples))
        total = samples
    col = {u: c for c, u in enumerate(U)}
    freq = np.zeros((n, len(U)))
    est = np.zeros(n)
    for perm in perms:
        ranks = dict(zip(U, (int(r) for r in perm)))
        for i in range(n):
            sk = membership(keys[i], U, ranks, k)
            for j, p in sk.items():
                freq[i, col[j]] += 1
                est[i] += 1.0 / p
    return freq / total, est / total
