"""Survival-threshold and shortest-path searches.

Searches answer "how strongly does every node connect *to* ``source``"
and therefore walk the transposed graph. Reach mode aggregates a path by
the minimum lifetime of its edges and middle nodes and keeps the maximum
over paths; distance mode sums lengths and keeps the minimum.
"""
from __future__ import annotations

import heapq
import math

import numpy as np

from . import _kernels
from .graph import Graph
from .schemes import DISTANCE, REACH, Draw


def _check_distance(draw: Draw):
    if (draw.edge_value < 0).any() or (draw.node_value < 0).any():
        raise ValueError("negative length in distance draw")


def _reverse_dijkstra(graph: Graph, draw: Draw, source: int, reach: bool, trace=None) -> dict:
    # heap holds (-key, node): larger key first, smaller node id on ties
    tail, ev, nv = graph.tail, draw.edge_value, draw.node_value
    start = math.inf if reach else 0.0
    best = {source: start}
    done = {}
    heap = [(-start, source)]
    while heap:
        nk, v = heapq.heappop(heap)
        key = -nk
        if v in done or key < best[v]:
            continue
        done[v] = key
        if trace is not None:
            trace.append(key)
        middle = v != source
        for e in graph.in_edges(v):
            h = int(tail[e])
            if h in done:
                continue
            if reach:
                c = min(key, nv[v], ev[e]) if middle else min(key, ev[e])
            else:
                c = ((key - nv[v]) if middle else key) - ev[e]
            if c > best.get(h, -math.inf):
                best[h] = c
                heapq.heappush(heap, (-c, h))
    return done


def survival_search(graph: Graph, draw: Draw, source: int, trace=None) -> dict:
    """Survival threshold ``t[i, source]`` for every node ``i`` that reaches ``source``.

    ``t[source, source]`` is ``inf``. If ``trace`` is a list, the settled
    thresholds are appended to it in pop order.
    """
    if draw.mode != REACH:
        raise ValueError("survival_search needs a reach draw")
    return {int(v): float(t) for v, t in _reverse_dijkstra(graph, draw, int(source), True, trace).items()}


def shortest_path_search(graph: Graph, draw: Draw, source: int, trace=None) -> dict:
    """Distance ``d[i, source]``: edge lengths plus middle-node pass-through lengths."""
    if draw.mode != DISTANCE:
        raise ValueError("shortest_path_search needs a distance draw")
    _check_distance(draw)
    done = _reverse_dijkstra(graph, draw, int(source), False, trace)
    if trace is not None:
        trace[:] = [-x for x in trace]
    return {int(v): -float(k) + 0.0 for v, k in done.items()}


def reverse_keys(graph: Graph, draw: Draw, source: int) -> np.ndarray:
    """Compiled full search; key per node (t, or -d), ``-inf`` when unreachable."""
    if draw.mode == DISTANCE:
        _check_distance(draw)
    return _kernels.reverse_search(graph.rev_indptr, graph.rev_edges, graph.tail,
                                   draw.edge_value, draw.node_value, draw.mode == REACH,
                                   int(source), graph.node_count)


def key_to_value(key, mode):
    return key if mode == REACH else -key + 0.0


def closest_seed_arrays(graph: Graph, draw: Draw, seeds, k: int):
    """Arrays form of :func:`closest_seeds`: (seed ids, values), each (n, k), -1 / nan padded."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if draw.mode == DISTANCE:
        _check_distance(draw)
    seeds = np.unique(np.asarray(seeds, dtype=np.int64))
    found, keys = _kernels.closest_seeds(graph.rev_indptr, graph.rev_edges, graph.tail,
                                         draw.edge_value, draw.node_value, draw.mode == REACH,
                                         seeds, int(k), graph.node_count)
    values = np.where(found >= 0, key_to_value(keys, draw.mode), np.nan)
    return found, values


def closest_seeds(graph: Graph, draw: Draw, seeds, k: int) -> dict:
    """For each node, its ``k`` strongest seeds as ``[(seed, value), ...]``.

    Strongest means largest ``t`` (reach) or smallest ``d`` (distance).
    Equal values are resolved by the search order: smaller seed id first
    among entries popped at the same key. A node forwards only its own k
    settled seeds, so in reach mode a seed that is weaker upstream but ties
    after the min with a later edge may lose the id tie-break; the returned
    values are always the k strongest.
    """
    found, values = closest_seed_arrays(graph, draw, seeds, k)
    out = {}
    for v in range(graph.node_count):
        row = [(int(s), float(x)) for s, x in zip(found[v], values[v]) if s >= 0]
        out[v] = row
    return out
