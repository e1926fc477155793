import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reachdiff import oracle
from reachdiff.graph import Graph
from reachdiff.schemes import DISTANCE, REACH, Draw
from reachdiff.search import (closest_seed_arrays, closest_seeds, reverse_keys, shortest_path_search,
                              survival_search)

from conftest import instances, random_instance


def chain(values, node_values, mode):
    n = len(values) + 1
    g = Graph.from_edges(n, range(n - 1), range(1, n))
    return g, Draw(mode, np.asarray(values, float), np.asarray(node_values, float), 0)


def test_reach_chain_min():
    g, d = chain([5.0, 3.0], [np.inf] * 3, REACH)
    assert survival_search(g, d, 2) == {2: math.inf, 1: 3.0, 0: 3.0}


def test_reach_max_over_paths():
    g = Graph.from_edges(4, [0, 1, 0, 2], [1, 3, 2, 3])
    d = Draw(REACH, np.array([3.0, 9.0, 8.0, 7.0]), np.full(4, np.inf), 0)
    assert survival_search(g, d, 3)[0] == 7.0


def test_reach_middle_node_value():
    g, d = chain([5.0, 6.0], [1.0, 2.0, 0.5], REACH)
    # only node 1 is a middle node on 0 -> 2
    assert survival_search(g, d, 2)[0] == 2.0
    assert survival_search(g, d, 1)[0] == 5.0


def test_distance_chain_sum():
    g, d = chain([2.0, 3.0], [7.0, 1.0, 7.0], DISTANCE)
    assert shortest_path_search(g, d, 2)[0] == 6.0


def test_distance_zero_lengths():
    g, d = chain([0.0, 0.0, 0.0], [0.0] * 4, DISTANCE)
    assert set(shortest_path_search(g, d, 3).values()) == {0.0}


def test_mode_checks():
    g, d = chain([1.0], [0.0, 0.0], DISTANCE)
    with pytest.raises(ValueError):
        survival_search(g, d, 1)
    neg = Draw(DISTANCE, np.array([-1.0]), np.zeros(2), 0)
    with pytest.raises(ValueError):
        shortest_path_search(g, neg, 1)
    with pytest.raises(ValueError):
        reverse_keys(g, neg, 1)


@given(instances())
def test_search_matches_oracle(inst):
    g, d = inst
    if d.mode == REACH:
        M = oracle.exact_thresholds(g, d)
        fn = survival_search
    else:
        M = oracle.exact_distances(g, d)
        fn = shortest_path_search
    K = oracle.to_keys(M, d.mode)
    for j in range(g.node_count):
        got = fn(g, d, j)
        absent = -np.inf if d.mode == REACH else np.inf
        want = {i: M[i, j] for i in range(g.node_count) if M[i, j] != absent}
        assert got == want
        assert np.array_equal(reverse_keys(g, d, j), K[:, j])


@given(instances())
def test_monotone_settling(inst):
    g, d = inst
    for j in range(g.node_count):
        trace = []
        if d.mode == REACH:
            survival_search(g, d, j, trace)
            assert all(a >= b for a, b in zip(trace, trace[1:]))
        else:
            shortest_path_search(g, d, j, trace)
            assert all(a <= b for a, b in zip(trace, trace[1:]))


@given(instances(modes=(REACH,)))
def test_monotone_transform_invariance(inst):
    g, d = inst
    f = lambda x: np.exp(0.5 * x) + 3.0 * x  # strictly increasing, inf -> inf
    with np.errstate(over="ignore"):
        d2 = Draw(REACH, f(d.edge_value), f(d.node_value), 0)
    for j in range(g.node_count):
        a, b = survival_search(g, d, j), survival_search(g, d2, j)
        assert a.keys() == b.keys()
        with np.errstate(over="ignore"):
            assert all(b[i] == f(np.float64(a[i])) for i in a)


@given(instances(modes=(REACH,)))
def test_threshold_at_least_edge_value(inst):
    g, d = inst
    for e in range(g.num_edges):
        i, j = int(g.tail[e]), int(g.head[e])
        assert survival_search(g, d, j)[i] >= d.edge_value[e]


def test_closest_seeds_self_and_infinite():
    g, d = chain([1.0, 2.0], [0.0] * 3, DISTANCE)
    cs = closest_seeds(g, d, [1], 1)
    assert cs[1] == [(1, 0.0)] and cs[0] == [(1, 1.0)] and cs[2] == []
    # reach: an infinite edge beats any finite connection; equal +inf goes to the smaller id
    g = Graph.from_edges(3, [0, 0], [1, 2])
    d = Draw(REACH, np.array([np.inf, np.inf]), np.full(3, np.inf), 0)
    assert closest_seeds(g, d, [2, 1], 1)[0] == [(1, math.inf)]
    d = Draw(REACH, np.array([4.0, np.inf]), np.full(3, np.inf), 0)
    assert closest_seeds(g, d, [1, 2], 1)[0] == [(2, math.inf)]


def test_closest_seeds_k_zero():
    g, d = chain([1.0], [0.0, 0.0], DISTANCE)
    with pytest.raises(ValueError):
        closest_seeds(g, d, [0], 0)


@pytest.mark.parametrize("seed", range(40))
def test_closest_seeds_vs_full_searches(seed):
    rng = np.random.default_rng(seed)
    mode = REACH if seed % 2 else DISTANCE
    g, d = random_instance(rng, mode, ties=seed % 4 < 2)
    seeds = np.flatnonzero(rng.random(g.node_count) < 0.5)
    if len(seeds) == 0:
        seeds = np.array([0])
    k = int(rng.integers(1, 4))
    K = np.stack([reverse_keys(g, d, j) for j in range(g.node_count)], axis=1)
    found, values = closest_seed_arrays(g, d, seeds, k)
    for i in range(g.node_count):
        row = [(K[i, s], s) for s in seeds if K[i, s] > -np.inf]
        got = [s for s in found[i] if s >= 0]
        assert len(got) == min(k, len(row))
        # found keys are the k best keys
        best = sorted((kv for kv, _ in row), reverse=True)[:k]
        assert sorted((K[i, s] for s in got), reverse=True) == best
        want = [K[i, s] if mode == REACH else -K[i, s] + 0.0 for s in got]
        assert values[i, :len(got)].tolist() == want
        if k == 1 and row and mode == DISTANCE:
            top = max(kv for kv, _ in row)
            assert got[0] == min(s for kv, s in row if kv == top)
