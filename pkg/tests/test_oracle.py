import math

import numpy as np
import pytest
from hypothesis import given

from reachdiff import oracle
from reachdiff.graph import Graph
from reachdiff.schemes import DISTANCE, REACH, Draw

from conftest import instances


def test_single_edge_and_disconnected():
    g = Graph.from_edges(3, [0], [1])
    t = oracle.exact_thresholds(g, Draw(REACH, np.array([4.0]), np.full(3, np.inf), 0))
    assert t[0, 1] == 4.0 and t[1, 0] == -np.inf and t[0, 2] == -np.inf and t[2, 2] == np.inf
    d = oracle.exact_distances(g, Draw(DISTANCE, np.array([4.0]), np.zeros(3), 0))
    assert d[0, 1] == 4.0 and d[1, 0] == np.inf


def test_size_guard():
    n = oracle.MAX_COMPONENTS
    g = Graph.from_edges(n, [0], [1])
    with pytest.raises(ValueError, match="limited"):
        oracle.exact_thresholds(g, Draw(REACH, np.ones(1), np.full(n, np.inf), 0))


def test_rank_counts_basic():
    # node 0 reaches 1 strongly, 2 and 3 tied and weaker
    t = np.array([[np.inf, 5.0, 2.0, 2.0],
                  [-np.inf, np.inf, -np.inf, -np.inf],
                  [3.0, 3.0, np.inf, 3.0],
                  [-np.inf] * 3 + [np.inf]])
    N = oracle.exact_rank_counts(t, np.ones(4))
    assert N[0].tolist() == [1, 2, 4, 4]
    assert N[1].tolist() == [0, 1, 0, 0]
    assert N[2].tolist() == [4, 4, 1, 4]  # all ties -> total reachable mass


def test_rank_counts_distance_six_within_seven():
    # star: node 0 reaches 8 leaves at distances 1..8
    d = np.full((9, 9), np.inf)
    np.fill_diagonal(d, 0.0)
    d[0, 1:] = np.arange(1, 9)
    N = oracle.exact_rank_counts(d, np.ones(9), DISTANCE)
    # nodes with d <= 5 from 0: itself and leaves 1..5
    assert N[0, 5] == 6
    N0 = oracle.exact_rank_counts(d, np.r_[0, np.ones(8)], DISTANCE)
    assert N0[0, 5] == 5


@given(instances())
def test_kernel_invariants(inst):
    g, d = inst
    M = oracle.exact_thresholds(g, d) if d.mode == REACH else oracle.exact_distances(g, d)
    N = oracle.exact_rank_counts(M, np.ones(g.node_count), d.mode)
    K = oracle.to_keys(M, d.mode)
    reach = K > -np.inf
    assert (N[reach] >= 1).all()
    kappa = oracle.exact_kernel(N, lambda x: 1.0 / x)
    assert (kappa[~reach] == 0).all() and (kappa[reach] > 0).all()


def test_inclusion_probability_two_nodes():
    # k=1, U={a,b}, b weaker: included only when ranked first
    keys = np.array([[np.inf, 5.0, 2.0]])
    freq, est = oracle.exact_inclusion_probabilities(keys, [1, 2], 1)
    assert freq[0].tolist() == [1.0, 0.5]
    # p for j=2 (weaker) is (pi_1 - 1)/2 = 1/2 when it is included (pi_2=1, pi_1=2)
    assert oracle.membership(keys[0], [1, 2], {1: 2, 2: 1}, 1) == {1: 1.0, 2: 0.5}
    assert est[0] == pytest.approx(2.0)


def test_inclusion_probability_small_set():
    keys = np.array([[3.0, 3.0, 1.0, 2.0, -np.inf]])
    for k in (1, 2, 3, 4):
        U = [0, 1, 2, 3, 4]
        total = sum(math.factorial(5) for _ in [0])
        _, est = oracle.exact_inclusion_probabilities(keys, U, k)
        assert est[0] == pytest.approx(4.0), (k, total)
    # k >= |U|: all probabilities one
    m = oracle.membership(keys[0], range(5), dict(zip(range(5), (3, 1, 5, 2, 4))), 5)
    assert set(m.values()) == {1.0} and set(m) == {0, 1, 2, 3}


def test_exact_soft_labels():
    t = np.array([[np.inf, 5.0, 2.0], [-np.inf, np.inf, -np.inf], [-np.inf] * 2 + [np.inf]])
    Y = np.array([[1.0, 0.0], [0.0, 1.0]])
    F = oracle.exact_soft_labels(t, np.ones(3), [1, 2], Y, lambda x: 1.0 / x)
    # N = 2 for node 1 and 3 for node 2 from node 0
    assert F[0] == pytest.approx([0.6, 0.4])
    assert F[1].tolist() == [1.0, 0.0]
    assert F[2].tolist() == [0.0, 1.0]
