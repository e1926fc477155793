import numpy as np
import pytest
from hypothesis import given, strategies as st

from reachdiff import oracle
from reachdiff.graph import Graph
from reachdiff.labels import (KernelWeighting, LabelAverager, LoRegModels, RunConfig, SoftLabel,
                              _fit_logistic, average_over_sims, class_order, class_orders, export_soft_labels,
                              loo_error, nn_label, nn_labels, parse_weighting, per_sim_label, per_sim_labels,
                              select_alpha, train_loreg)
from reachdiff.schemes import DISTANCE, REACH, Draw
from reachdiff.search import closest_seed_arrays
from reachdiff.sketch import SketchEntry, build_neighborhood_list, neighborhood_lists, sketch_all

from conftest import instances


def test_weighting_parse_and_alpha():
    assert str(parse_weighting("1/x")) == "1/x"
    assert parse_weighting("1/x^1.5").exponent == 1.5
    assert parse_weighting("nn").kind == "nn" and parse_weighting("nn3").nn_k == 3
    with pytest.raises(ValueError, match="supported"):
        parse_weighting("gauss")
    with pytest.raises(ValueError):
        KernelWeighting(exponent=0)
    x = np.linspace(1, 50, 200)
    for w in (KernelWeighting(), KernelWeighting(exponent=1.5)):
        assert (np.diff(w.alpha(x)) <= 0).all()


def test_run_config():
    rc = RunConfig.from_epsilon(0.05)
    assert (rc.T, rc.k) == (400, 200)
    with pytest.raises(ValueError):
        RunConfig(0, 1)
    with pytest.raises(ValueError):
        RunConfig(1, 0)


def E(member, value, p):
    return SketchEntry(member, value, 1, p)


def test_per_sim_label_examples():
    labels = {0: np.array([1.0, 0.0]), 1: np.array([0.0, 1.0])}
    nbhd = build_neighborhood_list([E(5, 9.0, 1.0), E(6, 5.0, 0.5)])  # N_hat: 1 at t=9, 3 at t=5
    f = per_sim_label([E(0, 9.0, 1.0), E(1, 5.0, 1.0)], nbhd, KernelWeighting(), labels)
    assert f.covered and f.values == pytest.approx([0.75, 0.25], abs=1e-15)
    f = per_sim_label([E(1, 5.0, 0.25)], nbhd, KernelWeighting(exponent=1.5), labels)
    assert f.values.tolist() == [0.0, 1.0]
    f = per_sim_label([], nbhd, KernelWeighting(), labels)
    assert not f.covered and f.values.tolist() == [0.0, 0.0]


def _setup(g, d, seeds, k_mass, k_seed, ps=0):
    mass = sketch_all(g, d, range(g.node_count), k_mass, ps + 1)
    seed = sketch_all(g, d, seeds, k_seed, ps + 2)
    return mass, seed, neighborhood_lists(mass)


@given(inst=instances(), data=st.data())
def test_exact_when_k_covers_base(inst, data):
    g, d = inst
    n = g.node_count
    seeds = data.draw(st.lists(st.integers(0, n - 1), min_size=1, unique=True))
    Y = np.zeros((n, 3))
    Y[np.arange(n), data.draw(st.lists(st.integers(0, 2), min_size=n, max_size=n))] = 1.0
    _, seed_sk, nls = _setup(g, d, seeds, n, n)
    w = KernelWeighting(exponent=data.draw(st.sampled_from([1.0, 1.5])))
    F, cov = per_sim_labels(seed_sk, nls, w, Y)
    M = oracle.exact_thresholds(g, d) if d.mode == REACH else oracle.exact_distances(g, d)
    want = oracle.exact_soft_labels(M, np.ones(n), seeds, Y[seeds], w.alpha, d.mode)
    covered_ref = ~np.isnan(want[:, 0])
    assert np.array_equal(cov, covered_ref)
    assert np.allclose(F[cov], want[cov], rtol=1e-12, atol=1e-15)


@given(inst=instances(), k=st.sampled_from([1, 2, 4]), data=st.data())
def test_convex_and_scale_invariant(inst, k, data):
    g, d = inst
    n = g.node_count
    seeds = data.draw(st.lists(st.integers(0, n - 1), min_size=1, unique=True))
    Y = np.random.default_rng(data.draw(st.integers(0, 99))).dirichlet(np.ones(4), n)
    _, seed_sk, nls = _setup(g, d, seeds, k, k, data.draw(st.integers(0, 2**20)))
    F, cov = per_sim_labels(seed_sk, nls, KernelWeighting(), Y)
    assert (F[cov] >= -1e-15).all() and (F[cov] <= 1 + 1e-12).all()
    assert np.allclose(F[cov].sum(axis=1), 1.0, atol=1e-9)

    class Scaled:
        def alpha(self, x):
            return 7.5 * np.asarray(x, dtype=float) ** -1.0

    F2, cov2 = per_sim_labels(seed_sk, nls, Scaled(), Y)
    assert np.array_equal(cov, cov2) and np.allclose(F, F2, rtol=1e-12, atol=1e-15)


def clique(n, length=1.0):
    tails, heads = zip(*[(a, b) for a in range(n) for b in range(n) if a != b])
    g = Graph.from_edges(n, tails, heads)
    return g, Draw(DISTANCE, np.full(g.num_edges, length), np.zeros(n), 0)


def test_loo_labels():
    # clique of 4 seeds: all pairs tie, so every other seed has the same weight
    g, d = clique(4)
    Y = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0.5, 0.5, 0]])
    _, seed_sk, nls = _setup(g, d, range(4), 4, 4)
    F, cov = per_sim_labels(seed_sk, nls, KernelWeighting(), Y, leave_one_out=True)
    for i in range(4):
        assert F[i] == pytest.approx(np.delete(Y, i, axis=0).mean(axis=0), abs=1e-15)
    # S(i) = {i} -> uncovered; two seeds including itself -> the other label
    g = Graph.from_edges(3, [0, 1], [1, 0])
    d = Draw(DISTANCE, np.ones(2), np.zeros(3), 0)
    _, seed_sk, nls = _setup(g, d, [0, 1, 2], 3, 3)
    Y = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    F, cov = per_sim_labels(seed_sk, nls, KernelWeighting(), Y, leave_one_out=True)
    assert cov.tolist() == [True, True, False]
    assert F[0].tolist() == [0.0, 1.0] and F[1].tolist() == [1.0, 0.0]


def test_nn_labels():
    labels = {3: np.array([1.0, 0.0]), 4: np.array([0.0, 1.0])}
    assert nn_label([(3, 1.0), (4, 2.0)], 1, labels).values.tolist() == [1.0, 0.0]
    assert nn_label([(3, 1.0), (4, 2.0)], 2, labels).values.tolist() == [0.5, 0.5]
    assert not nn_label([], 1, labels).covered
    with pytest.raises(ValueError):
        nn_label([(3, 1.0)], 0, labels)
    # array form, with and without the node's own entry
    g = Graph.from_edges(3, [0, 1, 2], [1, 2, 0])
    d = Draw(DISTANCE, np.array([1.0, 1.0, 5.0]), np.zeros(3), 0)
    Y = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    found, _ = closest_seed_arrays(g, d, [0, 1], 2)
    F, cov = nn_labels(found, 1, Y)
    assert F.tolist() == [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]] and cov.all()
    F, cov = nn_labels(found, 1, Y, exclude_self=True)
    assert F.tolist() == [[0.0, 1.0], [1.0, 0.0], [1.0, 0.0]]


def test_averaging():
    a = SoftLabel(np.array([0.2, 0.8]), True)
    assert average_over_sims([a]).values.tolist() == [0.2, 0.8]
    b = SoftLabel(np.array([0.6, 0.4]), True)
    u = SoftLabel(np.zeros(2), False)
    assert average_over_sims([a, u, b]).values == pytest.approx([0.4, 0.6])
    none = average_over_sims([u, u])
    assert not none.covered and none.values.tolist() == [0.0, 0.0]
    acc = LabelAverager(2, 2)
    acc.add(np.array([[0.2, 0.8], [0.0, 0.0]]), np.array([True, False]))
    acc.add(np.array([[0.6, 0.4], [0.0, 0.0]]), np.array([True, False]))
    F, cov = acc.result(fallback=np.array([0.5, 0.5]))
    assert F[0] == pytest.approx([0.4, 0.6]) and F[1].tolist() == [0.5, 0.5]
    assert cov.tolist() == [True, False]


def test_select_alpha():
    Y = np.array([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        select_alpha([], [], Y)
    assert select_alpha(["a"], [np.full((2, 2), 0.5)], Y)[:2] == (0, "a")
    idx, cand, errs = select_alpha(["a", "b"], [np.full((2, 2), 0.5), Y.copy()], Y)
    assert (idx, cand) == (1, "b") and errs[1] == 0.0
    idx, _, _ = select_alpha(["a", "b"], [Y.copy(), Y.copy()], Y)
    assert idx == 0
    assert loo_error(np.zeros((2, 2)), Y, np.array([False, True]), np.array([1.0, 0.0])) == 1.0


def test_class_order_examples():
    assert class_order(np.array([0.7, 0.2, 0.1]), "Mag") == [0, 1, 2]
    assert class_order(np.array([0.3, 0.3]), "rMag", np.array([0.6, 0.1])) == [1, 0]
    assert class_order(np.array([0.4, 0.4, 0.2]), "Mag") == [0, 1, 2]  # ties by class index
    assert class_order(np.array([0.1, 0.5, 0.4]), "rMag", np.array([0.5, 0.0, 0.5])) == [2, 0, 1]
    with pytest.raises(ValueError, match="models"):
        class_order(np.array([0.5, 0.5]), "LoReg")
    with pytest.raises(ValueError, match="supported"):
        class_order(np.array([0.5, 0.5]), "Best")


@given(st.integers(0, 10**6))
def test_loreg_shared_monotone_model_matches_mag(seed):
    rng = np.random.default_rng(seed)
    F = rng.dirichlet(np.ones(5), 20)
    L = F.shape[1]
    m = LoRegModels(np.full(L, 3.0), np.full(L, -1.0), np.zeros(L, dtype=bool))
    assert np.array_equal(class_orders(F, "LoReg", models=m), class_orders(F, "Mag"))


def test_train_loreg():
    rng = np.random.default_rng(0)
    F = rng.random((40, 3))
    Y = np.zeros((40, 3))
    Y[:, 0] = (F[:, 0] > 0.5)  # perfectly separable
    Y[:, 1] = rng.random(40) < 0.5
    Y[:, 0] += (Y.sum(axis=1) == 0)  # class 2 never positive
    models = train_loreg(F, Y, 1.0)
    assert models.fallback.tolist() == [False, False, True]
    assert np.isfinite(models.slope).all() and models.slope[0] > 0
    with pytest.raises(ValueError):
        train_loreg(F, Y, 0.0)


def test_logistic_optimum_gradient():
    rng = np.random.default_rng(3)
    x = rng.random(60)
    y = (rng.random(60) < x).astype(float)
    reg = 0.5
    w, g = _fit_logistic(x, y, reg)
    assert np.linalg.norm(g) <= 1e-6

    def f(v):
        z = (2 * y - 1) * (v[0] * x + v[1])
        return np.logaddexp(0.0, -z).sum() + 0.5 * reg * v[0] ** 2

    h = 1e-4
    fd = np.array([(f(w + h * e) - f(w - h * e)) / (2 * h) for e in np.eye(2)])
    assert np.abs(fd).max() <= 1e-6


def test_export_soft_labels(tmp_path):
    F = np.array([[0.25, 0.75], [0.5, 0.5]])
    export_soft_labels(tmp_path / "l.csv", ["m1", "m2"], F, np.array([True, False]), ("a", "b"))
    lines = (tmp_path / "l.csv").read_text().splitlines()
    assert lines == ["node_id,covered,a,b", "m1,1,0.25,0.75", "m2,0,0.5,0.5"]
