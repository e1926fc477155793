"""Quality metrics, PR sweeps and the two baselines (average seed label, label propagation)."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import Graph, LabelSet


def average_seed_label(labels) -> np.ndarray:
    Y = labels.seed_labels if isinstance(labels, LabelSet) else np.asarray(labels, dtype=float)
    if len(Y) == 0:
        raise ValueError("average seed label of an empty seed set")
    return Y.mean(axis=0)


def success_score(order, truth) -> float:
    """Sum of 1/position over positions holding a true class, divided by H_r."""
    truth = np.asarray(truth, dtype=float)
    r = int((truth > 0).sum())
    if r == 0:
        raise ValueError("truth label has no positive entry")
    pos = np.flatnonzero(truth[np.asarray(order)] > 0) + 1
    return float((1.0 / pos).sum() / (1.0 / np.arange(1, r + 1)).sum())


def success_scores(orders: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Row-wise success_score for (m, L) class orders against (m, L) truths."""
    hit = np.take_along_axis(Y, orders, axis=1) > 0
    inv = 1.0 / np.arange(1, Y.shape[1] + 1)
    r = (Y > 0).sum(axis=1)
    if (r == 0).any():
        raise ValueError("truth label has no positive entry")
    H = np.cumsum(inv)[r - 1]
    return (hit * inv).sum(axis=1) / H


def margins(F: np.ndarray, seed_avg, covered=None) -> np.ndarray:
    """Delta_i = ||ybar(S) - f_i||_2; uncovered nodes get 0."""
    d = np.linalg.norm(np.atleast_2d(F) - np.asarray(seed_avg), axis=1)
    if covered is not None:
        d = np.where(covered, d, 0.0)
    return d


def pr_sweep(margin: np.ndarray, success: np.ndarray) -> list:
    """(tau, recall, precision) for tau in {0} and each distinct margin."""
    margin = np.asarray(margin, dtype=float)
    success = np.asarray(success, dtype=float)
    if not np.isfinite(margin).all():
        raise ValueError("margins must be finite")
    if len(margin) == 0:
        return []
    order = np.argsort(-margin, kind="stable")
    m, s = margin[order], success[order]
    csum = np.cumsum(s)
    taus = np.unique(np.r_[0.0, m])
    out = []
    for tau in taus:
        cnt = int(np.searchsorted(-m, -tau, side="right"))  # rows with margin >= tau
        if cnt == 0:
            continue
        out.append((float(tau), cnt / len(m), float(csum[cnt - 1] / cnt)))
    return out


def binary_margin_predict(label, seed_avg, truth_class=None):
    """Binary class call against the seed average; returns (class or None, success or None).

    Class 0 when f_0 > ybar_0, class 1 when below; a zero margin predicts
    nothing and counts 0.5.
    """
    f = np.asarray(getattr(label, "values", label), dtype=float)
    ybar = np.asarray(seed_avg, dtype=float)
    if f.shape != (2,) or ybar.shape != (2,):
        raise ValueError("binary margin prediction needs L = 2")
    if f[0] > ybar[0]:
        pred = 0
    elif f[0] < ybar[0]:
        pred = 1
    else:
        pred = None
    if truth_class is None:
        return pred, None
    return pred, 0.5 if pred is None else float(pred == truth_class)


def ase(F: np.ndarray, Y: np.ndarray) -> float:
    """Mean squared L2 error over rows."""
    F, Y = np.atleast_2d(F), np.atleast_2d(Y)
    return float(((F - Y) ** 2).sum(axis=1).mean())


# -- label propagation baseline ----------------------------------------------

@dataclass(frozen=True)
class LPConfig:
    mu1: float = 1.0
    mu2: float = 0.01
    mu3: float = 0.01
    prior: str = "seed_average"  # or "uniform"
    neighbor_weight: str = "inverse_degree"  # or "unit"
    iterations: int = 200

    def __post_init__(self):
        if min(self.mu1, self.mu2, self.mu3) < 0 or self.mu1 + self.mu2 + self.mu3 <= 0:
            raise ValueError("mu weights must be nonnegative with a positive sum")
        if self.prior not in ("uniform", "seed_average"):
            raise ValueError(f"unknown prior {self.prior!r}")
        if self.neighbor_weight not in ("unit", "inverse_degree"):
            raise ValueError(f"unknown neighbor weight {self.neighbor_weight!r}")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")


def label_propagation(graph: Graph, labels: LabelSet, config: LPConfig = LPConfig()):
    """Jacobi iterations of the EXPANDER update on the symmetrized graph.

    Returns (F, changes) where changes[t] is the mean over nodes of the L1
    change of the label in iteration t + 1.
    """
    n, L = graph.node_count, labels.num_classes
    A = sp.csr_matrix((np.ones(graph.num_edges), (graph.tail, graph.head)), shape=(n, n))
    A = ((A + A.T) > 0).astype(float).tocsr()
    deg = np.asarray(A.sum(axis=1)).ravel()
    if config.neighbor_weight == "inverse_degree":
        W = sp.diags(np.divide(1.0, deg, out=np.zeros(n), where=deg > 0)) @ A
    else:
        W = A
    wsum = np.asarray(W.sum(axis=1)).ravel()
    u = np.full(L, 1.0 / L) if config.prior == "uniform" else average_seed_label(labels)
    seed = np.zeros(n, dtype=bool)
    seed[labels.seed_ids] = True
    Yseed = np.zeros((n, L))
    Yseed[labels.seed_ids] = labels.seed_labels
    const = config.mu1 * Yseed + config.mu3 * u
    den = config.mu1 * seed + config.mu2 * wsum + config.mu3
    F = np.where(seed[:, None], Yseed, u)
    changes = []
    for _ in range(config.iterations):
        new = np.divide(const + config.mu2 * (W @ F), den[:, None], out=F.copy(), where=den[:, None] > 0)
        changes.append(float(np.abs(new - F).sum(axis=1).mean()))
        F = new
    return F, changes


# -- reports ------------------------------------------------------------------

@dataclass
class EvalReport:
    ase: float
    success_mean: dict
    pr_curve: dict
    baseline_ase: float
    baseline_success: float
    coverage: float = 1.0
    extra: dict = field(default_factory=dict)

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)


def write_pr_csv(path, curves: dict):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "tau", "recall", "precision"])
        for method, curve in curves.items():
            for tau, rec, prec in curve:
                w.writerow([method, repr(tau), repr(rec), repr(prec)])


def evaluate(F, covered, Y_test, seed_avg, methods=("Mag", "rMag"), models=None, pr=True) -> EvalReport:
    """Score learned labels of the test nodes. Uncovered rows should already hold seed_avg."""
    from .labels import class_orders

    F, Y_test = np.atleast_2d(F), np.atleast_2d(Y_test)
    base = np.broadcast_to(seed_avg, Y_test.shape)
    delta = margins(F, seed_avg, covered)
    succ, curves = {}, {}
    for method in methods:
        s = success_scores(class_orders(F, method, seed_avg, models), Y_test)
        succ[method] = float(s.mean())
        if pr:
            curves[method] = pr_sweep(delta, s)
    if Y_test.shape[1] == 2:
        # two classes: call against the seed average; zero margin counts 0.5
        diff = F[:, 0] - seed_avg[0]
        truth = Y_test[:, 1] > Y_test[:, 0]
        s = np.where(diff == 0, 0.5, ((diff < 0) == truth).astype(float))
        succ["binary"] = float(s.mean())
        if pr:
            curves["binary"] = pr_sweep(delta, s)
    base_s = success_scores(class_orders(base, "Mag"), Y_test)
    return EvalReport(ase(F, Y_test), succ, curves, ase(base, Y_test), float(base_s.mean()),
                      float(np.mean(covered)) if len(covered) else 1.0)
