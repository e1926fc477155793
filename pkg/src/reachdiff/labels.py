"""Kernel weightings, soft labels per simulation, averaging, LOO and class ordering."""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .sketch import NeighborhoodLists, SketchSet


@dataclass(frozen=True)
class KernelWeighting:
    """alpha(x) = x**-exponent on ranks, or an unweighted vote of the nn_k closest seeds."""

    kind: str = "rank_power"
    exponent: float = 1.0
    nn_k: int = 1

    def __post_init__(self):
        if self.kind not in ("rank_power", "nn"):
            raise ValueError(f"unknown weighting kind {self.kind!r}")
        if self.kind == "rank_power" and self.exponent <= 0:
            raise ValueError("exponent must be positive")
        if self.kind == "nn" and self.nn_k < 1:
            raise ValueError("nn needs k' >= 1")

    @property
    def needs_sketches(self) -> bool:
        return self.kind == "rank_power"

    def alpha(self, x):
        return np.asarray(x, dtype=float) ** -self.exponent

    def __str__(self):
        if self.kind == "nn":
            return "nn" if self.nn_k == 1 else f"nn{self.nn_k}"
        return "1/x" if self.exponent == 1 else f"1/x^{self.exponent:g}"


WEIGHTING_NAMES = ("1/x", "1/x^<e>", "nn", "nn<k>")


def parse_weighting(text: str) -> KernelWeighting:
    text = text.strip().replace(" ", "")
    if text == "1/x":
        return KernelWeighting()
    m = re.fullmatch(r"1/x\^([0-9.]+)", text)
    if m:
        return KernelWeighting(exponent=float(m.group(1)))
    m = re.fullmatch(r"nn(\d*)", text)
    if m:
        return KernelWeighting("nn", nn_k=int(m.group(1) or 1))
    raise ValueError(f"unknown weighting {text!r}; supported forms: {', '.join(WEIGHTING_NAMES)}")


@dataclass
class SoftLabel:
    values: np.ndarray
    covered: bool


@dataclass(frozen=True)
class RunConfig:
    T: int
    k: int
    weighting: KernelWeighting = KernelWeighting()
    epsilon: float = None

    def __post_init__(self):
        if self.T < 1 or self.k < 1:
            raise ValueError("T and k must be at least 1")

    @classmethod
    def from_epsilon(cls, epsilon: float, weighting: KernelWeighting = KernelWeighting()):
        """T = eps^-2 simulations with k = eps^-2 / 2."""
        T = int(np.ceil(epsilon ** -2))
        return cls(T, int(np.ceil(0.5 * epsilon ** -2)), weighting, epsilon)


def _normalize(num, den):
    covered = den > 0
    F = np.zeros_like(num)
    F[covered] = num[covered] / den[covered, None]
    return F, covered


def per_sim_labels(seed_sketches: SketchSet, nlists: NeighborhoodLists, weighting: KernelWeighting,
                   Y: np.ndarray, leave_one_out: bool = False):
    """Sketch-based density labels f'_i of every node for one simulation.

    ``Y`` is the (n, L) label matrix (rows of seeds used). Each sampled seed j
    of node i is weighted alpha(max(N_hat, 1)) / p_ij with N_hat read from i's
    neighborhood list at t_ij. ``leave_one_out`` drops j == i.
    Returns (F, covered).
    """
    n = seed_sketches.node_count
    node = np.repeat(np.arange(n), np.diff(seed_sketches.indptr))
    member = seed_sketches.member
    keep = node != member if leave_one_out else np.ones(len(node), dtype=bool)
    node, member = node[keep], member[keep]
    value = seed_sketches.value[keep]
    N_hat = nlists.query(node, value)
    w = weighting.alpha(np.maximum(N_hat, 1.0)) / seed_sketches.prob[keep]
    Ym = Y[member]
    num = np.stack([np.bincount(node, weights=w * Ym[:, c], minlength=n) for c in range(Y.shape[1])], axis=1)
    den = np.bincount(node, weights=w, minlength=n)
    return _normalize(num, den)


def per_sim_label(entries, nbhd, weighting: KernelWeighting, labels: dict) -> SoftLabel:
    """Single-node form: ``entries`` from a seed sketch, ``nbhd`` a NeighborhoodList."""
    from .sketch import estimate_reach_mass

    L = len(next(iter(labels.values()))) if labels else 0
    num, den = np.zeros(L), 0.0
    for e in entries:
        N_hat = max(estimate_reach_mass(nbhd, e.value), 1.0)
        w = float(weighting.alpha(N_hat)) / e.inclusion_prob
        num += w * np.asarray(labels[e.member], dtype=float)
        den += w
    if den == 0:
        return SoftLabel(np.zeros(L), False)
    return SoftLabel(num / den, True)


def nn_labels(found: np.ndarray, nn_k: int, Y: np.ndarray, exclude_self: bool = False):
    """Mean label of the nn_k closest seeds per node; ``found`` from closest_seed_arrays.

    With ``exclude_self`` a node's own id is skipped (``found`` should then
    hold nn_k + 1 columns).
    """
    n = found.shape[0]
    F = np.zeros((n, Y.shape[1]))
    cnt = np.zeros(n)
    taken = np.zeros(n, dtype=np.int64)
    own = np.arange(n)
    for c in range(found.shape[1]):
        s = found[:, c]
        ok = (s >= 0) & (taken < nn_k)
        if exclude_self:
            ok &= s != own
        F[ok] += Y[s[ok]]
        cnt[ok] += 1
        taken[ok] += 1
    return _normalize(F, cnt)


def nn_label(closest, k_prime: int, labels: dict) -> SoftLabel:
    if k_prime < 1:
        raise ValueError("k' must be at least 1")
    use = closest[:k_prime]
    if not use:
        L = len(next(iter(labels.values()))) if labels else 0
        return SoftLabel(np.zeros(L), False)
    return SoftLabel(np.mean([labels[s] for s, _ in use], axis=0), True)


class LabelAverager:
    """Running mean of per-simulation labels over covered simulations only."""

    def __init__(self, n: int, L: int):
        self.total = np.zeros((n, L))
        self.count = np.zeros(n, dtype=np.int64)

    def add(self, F, covered):
        self.total[covered] += F[covered]
        self.count += covered

    def result(self, fallback=None):
        F, covered = _normalize(self.total, self.count.astype(float))
        if fallback is not None:
            F[~covered] = fallback
        return F, covered


def average_over_sims(per_sim: list) -> SoftLabel:
    vals = [s.values for s in per_sim if s.covered]
    if not vals:
        L = len(per_sim[0].values) if per_sim else 0
        return SoftLabel(np.zeros(L), False)
    return SoftLabel(np.mean(vals, axis=0), True)


def loo_error(F_loo: np.ndarray, Y_seeds: np.ndarray, covered=None, fallback=None) -> float:
    """Summed L2 distance between LOO labels and seed labels.

    Uncovered seeds are charged against ``fallback`` (or the zero vector).
    """
    F = np.array(F_loo, dtype=float)
    if covered is not None:
        F[~np.asarray(covered)] = 0.0 if fallback is None else fallback
    return float(np.linalg.norm(F - Y_seeds, axis=1).sum())


def select_alpha(candidates: list, loo: list, Y_seeds: np.ndarray):
    """Index and candidate with the smallest summed LOO L2 error; ties go to the earlier one."""
    if not candidates:
        raise ValueError("no candidate weightings")
    errs = [float(np.linalg.norm(np.asarray(F) - Y_seeds, axis=1).sum()) for F in loo]
    best = int(np.argmin(errs))
    return best, candidates[best], errs


# -- class ordering -----------------------------------------------------------

@dataclass
class LoRegModels:
    slope: np.ndarray
    intercept: np.ndarray
    fallback: np.ndarray  # True -> class scored by its raw label entry

    def scores(self, F: np.ndarray) -> np.ndarray:
        z = F * self.slope + self.intercept
        prob = 1.0 / (1.0 + np.exp(-z))
        return np.where(self.fallback, F, prob)


def _fit_logistic(x, y, reg):
    s = 2.0 * y - 1.0

    def f(w):
        z = s * (w[0] * x + w[1])
        return np.logaddexp(0.0, -z).sum() + 0.5 * reg * w[0] ** 2

    def grad(w):
        z = s * (w[0] * x + w[1])
        g = -s / (1.0 + np.exp(z))
        return np.array([g @ x + reg * w[0], g.sum()])

    def hess(w):
        z = w[0] * x + w[1]
        q = 1.0 / (1.0 + np.exp(-z))
        r = q * (1 - q)
        return np.array([[r @ (x * x) + reg, r @ x], [r @ x, r.sum()]])

    res = minimize(f, np.zeros(2), jac=grad, hess=hess, method="trust-exact",
                   options={"gtol": 1e-8, "maxiter": 500})
    return res.x, grad(res.x)


def train_loreg(F_loo: np.ndarray, Y_seeds: np.ndarray, regularization: float = 1.0) -> LoRegModels:
    """Per-class 1-D logistic regression of 1{y_ij > 0} on f_ij; L2 penalty on the slope."""
    if regularization <= 0:
        raise ValueError("regularization must be positive")
    L = Y_seeds.shape[1]
    slope, icpt = np.zeros(L), np.zeros(L)
    fallback = np.zeros(L, dtype=bool)
    for c in range(L):
        y = (Y_seeds[:, c] > 0).astype(float)
        if y.min() == y.max():
            fallback[c] = True
            continue
        (slope[c], icpt[c]), _ = _fit_logistic(F_loo[:, c].astype(float), y, regularization)
    return LoRegModels(slope, icpt, fallback)


METHODS = ("Mag", "rMag", "LoReg")


def class_scores(F: np.ndarray, method: str, seed_avg=None, models: LoRegModels = None) -> np.ndarray:
    F = np.atleast_2d(F)
    if method == "Mag":
        return F
    if method == "rMag":
        ybar = np.asarray(seed_avg, dtype=float)
        out = np.full(F.shape, -np.inf)  # classes absent from the seeds go last
        pos = ybar > 0
        out[:, pos] = F[:, pos] ** 2 / ybar[pos] ** 2
        return out
    if method == "LoReg":
        if models is None:
            raise ValueError("LoReg ordering needs trained models")
        return models.scores(F)
    raise ValueError(f"unknown ordering method {method!r}; supported: {', '.join(METHODS)}")


def class_orders(F, method, seed_avg=None, models=None) -> np.ndarray:
    """Rows of class indices by decreasing score; lower index first on ties."""
    return np.argsort(-class_scores(F, method, seed_avg, models), axis=1, kind="stable")


def class_order(label, method: str, seed_avg=None, models=None) -> list:
    values = label.values if isinstance(label, SoftLabel) else label
    return class_orders(np.asarray(values, dtype=float), method, seed_avg, models)[0].tolist()


def export_soft_labels(path, node_names, F: np.ndarray, covered: np.ndarray, class_names=None):
    import csv

    L = F.shape[1]
    cols = list(class_names) if class_names else [f"f_{c + 1}" for c in range(L)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "covered", *cols])
        for name, row, cov in zip(node_names, F, covered):
            w.writerow([name, int(cov), *(repr(float(x)) for x in row)])
