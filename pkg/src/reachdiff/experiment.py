"""Experiment configuration, the simulate-sketch-label-evaluate pipeline, and artifacts."""
from __future__ import annotations

import difflib
import hashlib
import json
import os
import shutil
import subprocess
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import LPConfig, average_seed_label, evaluate, label_propagation, write_pr_csv
from .graph import Direction, load_edge_list, load_movielens, seed_permutation
from .labels import (METHODS, LabelAverager, export_soft_labels, loo_error, nn_labels, parse_weighting,
                     per_sim_labels, train_loreg)
from .schemes import draw_simulation, parse_scheme
from .search import closest_seed_arrays
from .sketch import SketchSet, neighborhood_lists, sketch_all

WORKERS_ENV = "REACHDIFF_WORKERS"
DEFAULT_K = 16
DEFAULT_T_SKETCH = 50
DEFAULT_T_NN = 200


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage


def _ints(text):
    return [int(x) for x in str(text).replace(",", " ").split()]


def _strs(text):
    return [x.strip() for x in str(text).split(",") if x.strip()]


@dataclass
class ExperimentConfig:
    dataset: str = "movielens"  # movielens | edgelist
    ratings: str = ""
    movies: str = ""
    edges: str = ""
    labels: str = ""
    direction: str = "forward"
    scheme: str = "dist-exp:g=1/x,delta=50"
    weightings: list = field(default_factory=lambda: ["1/x"])
    k: int = DEFAULT_K
    T: int = None
    seed_sizes: list = field(default_factory=lambda: [20, 50, 100, 200, 500])
    perm_seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    methods: list = field(default_factory=lambda: list(METHODS))
    output: str = "results"
    master_seed: int = 0
    loreg_reg: float = 1.0
    lp: bool = False
    lp_mu1: float = 1.0
    lp_mu2: float = 0.01
    lp_mu3: float = 0.01
    lp_prior: str = "seed_average"
    lp_weight: str = "inverse_degree"
    lp_iterations: int = 200
    cache_dir: str = ""

    def lp_config(self) -> LPConfig:
        return LPConfig(self.lp_mu1, self.lp_mu2, self.lp_mu3, self.lp_prior, self.lp_weight, self.lp_iterations)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_CONVERT = {
    "k": int, "T": int, "master_seed": int, "lp_iterations": int,
    "loreg_reg": float, "lp_mu1": float, "lp_mu2": float, "lp_mu3": float,
    "seed_sizes": _ints, "perm_seeds": _ints, "weightings": _strs, "methods": _strs,
    "lp": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
}


def parse_config_text(text: str, base_dir=".") -> ExperimentConfig:
    names = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not eq:
            raise ValueError(f"line {no}: expected key = value")
        if key not in names:
            hint = difflib.get_close_matches(key, names, n=1)
            raise ValueError(f"line {no}: unknown key {key!r}" + (f"; did you mean {hint[0]!r}?" if hint else ""))
        try:
            values[key] = _CONVERT.get(key, str)(val) if val != "" or key in ("cache_dir",) else None
        except ValueError as exc:
            raise ValueError(f"line {no}: bad value for {key}: {exc}") from None
    values = {k: v for k, v in values.items() if v is not None}
    for key in ("ratings", "movies", "edges", "labels", "output", "cache_dir"):
        if values.get(key) and not os.path.isabs(values[key]):
            values[key] = str(Path(base_dir) / values[key])
    return ExperimentConfig(**values)


def check_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Validate names and files, fill defaults. Returns the resolved config."""
    if cfg.dataset not in ("movielens", "edgelist"):
        raise ValueError(f"unknown dataset {cfg.dataset!r}; supported: movielens, edgelist")
    paths = ("ratings", "movies") if cfg.dataset == "movielens" else ("edges", "labels")
    for key in paths:
        p = getattr(cfg, key)
        if not p or not Path(p).is_file():
            raise ValueError(f"{key} file not found: {p!r}")
    Direction(cfg.direction)
    try:
        parse_scheme(cfg.scheme)
    except ValueError as exc:
        raise ValueError(f"scheme: {exc}") from None
    if not cfg.weightings:
        raise ValueError("at least one weighting is required")
    ws = []
    for w in cfg.weightings:
        try:
            ws.append(parse_weighting(w))
        except ValueError as exc:
            hint = difflib.get_close_matches(w, ["1/x", "1/x^1.5", "nn"], n=1)
            raise ValueError(f"{exc}" + (f"; did you mean {hint[0]!r}?" if hint else "")) from None
    for m in cfg.methods:
        if m not in METHODS:
            hint = difflib.get_close_matches(m, METHODS, n=1)
            raise ValueError(f"unknown ordering method {m!r}; supported: {', '.join(METHODS)}"
                             + (f"; did you mean {hint[0]!r}?" if hint else ""))
    T = cfg.T
    if T is None:
        T = DEFAULT_T_SKETCH if any(w.needs_sketches for w in ws) else DEFAULT_T_NN
    if T < 1 or cfg.k < 1:
        raise ValueError("T and k must be at least 1")
    if not cfg.seed_sizes or min(cfg.seed_sizes) < 1:
        raise ValueError("seed sizes must be positive")
    if not cfg.perm_seeds:
        raise ValueError("at least one permutation seed is required")
    cfg.lp_config()
    return replace(cfg, T=T, weightings=[str(w) for w in ws])


def validate_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":  # a run manifest
        cfg = ExperimentConfig(**json.loads(text)["config"])
    else:
        cfg = parse_config_text(text, base_dir=path.parent)
    return check_config(cfg)


# -- seeds and hashing ---------------------------------------------------------

def derive_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def sim_seeds(master_seed: int, T: int) -> list:
    return [derive_seed(master_seed, 0x51, t) for t in range(T)]


def file_digest(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def code_version() -> str:
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=5).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"{__version__}+{rev}" if rev else __version__


def load_dataset(cfg: ExperimentConfig):
    if cfg.dataset == "movielens":
        return load_movielens(cfg.ratings, cfg.movies)
    return load_edge_list(cfg.edges, cfg.labels, Direction(cfg.direction))


# -- simulations -----------------------------------------------------------------

@dataclass
class SimContext:
    graph: object
    scheme: object
    Y: np.ndarray  # (n, L) labels, read only at seed rows
    splits: dict  # (perm_seed, s) -> seed ids
    weightings: list
    k: int
    seeds: list
    rows: np.ndarray  # node ids whose labels are kept
    cache_dir: str = ""
    data_hash: str = ""


_CTX = None


def _init_worker(ctx):
    global _CTX
    _CTX = ctx


def _cached_sketch(ctx, draw, U, perm_seed, tag):
    if not ctx.cache_dir:
        return sketch_all(ctx.graph, draw, U, ctx.k, perm_seed)
    key = hashlib.sha256(f"{ctx.data_hash}|{ctx.scheme}|{draw.rng_seed}|{ctx.k}|{tag}|{perm_seed}".encode())
    path = Path(ctx.cache_dir) / f"{key.hexdigest()[:24]}.npz"
    if path.exists():
        return SketchSet.load(path)
    sk = sketch_all(ctx.graph, draw, U, ctx.k, perm_seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    sk.save(path)
    return sk


def simulate_once(ctx: SimContext, t: int) -> dict:
    """Labels of one simulation: {(perm, s, weighting): (F_rows, cov_rows, F_loo, cov_loo)}."""
    g = ctx.graph
    sim_seed = ctx.seeds[t]
    draw = draw_simulation(g, ctx.scheme, sim_seed)
    weights = [parse_weighting(w) for w in ctx.weightings]
    nlists = None
    if any(w.needs_sketches for w in weights):
        mass_nodes = np.flatnonzero(g.node_mass == 1)
        nlists = neighborhood_lists(_cached_sketch(ctx, draw, mass_nodes, derive_seed(sim_seed, 0x4D), "mass"))
    nn_need = max((w.nn_k for w in weights if not w.needs_sketches), default=0)
    out = {}
    for (p, s), seeds in ctx.splits.items():
        seed_sk = None
        if nlists is not None:
            seed_sk = _cached_sketch(ctx, draw, seeds, derive_seed(sim_seed, 0x53, p, s), f"seeds{p}_{s}")
        found = closest_seed_arrays(g, draw, seeds, nn_need + 1)[0] if nn_need else None
        for w, name in zip(weights, ctx.weightings):
            if w.needs_sketches:
                F, cov = per_sim_labels(seed_sk, nlists, w, ctx.Y)
                Fl, cl = per_sim_labels(seed_sk, nlists, w, ctx.Y, leave_one_out=True)
            else:
                F, cov = nn_labels(found, w.nn_k, ctx.Y)
                Fl, cl = nn_labels(found, w.nn_k, ctx.Y, exclude_self=True)
            out[(p, s, name)] = (F[ctx.rows], cov[ctx.rows], Fl[seeds], cl[seeds])
    return out


def _worker_sim(t):
    return simulate_once(_CTX, t)


def run_simulations(ctx: SimContext, workers: int = 1):
    """Average labels over simulations; reduction is always in simulation order."""
    L = ctx.Y.shape[1]
    acc, loo = {}, {}
    for (p, s), seeds in ctx.splits.items():
        for name in ctx.weightings:
            acc[(p, s, name)] = LabelAverager(len(ctx.rows), L)
            loo[(p, s, name)] = LabelAverager(len(seeds), L)
    T = len(ctx.seeds)
    if workers > 1 and T > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(ctx,)) as ex:
            results = ex.map(_worker_sim, range(T))
            for res in results:
                _accumulate(acc, loo, res)
    else:
        for t in range(T):
            _accumulate(acc, loo, simulate_once(ctx, t))
    return acc, loo


def _accumulate(acc, loo, res):
    for key, (F, cov, Fl, cl) in res.items():
        acc[key].add(F, cov)
        loo[key].add(Fl, cl)


# -- orchestration ---------------------------------------------------------------

def _splits(labels, cfg):
    out, tests = {}, {}
    n = len(labels.labeled_ids)
    smax = max(cfg.seed_sizes)
    if smax > n:
        raise ValueError(f"seed size {smax} exceeds the {n} labeled nodes")
    for p in cfg.perm_seeds:
        perm = seed_permutation(labels, p)
        tests[p] = perm[smax:]  # never a seed at any size
        for s in cfg.seed_sizes:
            out[(p, s)] = np.sort(perm[:s])
    return out, tests


def _workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_experiment(cfg: ExperimentConfig, workers: int = None) -> Path:
    """Run the full protocol and write reports, soft labels, PR curves and a manifest.

    Outputs appear in ``cfg.output`` only when every stage succeeded.
    """
    workers = _workers() if workers is None else workers
    stage = "validate"
    out = Path(cfg.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=out.parent))
    try:
        cfg = check_config(cfg)
        stage = "load"
        graph, labels = load_dataset(cfg)
        scheme = parse_scheme(cfg.scheme)
        splits, tests = _splits(labels, cfg)
        data_files = [cfg.ratings, cfg.movies] if cfg.dataset == "movielens" else [cfg.edges, cfg.labels]
        data_hash = file_digest(data_files)
        seeds = sim_seeds(cfg.master_seed, cfg.T)
        rows = np.sort(labels.labeled_ids)
        ctx = SimContext(graph, scheme, labels.label_matrix(graph.node_count), splits, cfg.weightings,
                         cfg.k, seeds, rows, cfg.cache_dir, data_hash)

        stage = "simulate"
        acc, loo = run_simulations(ctx, workers)

        stage = "evaluate"
        row_of = {int(v): r for r, v in enumerate(rows)}
        reports = {}
        for (p, s), seed_ids in splits.items():
            split = replace(labels, seed_ids=seed_ids, unlabeled_ids=tests[p])
            reports[(p, s)] = _evaluate_split(cfg, graph, split, acc, loo, p, s, row_of)

        stage = "write"
        for (p, s), (report, soft, curves) in reports.items():
            with open(tmp / f"report_p{p}_s{s}.json", "w", encoding="utf-8") as fh:
                json.dump(report, fh, indent=2, sort_keys=True)
            F, cov = soft
            export_soft_labels(tmp / f"labels_p{p}_s{s}.csv", [graph.names[v] for v in rows], F, cov,
                               labels.class_names)
            write_pr_csv(tmp / f"pr_p{p}_s{s}.csv", curves)
        manifest = {
            "config": {k: v for k, v in asdict(cfg).items()},
            "scheme": str(scheme),
            "sim_seeds": seeds,
            "sketch_seeds": {"mass": "derive_seed(sim_seed, 0x4D)", "seeds": "derive_seed(sim_seed, 0x53, perm, s)"},
            "data_sha256": data_hash,
            "code_version": code_version(),
            "workers": workers,
        }
        with open(tmp / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        (tmp / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
        if out.exists():
            shutil.rmtree(out)
        tmp.rename(out)
        return out
    except Exception as exc:
        shutil.rmtree(tmp, ignore_errors=True)
        raise StageError(stage, exc) from exc


def _evaluate_split(cfg, graph, split, acc, loo, p, s, row_of):
    ybar = average_seed_label(split)
    Yseed = split.seed_labels
    test = split.unlabeled_ids
    Ytest = split.labels_of(test)
    test_rows = np.array([row_of[int(v)] for v in test], dtype=np.int64)
    report = {"perm_seed": p, "s": s, "n_seeds": len(split.seed_ids), "n_test": len(test),
              "scheme": cfg.scheme, "T": cfg.T, "k": cfg.k, "weightings": {}}
    curves, loo_errs, soft = {}, [], {}
    for name in cfg.weightings:
        F, cov = acc[(p, s, name)].result(fallback=ybar)
        Fl, cl = loo[(p, s, name)].result(fallback=ybar)
        err = loo_error(Fl, Yseed)
        loo_errs.append(err)
        models = train_loreg(Fl, Yseed, cfg.loreg_reg) if "LoReg" in cfg.methods else None
        ev = evaluate(F[test_rows], cov[test_rows], Ytest, ybar, cfg.methods, models)
        entry = asdict(ev)
        entry.pop("pr_curve")
        entry["loo_error"] = err
        if models is not None:
            entry["loreg_fallback_classes"] = int(models.fallback.sum())
        report["weightings"][name] = entry
        for method, curve in ev.pr_curve.items():
            curves[f"{name}|{method}"] = curve
        soft[name] = (F, cov)
        report["baseline"] = {"ase": ev.baseline_ase, "success_Mag": ev.baseline_success}
    best = int(np.argmin(loo_errs))
    report["selected_weighting"] = cfg.weightings[best]
    if cfg.lp:
        report["lp"] = lp_report(graph, split, cfg.lp_config(), test, Ytest, ybar)
    return report, soft[cfg.weightings[best]], curves


def lp_report(graph, split, lpcfg, test, Ytest, ybar):
    F, changes = label_propagation(graph, split, lpcfg)
    ev = evaluate(F[test], np.ones(len(test), dtype=bool), Ytest, ybar, ("Mag", "rMag"), pr=False)
    below = [t + 1 for t, c in enumerate(changes) if c < 1e-4]
    return {"ase": ev.ase, "success_mean": ev.success_mean, "changes": changes,
            "first_iteration_below_1e-4": below[0] if below else None, "config": asdict(lpcfg)}


def run_lp_baseline(cfg: ExperimentConfig) -> Path:
    stage = "validate"
    out = Path(cfg.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=out.parent))
    try:
        cfg = check_config(cfg)
        stage = "load"
        graph, labels = load_dataset(cfg)
        splits, tests = _splits(labels, cfg)
        stage = "propagate"
        for (p, s), seed_ids in splits.items():
            split = replace(labels, seed_ids=seed_ids, unlabeled_ids=tests[p])
            test = tests[p]
            rep = lp_report(graph, split, cfg.lp_config(), test, split.labels_of(test), average_seed_label(split))
            with open(tmp / f"lp_p{p}_s{s}.json", "w", encoding="utf-8") as fh:
                json.dump(rep, fh, indent=2, sort_keys=True)
        if out.exists():
            shutil.rmtree(out)
        tmp.rename(out)
        return out
    except Exception as exc:
        shutil.rmtree(tmp, ignore_errors=True)
        raise StageError(stage, exc) from exc
