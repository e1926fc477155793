"""Lifetime (reach) and length (distance) schemes and per-simulation draws.

``Exp[z]`` always means the exponential distribution with *rate* ``z``
(mean ``1/z``). A Weibull component uses scale ``1/z`` so that shape 1
coincides with ``Exp[z]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph, NodeKind

REACH = "reach"
DISTANCE = "distance"

G_FUNCTIONS = {
    "1": lambda x: np.ones_like(x),
    "1/x": lambda x: 1.0 / x,
    "1/sqrt": lambda x: 1.0 / np.sqrt(x),
    "1/log2": lambda x: 1.0 / np.log2(1.0 + x),
    "log2": lambda x: np.log2(1.0 + x),
    "sqrt": np.sqrt,
    "x": lambda x: x,
}
G_ALIASES = {
    "1/x^0.5": "1/sqrt", "1/sqrt(x)": "1/sqrt", "1/log2(1+x)": "1/log2",
    "log2(1+x)": "log2", "sqrt(x)": "sqrt", "x^0.5": "sqrt",
}
FAMILIES = ("exp", "weibull", "fixed", "expind")


def g_function(name: str):
    name = G_ALIASES.get(name, name)
    if name not in G_FUNCTIONS:
        raise ValueError(f"unknown degree function {name!r}; supported: {', '.join(G_FUNCTIONS)}")
    return G_FUNCTIONS[name]


@dataclass(frozen=True)
class Scheme:
    mode: str
    family: str
    g: str = "1"
    delta: float = 0.0
    beta: float = 1.0
    node_passthrough: bool = True
    independent_reverse: bool = False

    def __post_init__(self):
        if self.mode not in (REACH, DISTANCE):
            raise ValueError(f"mode must be reach or distance, got {self.mode!r}")
        if self.family not in ("exp", "weibull", "fixed"):
            raise ValueError(f"unknown family {self.family!r}")
        object.__setattr__(self, "g", G_ALIASES.get(self.g, self.g))
        g_function(self.g)
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.mode == REACH and self.delta > 0:
            raise ValueError("reach schemes take no delta offset")
        if self.mode == REACH and self.independent_reverse:
            raise ValueError("expind is a distance scheme")
        if self.family == "exp" and self.beta != 1.0:
            raise ValueError("exp family has beta=1; use weibull")

    @property
    def randomized(self) -> bool:
        return self.family != "fixed"

    def __str__(self):
        prefix = "dist" if self.mode == DISTANCE else "reach"
        family = "expind" if self.independent_reverse else self.family
        parts = [f"g={self.g}"]
        if self.mode == DISTANCE and (self.family != "fixed" or self.delta):
            parts.append(f"delta={self.delta:g}")
        if self.family == "weibull":
            parts.append(f"beta={self.beta:g}")
        if not self.node_passthrough:
            parts.append("pass=0")
        return f"{prefix}-{family}:{','.join(parts)}"


def parse_scheme(text: str) -> Scheme:
    """Parse names like ``dist-exp:g=1/x,delta=50`` or ``reach-exp:g=x``."""
    text = text.strip()
    head, _, tail = text.partition(":")
    mode_tok, _, family = head.partition("-")
    modes = {"dist": DISTANCE, "distance": DISTANCE, "reach": REACH}
    if mode_tok not in modes or family not in FAMILIES:
        raise ValueError(
            f"unknown scheme {text!r}; supported: "
            + ", ".join(f"{m}-{f}" for m in ("dist", "reach") for f in FAMILIES))
    opts = {}
    for item in filter(None, (s.strip() for s in tail.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"bad scheme option {item!r} in {text!r}")
        opts[key.strip()] = val.strip()
    unknown = set(opts) - {"g", "delta", "beta", "pass"}
    if unknown:
        raise ValueError(f"unknown scheme options {sorted(unknown)} in {text!r}")
    return Scheme(
        mode=modes[mode_tok],
        family="exp" if family == "expind" else family,
        g=opts.get("g", "1"),
        delta=float(opts.get("delta", 0.0)),
        beta=float(opts.get("beta", 1.0)),
        node_passthrough=opts.get("pass", "1") not in ("0", "false", "no"),
        independent_reverse=family == "expind",
    )


def sample_exponential(rate, rng, size=None):
    rate = np.asarray(rate, dtype=float)
    if np.any(rate <= 0) or np.any(~np.isfinite(rate)):
        raise ValueError("exponential rate must be positive and finite")
    return rng.standard_exponential(size) / rate


def sample_weibull(shape, scale, rng, size=None):
    if np.any(np.asarray(shape) <= 0) or np.any(np.asarray(scale) <= 0):
        raise ValueError("weibull shape and scale must be positive")
    return scale * rng.standard_exponential(size) ** (1.0 / np.asarray(shape, dtype=float))


@dataclass(frozen=True, eq=False)
class Draw:
    """One Monte Carlo realization: a value per edge and a pass-through per node.

    Pass-through values apply only when the node is a middle node of a path.
    Reach mode uses ``+inf`` for "never fails"; distance mode uses 0 for "free".
    """

    mode: str
    edge_value: np.ndarray
    node_value: np.ndarray
    rng_seed: int


def _component_stream(sim_seed: int, count: int) -> np.ndarray:
    # component c always receives the c-th variate of the stream
    rng = np.random.default_rng(np.random.SeedSequence([int(sim_seed), 0x6C696665]))
    return rng.standard_exponential(count)


def _randomize(base, rate, scheme):
    if scheme.family == "weibull":
        return base ** (1.0 / scheme.beta) / rate
    return base / rate


def draw_simulation(graph: Graph, scheme: Scheme, sim_seed: int) -> Draw:
    E, n = graph.num_edges, graph.node_count
    deg = graph.out_degree.astype(float)
    g = g_function(scheme.g)
    tail_rate = g(deg[graph.tail]) if E else np.zeros(0)
    reach = scheme.mode == REACH
    idle = np.inf if reach else 0.0

    if scheme.family == "fixed":
        edge = np.array(tail_rate, dtype=float) + (0.0 if reach else scheme.delta)
        node = np.full(n, idle)
        return Draw(scheme.mode, edge, node, int(sim_seed))

    base = _component_stream(sim_seed, E + n)
    edge_base, node_base = base[:E], base[E:]
    node = np.full(n, idle)

    if not graph.is_bipartite_movielens:
        edge = _randomize(edge_base, tail_rate, scheme)
        if not reach:
            edge = edge + scheme.delta
        return Draw(scheme.mode, edge, node, int(sim_seed))

    kind = graph.node_kind
    from_user = kind[graph.tail] == NodeKind.USER
    from_movie = ~from_user
    movies = np.flatnonzero(kind == NodeKind.MOVIE)
    with np.errstate(divide="ignore"):
        movie_rate = g(deg[movies])
    edge = np.empty(E)
    edge[from_user] = _randomize(edge_base[from_user], tail_rate[from_user], scheme)
    if scheme.independent_reverse:
        edge[from_movie] = _randomize(edge_base[from_movie], tail_rate[from_movie], scheme) + scheme.delta
    else:
        edge[from_movie] = np.inf if reach else 0.0
        if scheme.node_passthrough:
            node[movies] = _randomize(node_base[movies], movie_rate, scheme)
            if not reach:
                node[movies] += scheme.delta
    return Draw(scheme.mode, edge, node, int(sim_seed))


def closure_min_scale(scale: float, shape: float, count: int) -> float:
    """Scale of the minimum of ``count`` iid Weibull(shape, scale) variables."""
    return scale * count ** (-1.0 / shape)


def weibull_mean(shape: float, scale: float) -> float:
    return scale * math.gamma(1.0 + 1.0 / shape)
