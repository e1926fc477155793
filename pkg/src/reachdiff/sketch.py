"""Bottom-k all-distances sketches with conditional inclusion probabilities.

Node ``i``'s sketch ``S(i)`` holds every ``j`` in the base set ``U`` whose
rank is among the ``k`` smallest ranks of ``{h in U : h at least as strong
from i as j}``. Sketches are built by processing ``U`` in rank order and
running a pruned reverse search from each ``j``; a search stops expanding
at nodes whose sketch it did not modify.

Internally values are compared as keys where larger is stronger
(``t`` for reach, ``-d`` for distance) so one code path serves both modes.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .graph import Graph
from .schemes import DISTANCE, REACH, Draw


def to_key(value, mode):
    return value if mode == REACH else -value + 0.0


def from_key(key, mode):
    return key if mode == REACH else -key + 0.0


def make_permutation(U, rng_seed: int) -> dict:
    """Uniform ranks 1..|U| for the nodes of ``U``."""
    nodes = np.unique(np.asarray(list(U), dtype=np.int64))
    if nodes.size == 0:
        raise ValueError("cannot permute an empty base set")
    order = np.random.default_rng(rng_seed).permutation(nodes)
    return {int(v): r + 1 for r, v in enumerate(order)}


def permutation_order(U, rng_seed: int) -> np.ndarray:
    """Nodes of ``U`` listed by increasing rank (same permutation as :func:`make_permutation`)."""
    nodes = np.unique(np.asarray(list(U), dtype=np.int64))
    if nodes.size == 0:
        raise ValueError("cannot permute an empty base set")
    return np.random.default_rng(rng_seed).permutation(nodes)


@dataclass
class SketchEntry:
    member: int
    value: float
    pi_rank: int
    inclusion_prob: float = math.nan


@dataclass
class SketchState:
    """Incrementally maintained sketch of one node."""

    k: int
    mode: str = REACH
    entries: list = field(default_factory=list)
    heap: list = field(default_factory=list)  # (key, -rank, member); heap[0] is the weakest
    prevt: float = -math.inf  # key of the most recent eviction
    probs: dict = field(default_factory=dict)  # key -> inclusion probability
    last_rank: int = 0
    updates: int = 0  # count of modifying updates, i.e. |S(i) ∪ Z(i)|
    finalized: bool = False


def sketch_update(state: SketchState, j: int, value: float, pi_rank: int, U_size: int, k: int = None) -> bool:
    """Offer ``(j, value)`` to the sketch; returns whether the sketch was modified.

    Updates must arrive in strictly increasing rank order.
    """
    k = state.k if k is None else k
    if state.finalized:
        raise ValueError("sketch already finalized")
    if pi_rank <= state.last_rank:
        raise ValueError(f"rank {pi_rank} out of order (last {state.last_rank})")
    state.last_rank = pi_rank
    key = to_key(value, state.mode)
    u = (pi_rank - 1) / U_size
    if len(state.heap) < k:
        state.entries.append(SketchEntry(j, value, pi_rank))
        heapq.heappush(state.heap, (key, -pi_rank, j))
        state.updates += 1
        return True
    ykey = state.heap[0][0]
    if key > ykey:
        state.entries.append(SketchEntry(j, value, pi_rank))
        state.prevt = ykey
        state.probs.setdefault(ykey, u)
        heapq.heapreplace(state.heap, (key, -pi_rank, j))
        state.updates += 1
        return True
    if key == ykey and ykey > state.prevt:
        # j is a Z node: not sampled, but it fixes the probability at this threshold
        state.probs[key] = u
        state.prevt = ykey
        state.updates += 1
        return True
    return False


def sketch_finalize(state: SketchState) -> list:
    if state.finalized:
        raise ValueError("sketch already finalized")
    for key, _, _ in state.heap:
        state.probs.setdefault(key, 1.0)
    for entry in state.entries:
        entry.inclusion_prob = state.probs[to_key(entry.value, state.mode)]
    state.finalized = True
    return state.entries


@dataclass(frozen=True, eq=False)
class SketchSet:
    """Finalized sketches of all nodes in CSR layout (entries of node i at indptr[i]:indptr[i+1])."""

    mode: str
    k: int
    u_size: int
    perm_seed: int
    indptr: np.ndarray
    member: np.ndarray
    key: np.ndarray
    rank: np.ndarray
    prob: np.ndarray
    update_counts: np.ndarray = None
    traversals: int = 0

    @property
    def node_count(self):
        return len(self.indptr) - 1

    @property
    def value(self) -> np.ndarray:
        return from_key(self.key, self.mode)

    def entries(self, i: int) -> list:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return [SketchEntry(int(m), float(from_key(x, self.mode)), int(r), float(p))
                for m, x, r, p in zip(self.member[lo:hi], self.key[lo:hi], self.rank[lo:hi], self.prob[lo:hi])]

    def as_dict(self, i: int) -> dict:
        """member -> (value, prob) for node i."""
        return {e.member: (e.value, e.inclusion_prob) for e in self.entries(i)}

    def sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    def save(self, path):
        np.savez(path, header=np.array([self.k, self.u_size, self.perm_seed, self.traversals], dtype=np.int64),
                 mode=np.array(self.mode), indptr=self.indptr, member=self.member, key=self.key,
                 rank=self.rank, prob=self.prob, update_counts=self.update_counts)

    @classmethod
    def load(cls, path):
        with np.load(path) as z:
            k, u_size, perm_seed, trav = (int(x) for x in z["header"])
            return cls(str(z["mode"]), k, u_size, perm_seed, z["indptr"], z["member"], z["key"],
                       z["rank"], z["prob"], z["update_counts"], trav)


PRUNE_MODES = {"none": 0, "literal": 1, "guarded": 2}


def _sketch_all_python(graph, draw, order, k, prune):
    reach = draw.mode == REACH
    states = [SketchState(k, draw.mode) for _ in range(graph.node_count)]
    guard = [[] for _ in range(graph.node_count)]  # bottom-(k+1) keys, min-heap
    U_size = len(order)
    tail, ev, nv = graph.tail, draw.edge_value, draw.node_value
    traversals = 0
    for r, j in enumerate(order):
        j = int(j)
        start = math.inf if reach else 0.0
        best = {j: start}
        done = set()
        heap = [(-start, j)]
        while heap:
            nk, v = heapq.heappop(heap)
            key = -nk
            if v in done or key < best[v]:
                continue
            done.add(v)
            modified = sketch_update(states[v], j, from_key(key, draw.mode), r + 1, U_size, k)
            if prune == 2:
                if len(guard[v]) < k + 1:
                    heapq.heappush(guard[v], key)
                    modified = True
                elif key > guard[v][0]:
                    heapq.heapreplace(guard[v], key)
                    modified = True
            if not modified and prune and v != j:
                continue
            middle = v != j
            for e in graph.in_edges(v):
                traversals += 1
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
    counts = np.zeros(graph.node_count + 1, dtype=np.int64)
    member, keys, ranks, probs = [], [], [], []
    for i, st in enumerate(states):
        for e in sketch_finalize(st):
            member.append(e.member)
            keys.append(to_key(e.value, draw.mode))
            ranks.append(e.pi_rank)
            probs.append(e.inclusion_prob)
        counts[i + 1] = len(st.entries)
    updates = np.array([st.updates for st in states], dtype=np.int64)
    return (np.cumsum(counts), np.array(member, dtype=np.int64), np.array(keys, dtype=float),
            np.array(ranks, dtype=np.int64), np.array(probs, dtype=float), updates, traversals)


def sketch_all(graph: Graph, draw: Draw, U, k: int, perm_seed: int, engine: str = "compiled",
               prune: str = "guarded") -> SketchSet:
    """Sketch every node of ``graph`` against base set ``U`` under ``draw``.

    ``prune`` selects when a search stops expanding a node: ``"literal"``
    when its sketch was not modified, ``"guarded"`` (default) when in
    addition the update would not enter the node's bottom-(k+1) sketch,
    ``"none"`` never. Literal pruning can drop tie updates that set
    inclusion probabilities further upstream; guarded pruning cannot.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if prune not in PRUNE_MODES:
        raise ValueError(f"prune must be one of {sorted(PRUNE_MODES)}")
    if draw.mode == DISTANCE and ((draw.edge_value < 0).any() or (draw.node_value < 0).any()):
        raise ValueError("negative length in distance draw")
    order = permutation_order(U, perm_seed)
    if engine == "python":
        out = _sketch_all_python(graph, draw, order, k, PRUNE_MODES[prune])
    elif engine == "compiled":
        out = _kernels.build_sketches(graph.rev_indptr, graph.rev_edges, graph.tail,
                                      draw.edge_value, draw.node_value, draw.mode == REACH,
                                      order, len(order), int(k), graph.node_count, PRUNE_MODES[prune])
    else:
        raise ValueError(f"unknown engine {engine!r}")
    indptr, member, keys, ranks, probs, updates, trav = out
    return SketchSet(draw.mode, int(k), len(order), int(perm_seed), indptr, member, keys,
                     ranks, probs, updates, int(trav))


@dataclass
class NeighborhoodList:
    """Staircase of (threshold, cumulative sum of 1/p), strongest threshold first."""

    mode: str
    thresholds: np.ndarray
    estimates: np.ndarray

    def rows(self):
        return list(zip(self.thresholds.tolist(), self.estimates.tolist()))


def build_neighborhood_list(entries, mode: str = REACH) -> NeighborhoodList:
    """One row per distinct value, accumulating 1/p over entries at least that strong."""
    if isinstance(entries, SketchSet):
        raise TypeError("pass the entries of a single node")
    entries = list(entries)
    if any(not (0 < e.inclusion_prob <= 1) for e in entries):
        raise ValueError("sketch entries must be finalized")
    keys = np.array([to_key(e.value, mode) for e in entries], dtype=float)
    inv = np.array([1.0 / e.inclusion_prob for e in entries], dtype=float)
    order = np.argsort(-keys, kind="stable")
    keys, inv = keys[order], inv[order]
    cum = np.cumsum(inv)
    if len(keys):
        last = np.r_[keys[1:] != keys[:-1], True]
        keys, cum = keys[last], cum[last]
    return NeighborhoodList(mode, from_key(keys, mode), cum)


def estimate_reach_mass(nlist: NeighborhoodList, tau: float) -> float:
    """Estimated mass of nodes at least as strong as ``tau`` (t >= tau, or d <= tau)."""
    keys = to_key(nlist.thresholds, nlist.mode)
    q = to_key(tau, nlist.mode)
    # keys are decreasing; count the rows with key >= q
    idx = int(np.searchsorted(-keys, -q, side="right"))
    return float(nlist.estimates[idx - 1]) if idx else 0.0


@dataclass(frozen=True, eq=False)
class NeighborhoodLists:
    """All nodes' staircases in CSR layout, keys decreasing inside each node."""

    mode: str
    indptr: np.ndarray
    keys: np.ndarray
    cum: np.ndarray

    def query(self, nodes, values) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        qkeys = np.asarray(to_key(np.asarray(values, dtype=float), self.mode), dtype=float)
        return _kernels.query_lists(self.indptr, self.keys, self.cum, nodes, qkeys)

    def node_list(self, i) -> NeighborhoodList:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return NeighborhoodList(self.mode, from_key(self.keys[lo:hi], self.mode), self.cum[lo:hi])


def neighborhood_lists(sketches: SketchSet) -> NeighborhoodLists:
    n = sketches.node_count
    node = np.repeat(np.arange(n), np.diff(sketches.indptr))
    order = np.lexsort((-sketches.key, node))
    node, keys = node[order], sketches.key[order]
    cum_all = np.cumsum(1.0 / sketches.prob[order])
    # restart the running sum at each node
    start = sketches.indptr[:-1]
    offset = np.zeros(len(node))
    if len(node):
        before = np.where(start > 0, cum_all[np.maximum(start - 1, 0)], 0.0)
        offset = np.repeat(before, np.diff(sketches.indptr))
    cum = cum_all - offset
    keep = np.ones(len(node), dtype=bool)
    if len(node):
        keep[:-1] = (node[1:] != node[:-1]) | (keys[1:] != keys[:-1])
    node, keys, cum = node[keep], keys[keep], cum[keep]
    counts = np.bincount(node, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return NeighborhoodLists(sketches.mode, indptr, keys, cum)
