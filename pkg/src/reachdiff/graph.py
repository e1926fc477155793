"""Directed graph container, dataset loaders and seed-set handling."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

MOVIELENS_GENRES = (
    "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "Musical",
    "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
)


class FormatError(ValueError):
    """Malformed input file; message carries the path and line number."""


class NodeKind(enum.IntEnum):
    GENERIC = 0
    MOVIE = 1
    USER = 2


class Direction(str, enum.Enum):
    FORWARD = "forward"
    REVERSED = "reversed"
    UNDIRECTED = "undirected"


def _csr(keys: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    # stable sort keeps edge ids ascending inside each row
    order = np.argsort(keys, kind="stable").astype(np.int64)
    counts = np.bincount(keys, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, order


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable directed multigraph in CSR form.

    Edge ``e`` goes ``tail[e] -> head[e]``. ``fwd_edges[fwd_indptr[v]:fwd_indptr[v+1]]``
    lists the out-edges of ``v``; ``rev_*`` lists the in-edges (the transposed
    adjacency). Nodes and edges share one component id space: edge ``e`` is
    component ``e`` and node ``v`` is component ``num_edges + v``.
    """

    node_count: int
    tail: np.ndarray
    head: np.ndarray
    node_mass: np.ndarray
    node_kind: np.ndarray
    names: list = field(default_factory=list)
    fwd_indptr: np.ndarray = None
    fwd_edges: np.ndarray = None
    rev_indptr: np.ndarray = None
    rev_edges: np.ndarray = None

    @classmethod
    def from_edges(cls, node_count, tails, heads, node_mass=None, node_kind=None, names=None):
        tail = np.asarray(tails, dtype=np.int64).reshape(-1)
        head = np.asarray(heads, dtype=np.int64).reshape(-1)
        if tail.shape != head.shape:
            raise ValueError("tails and heads differ in length")
        if len(tail) and (min(tail.min(), head.min()) < 0 or max(tail.max(), head.max()) >= node_count):
            raise ValueError("edge endpoint out of range")
        if node_mass is None:
            node_mass = np.ones(node_count, dtype=np.int8)
        node_mass = np.asarray(node_mass, dtype=np.int8)
        if not np.isin(node_mass, (0, 1)).all():
            raise ValueError("node mass must be 0 or 1")
        if node_kind is None:
            node_kind = np.full(node_count, NodeKind.GENERIC, dtype=np.int8)
        node_kind = np.asarray(node_kind, dtype=np.int8)
        if names is None:
            names = list(range(node_count))
        fwd_indptr, fwd_edges = _csr(tail, node_count)
        rev_indptr, rev_edges = _csr(head, node_count)
        return cls(node_count, tail, head, node_mass, node_kind, list(names),
                   fwd_indptr, fwd_edges, rev_indptr, rev_edges)

    @property
    def num_edges(self) -> int:
        return len(self.tail)

    @property
    def num_components(self) -> int:
        return self.num_edges + self.node_count

    @property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.fwd_indptr)

    @property
    def in_degree(self) -> np.ndarray:
        return np.diff(self.rev_indptr)

    @property
    def is_bipartite_movielens(self) -> bool:
        return bool(np.any(self.node_kind == NodeKind.MOVIE))

    def out_edges(self, v: int) -> np.ndarray:
        return self.fwd_edges[self.fwd_indptr[v]:self.fwd_indptr[v + 1]]

    def in_edges(self, v: int) -> np.ndarray:
        return self.rev_edges[self.rev_indptr[v]:self.rev_indptr[v + 1]]

    def transpose(self) -> "Graph":
        """Same edge ids with endpoints swapped."""
        return Graph.from_edges(self.node_count, self.head, self.tail,
                                self.node_mass, self.node_kind, self.names)

    def edge_set(self) -> list:
        return sorted(zip(self.tail.tolist(), self.head.tolist()))

    def node_index(self) -> dict:
        return {name: i for i, name in enumerate(self.names)}


@dataclass(frozen=True, eq=False)
class LabelSet:
    """Ground-truth labels plus the current seed / test split.

    ``true_labels[r]`` is the label of node ``labeled_ids[r]``.
    """

    num_classes: int
    labeled_ids: np.ndarray
    true_labels: np.ndarray
    seed_ids: np.ndarray
    unlabeled_ids: np.ndarray
    class_names: tuple = ()

    def __post_init__(self):
        y = self.true_labels
        if len(y):
            if (y < 0).any() or not np.allclose(y.sum(axis=1), 1.0, atol=1e-9, rtol=0):
                raise ValueError("true labels must be probability vectors")
        if np.intersect1d(self.seed_ids, self.unlabeled_ids).size:
            raise ValueError("seed and unlabeled ids overlap")

    def label_matrix(self, node_count: int) -> np.ndarray:
        Y = np.zeros((node_count, self.num_classes))
        Y[self.labeled_ids] = self.true_labels
        return Y

    def labels_of(self, ids) -> np.ndarray:
        row = {int(v): r for r, v in enumerate(self.labeled_ids)}
        return self.true_labels[[row[int(v)] for v in ids]].reshape(-1, self.num_classes)

    @property
    def seed_labels(self) -> np.ndarray:
        return self.labels_of(self.seed_ids)


def _read_lines(path):
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        # the MovieLens 1M distribution carries latin-1 titles
        text = raw.decode("latin-1")
    return text.splitlines()


def load_movielens(ratings_path, movies_path):
    """Bipartite movie/user graph with one edge each way per rating.

    Movies that have both ratings and genres get a label with weight ``1/c``
    on each of their ``c`` genres. Rated movies without genres stay in the
    graph with mass 1 but are not labeled. Users have mass 0.
    """
    users, movies = [], []
    for lineno, line in enumerate(_read_lines(ratings_path), 1):
        if not line.strip():
            continue
        parts = line.split("::")
        if len(parts) != 4:
            raise FormatError(f"{ratings_path}:{lineno}: expected UserID::MovieID::Rating::Timestamp")
        try:
            users.append(int(parts[0]))
            movies.append(int(parts[1]))
        except ValueError:
            raise FormatError(f"{ratings_path}:{lineno}: non-integer id") from None

    genre_index = {g: c for c, g in enumerate(MOVIELENS_GENRES)}
    genres = {}
    for lineno, line in enumerate(_read_lines(movies_path), 1):
        if not line.strip():
            continue
        parts = line.split("::")
        if len(parts) != 3:
            raise FormatError(f"{movies_path}:{lineno}: expected MovieID::Title::Genres")
        try:
            mid = int(parts[0])
        except ValueError:
            raise FormatError(f"{movies_path}:{lineno}: non-integer movie id") from None
        tokens = [t for t in parts[2].strip().split("|") if t]
        for t in tokens:
            if t not in genre_index:
                raise FormatError(f"{movies_path}:{lineno}: unknown genre {t!r}")
        genres[mid] = sorted({genre_index[t] for t in tokens})

    movie_ids = sorted(set(movies))
    user_ids = sorted(set(users))
    n_movies = len(movie_ids)
    movie_node = {m: i for i, m in enumerate(movie_ids)}
    user_node = {u: n_movies + i for i, u in enumerate(user_ids)}
    n = n_movies + len(user_ids)

    m_nodes = np.fromiter((movie_node[m] for m in movies), dtype=np.int64, count=len(movies))
    u_nodes = np.fromiter((user_node[u] for u in users), dtype=np.int64, count=len(users))
    # edge 2r is movie->user, 2r+1 is user->movie for rating r
    tails = np.empty(2 * len(movies), dtype=np.int64)
    heads = np.empty_like(tails)
    tails[0::2], heads[0::2] = m_nodes, u_nodes
    tails[1::2], heads[1::2] = u_nodes, m_nodes

    kind = np.full(n, NodeKind.USER, dtype=np.int8)
    kind[:n_movies] = NodeKind.MOVIE
    mass = np.zeros(n, dtype=np.int8)
    mass[:n_movies] = 1
    names = [f"m{m}" for m in movie_ids] + [f"u{u}" for u in user_ids]
    graph = Graph.from_edges(n, tails, heads, mass, kind, names)

    L = len(MOVIELENS_GENRES)
    labeled = [movie_node[m] for m in movie_ids if genres.get(m)]
    Y = np.zeros((len(labeled), L))
    for r, m in enumerate(m for m in movie_ids if genres.get(m)):
        g = genres[m]
        Y[r, g] = 1.0 / len(g)
    labeled = np.asarray(labeled, dtype=np.int64)
    labels = LabelSet(L, labeled, Y, np.empty(0, np.int64), labeled.copy(), MOVIELENS_GENRES)
    return graph, labels


def load_edge_list(path, labels_path, direction=Direction.FORWARD):
    """Whitespace edge list ``src dst`` plus a ``node class`` label file.

    Self loops and duplicate links are kept. Every node has mass 1.
    """
    direction = Direction(direction)
    index, names = {}, []

    def node(tok):
        if tok not in index:
            index[tok] = len(names)
            names.append(tok)
        return index[tok]

    src, dst = [], []
    for lineno, line in enumerate(_read_lines(path), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2:
            raise FormatError(f"{path}:{lineno}: expected 'src dst'")
        src.append(node(parts[0]))
        dst.append(node(parts[1]))

    lab_nodes, lab_class = [], []
    for lineno, line in enumerate(_read_lines(labels_path), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{labels_path}:{lineno}: expected 'node class'")
        try:
            c = int(parts[1])
        except ValueError:
            raise FormatError(f"{labels_path}:{lineno}: class must be an integer") from None
        if c < 0:
            raise FormatError(f"{labels_path}:{lineno}: negative class index")
        lab_nodes.append(node(parts[0]))
        lab_class.append(c)

    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if direction is Direction.FORWARD:
        tails, heads = src, dst
    elif direction is Direction.REVERSED:
        tails, heads = dst, src
    else:
        tails = np.empty(2 * len(src), dtype=np.int64)
        heads = np.empty_like(tails)
        tails[0::2], heads[0::2] = src, dst
        tails[1::2], heads[1::2] = dst, src
    graph = Graph.from_edges(len(names), tails, heads, names=names)

    L = max(lab_class, default=-1) + 1
    order = np.argsort(lab_nodes, kind="stable")
    labeled = np.asarray(lab_nodes, dtype=np.int64)[order]
    if len(np.unique(labeled)) != len(labeled):
        raise FormatError(f"{labels_path}: node labeled twice")
    Y = np.zeros((len(labeled), L))
    Y[np.arange(len(labeled)), np.asarray(lab_class, dtype=np.int64)[order]] = 1.0
    labels = LabelSet(L, labeled, Y, np.empty(0, np.int64), labeled.copy(),
                      tuple(str(c) for c in range(L)))
    return graph, labels


def seed_permutation(label_set: LabelSet, permutation_seed: int) -> np.ndarray:
    """Uniform ordering of the labeled nodes; seed sets are its prefixes."""
    rng = np.random.default_rng(permutation_seed)
    return rng.permutation(np.sort(label_set.labeled_ids))


def take_seed_prefix(label_set: LabelSet, permutation_seed: int, s: int) -> LabelSet:
    n = len(label_set.labeled_ids)
    if s < 0 or s > n:
        raise ValueError(f"seed size {s} outside [0, {n}]")
    perm = seed_permutation(label_set, permutation_seed)
    return replace(label_set, seed_ids=perm[:s].copy(), unlabeled_ids=perm[s:].copy())
