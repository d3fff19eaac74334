"""Empirical graphs, label sets, the two-cluster benchmark generator, and file I/O.

Nodes are numbered 1..N in the public API and in all file formats.  A graph
signal is a plain float ndarray of length N whose entry ``k`` holds the value
at node ``k + 1``; :func:`as_signal` validates that convention.

Graphs are immutable after construction and safe to share across threads.
Internally the adjacency is stored in a CSR-like layout over *directed slots*:
every undirected edge {i, j} occupies two slots, one per direction, and
``slot_rev`` maps each slot to its mirror.  Edge fields and the discrete
calculus operators are built on top of this layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class GraphFormatError(ValueError):
    """Raised when an edge-list or label file fails to parse or validate."""


class GenerationError(RuntimeError):
    """Raised when a generator config is infeasible (degree cap vs. connectivity)."""


class EmpiricalGraph:
    """Undirected weighted graph without self-loops.

    Parameters
    ----------
    node_count : int
        Number of nodes N >= 1.
    edges : iterable of (i, j, w)
        Undirected edges with 1-based endpoints i != j and weight w > 0.
        Each unordered pair may appear at most once.
    """

    __slots__ = ("node_count", "_eu", "_ev", "_ew", "_indptr", "_adj", "_adj_w",
                 "_adj_sqrt_w", "_slot_row", "_slot_rev", "_degrees")

    def __init__(self, node_count, edges):
        if not isinstance(node_count, (int, np.integer)) or node_count < 1:
            raise ValueError(f"node_count must be a positive integer, got {node_count!r}")
        self.node_count = int(node_count)

        seen = set()
        eu, ev, ew = [], [], []
        for i, j, w in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop ({i},{j}) rejected")
            if not (1 <= i <= node_count and 1 <= j <= node_count):
                raise ValueError(f"edge ({i},{j}) outside node range 1..{node_count}")
            w = float(w)
            if not (w > 0.0) or not math.isfinite(w):
                raise ValueError(f"edge ({i},{j}) has non-positive weight {w!r}")
            a, b = (i, j) if i < j else (j, i)
            if (a, b) in seen:
                raise ValueError(f"duplicate edge ({a},{b})")
            seen.add((a, b))
            eu.append(a)
            ev.append(b)
            ew.append(w)

        order = np.lexsort((np.asarray(ev, dtype=np.int64),
                            np.asarray(eu, dtype=np.int64))) if eu else np.array([], dtype=np.int64)
        self._eu = np.asarray(eu, dtype=np.int64)[order]
        self._ev = np.asarray(ev, dtype=np.int64)[order]
        self._ew = np.asarray(ew, dtype=np.float64)[order]

        # directed-slot layout: both orientations of every undirected edge
        n = self.node_count
        src = np.concatenate([self._eu, self._ev]) - 1
        dst = np.concatenate([self._ev, self._eu]) - 1
        w2 = np.concatenate([self._ew, self._ew])
        so = np.lexsort((dst, src))
        src, dst, w2 = src[so], dst[so], w2[so]
        self._slot_row = src
        self._adj = dst
        self._adj_w = w2
        self._adj_sqrt_w = np.sqrt(w2)
        self._indptr = np.searchsorted(src, np.arange(n + 1))
        key = src * n + dst
        self._slot_rev = np.searchsorted(key, dst * n + src)
        self._degrees = np.bincount(src, weights=w2, minlength=n)

        for a in (self._eu, self._ev, self._ew, self._slot_row, self._adj,
                  self._adj_w, self._adj_sqrt_w, self._indptr, self._slot_rev,
                  self._degrees):
            a.setflags(write=False)

    # -- public structure ---------------------------------------------------

    @property
    def edge_count(self):
        return len(self._eu)

    @property
    def slot_count(self):
        """Number of directed slots, 2 * edge_count."""
        return len(self._adj)

    def edges(self):
        """Yield (i, j, w) with 1-based i < j, sorted lexicographically."""
        for i, j, w in zip(self._eu, self._ev, self._ew):
            yield int(i), int(j), float(w)

    def neighbors(self, i):
        """Sorted 1-based neighbor ids and weights of node i."""
        self._check_node(i)
        lo, hi = self._indptr[i - 1], self._indptr[i]
        return self._adj[lo:hi] + 1, self._adj_w[lo:hi]

    def _check_node(self, i):
        if not (1 <= i <= self.node_count):
            raise IndexError(f"node index {i} out of range 1..{self.node_count}")

    # -- internal 0-based layout used by the calculus operators --------------

    @property
    def indptr(self):
        return self._indptr

    @property
    def slot_row(self):
        """0-based source node of each directed slot."""
        return self._slot_row

    @property
    def slot_col(self):
        """0-based target node of each directed slot."""
        return self._adj

    @property
    def slot_weight(self):
        return self._adj_w

    @property
    def slot_sqrt_weight(self):
        return self._adj_sqrt_w

    @property
    def slot_rev(self):
        """Slot index of the reversed orientation of each slot."""
        return self._slot_rev

    def __eq__(self, other):
        if not isinstance(other, EmpiricalGraph):
            return NotImplemented
        return (self.node_count == other.node_count
                and np.array_equal(self._eu, other._eu)
                and np.array_equal(self._ev, other._ev)
                and np.array_equal(self._ew, other._ew))

    def __repr__(self):
        return f"EmpiricalGraph(nodes={self.node_count}, edges={self.edge_count})"


def weighted_degree(g, i):
    """Sum of incident edge weights at node i (0 for isolated nodes)."""
    g._check_node(i)
    return float(g._degrees[i - 1])


def weighted_degrees(g):
    """Vector of weighted degrees, entry k for node k+1."""
    return g._degrees


def max_degree(g):
    """Largest weighted degree over all nodes; 0 for an edgeless graph."""
    return float(g._degrees.max()) if g.node_count else 0.0


def combinatorial_degrees(g):
    """Neighbor counts per node (unweighted degrees)."""
    return np.diff(g.indptr)


def is_connected(g):
    """True iff a single undirected component spans all nodes."""
    n = g.node_count
    if n == 1:
        return True
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = [0]
    indptr, adj = g.indptr, g.slot_col
    while frontier:
        nxt = []
        for a in frontier:
            for b in adj[indptr[a]:indptr[a + 1]]:
                if not seen[b]:
                    seen[b] = True
                    nxt.append(b)
        frontier = nxt
    return bool(seen.all())


def diameter(g):
    """Exact combinatorial diameter (hop count) via BFS from every node.

    Raises ValueError on disconnected graphs.
    """
    n = g.node_count
    indptr, adj = g.indptr, g.slot_col
    best = 0
    for s in range(n):
        dist = np.full(n, -1, dtype=np.int64)
        dist[s] = 0
        frontier = [s]
        while frontier:
            nxt = []
            for a in frontier:
                for b in adj[indptr[a]:indptr[a + 1]]:
                    if dist[b] < 0:
                        dist[b] = dist[a] + 1
                        nxt.append(b)
            frontier = nxt
        if (dist < 0).any():
            raise ValueError("diameter is undefined: graph is disconnected")
        best = max(best, int(dist.max()))
    return best


def as_signal(g, x):
    """Validate and return ``x`` as a float64 graph signal of length N."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (g.node_count,):
        raise ValueError(f"signal length {x.shape} does not match node count {g.node_count}")
    if not np.isfinite(x).all():
        raise ValueError("signal contains non-finite entries")
    return x


@dataclass(frozen=True)
class LabelSet:
    """Sampled nodes S (1-based, sorted) with their initial values y_i."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if nodes.ndim != 1 or nodes.shape != values.shape:
            raise ValueError("nodes and values must be 1-d arrays of equal length")
        if len(nodes) < 1:
            raise ValueError("a label set needs at least one sampled node")
        if (nodes < 1).any():
            raise ValueError("node indices must be >= 1")
        if len(np.unique(nodes)) != len(nodes):
            raise ValueError("duplicate sampled nodes")
        if not np.isfinite(values).all():
            raise ValueError("label values must be finite")
        order = np.argsort(nodes)
        object.__setattr__(self, "nodes", nodes[order])
        object.__setattr__(self, "values", values[order])
        self.nodes.setflags(write=False)
        self.values.setflags(write=False)

    @property
    def size(self):
        """M, the number of sampled nodes."""
        return len(self.nodes)

    @property
    def indices0(self):
        """0-based positions of the sampled nodes in a signal array."""
        return self.nodes - 1

    def validate_for(self, g):
        if self.nodes[-1] > g.node_count:
            raise ValueError(f"sampled node {self.nodes[-1]} exceeds node count {g.node_count}")

    def mask(self, n):
        m = np.zeros(n, dtype=bool)
        m[self.indices0] = True
        return m

    def full_vector(self, n, fill=0.0):
        """Length-n vector with y_i at sampled positions and ``fill`` elsewhere."""
        v = np.full(n, fill, dtype=np.float64)
        v[self.indices0] = self.values
        return v


@dataclass(frozen=True)
class TwoClusterConfig:
    """Config for the clustered synthetic benchmark.

    Each cluster gets a random spanning tree plus uniformly random extra
    edges, all under ``degree_cap``; consecutive clusters are then joined by
    ``gate_edges`` random inter-cluster edges.  The ground truth assigns one
    N(0,1) draw per cluster to all of its nodes, and ``label_fraction`` of
    each cluster is sampled (without replacement) as the labeled set.
    """

    cluster_size: int = 100
    clusters: int = 2
    degree_cap: int = 8
    gate_edges: int = 2
    label_fraction: float = 0.1
    weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.cluster_size < 1:
            raise ValueError("cluster_size must be positive")
        if self.clusters < 1:
            raise ValueError("clusters must be positive")
        if self.degree_cap < 2:
            raise ValueError("degree_cap must be >= 2")
        if self.gate_edges < 1:
            raise ValueError("gate_edges must be >= 1")
        if not (0.0 < self.label_fraction <= 1.0):
            raise ValueError("label_fraction must be in (0, 1]")
        if not (self.weight > 0.0):
            raise ValueError("weight must be positive")

    def to_json_dict(self):
        return {k: getattr(self, k) for k in
                ("cluster_size", "clusters", "degree_cap", "gate_edges",
                 "label_fraction", "weight", "seed")}

    @classmethod
    def from_json_dict(cls, d):
        return cls(**d)


def generate_two_cluster(cfg):
    """Generate the clustered benchmark instance.

    Returns
    -------
    graph : EmpiricalGraph
    ground_truth : ndarray
        Signal with the per-cluster value at every node.
    labels : LabelSet
        ceil(label_fraction * cluster_size) sampled nodes per cluster with
        y_i equal to the ground truth.

    Deterministic for a fixed config (including the seed).
    """
    rng = np.random.default_rng(cfg.seed)
    size, k = cfg.cluster_size, cfg.clusters
    n = size * k
    deg = np.zeros(n, dtype=np.int64)
    edge_set = set()

    def try_add(a, b):
        if a == b:
            return False
        e = (a, b) if a < b else (b, a)
        if e in edge_set or deg[a] >= cfg.degree_cap or deg[b] >= cfg.degree_cap:
            return False
        edge_set.add(e)
        deg[a] += 1
        deg[b] += 1
        return True

    for c in range(k):
        base = c * size
        order = rng.permutation(size) + base
        for t in range(1, size):
            candidates = [order[s] for s in range(t) if deg[order[s]] < cfg.degree_cap]
            if not candidates:
                raise GenerationError(
                    f"degree_cap={cfg.degree_cap} leaves no attachment point while "
                    f"building the spanning tree of cluster {c + 1}")
            if not try_add(int(order[t]), int(candidates[rng.integers(len(candidates))])):
                raise GenerationError("spanning-tree edge rejected unexpectedly")
        # best-effort densification: up to `size` extra edges under the cap
        added, attempts = 0, 0
        while added < size and attempts < 50 * size:
            a, b = rng.integers(size, size=2) + base
            if try_add(int(a), int(b)):
                added += 1
            attempts += 1

    for c in range(k - 1):
        added, attempts = 0, 0
        while added < cfg.gate_edges and attempts < 1000 * cfg.gate_edges:
            a = int(rng.integers(size)) + c * size
            b = int(rng.integers(size)) + (c + 1) * size
            if try_add(a, b):
                added += 1
            attempts += 1
        if added < cfg.gate_edges:
            raise GenerationError(
                f"could not place {cfg.gate_edges} gate edges between clusters "
                f"{c + 1} and {c + 2} under degree_cap={cfg.degree_cap}")

    edges = [(a + 1, b + 1, cfg.weight) for a, b in sorted(edge_set)]
    g = EmpiricalGraph(n, edges)

    cluster_values = rng.standard_normal(k)
    ground_truth = np.repeat(cluster_values, size)

    m_per = int(math.ceil(cfg.label_fraction * size))
    sampled0 = np.concatenate([
        rng.choice(size, size=m_per, replace=False) + c * size for c in range(k)
    ])
    sampled0.sort()
    labels = LabelSet(nodes=sampled0 + 1, values=ground_truth[sampled0])
    return g, ground_truth, labels


# -- file formats -----------------------------------------------------------
#
# Edge list: UTF-8 text, header "#nodes N", then one edge per line
# "i<TAB>j<TAB>w" with 1-based i < j and %.17g weights (bit-exact round trip).
# Labels / signals: CSV with header "node,value".

def edge_list_to_text(g):
    lines = [f"#nodes {g.node_count}"]
    lines.extend(f"{i}\t{j}\t{w:.17g}" for i, j, w in g.edges())
    return "\n".join(lines) + "\n"


def parse_edge_list(text, source="<edge list>"):
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#nodes"):
        raise GraphFormatError(f"{source}: missing '#nodes N' header line")
    header = lines[0].split()
    if len(header) != 2:
        raise GraphFormatError(f"{source}:1: malformed header {lines[0]!r}")
    try:
        n = int(header[1])
    except ValueError:
        raise GraphFormatError(f"{source}:1: node count {header[1]!r} is not an integer") from None
    edges = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise GraphFormatError(f"{source}:{ln}: expected 'i<TAB>j<TAB>w', got {line!r}")
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise GraphFormatError(f"{source}:{ln}: could not parse {line!r}") from None
        if i >= j:
            raise GraphFormatError(
                f"{source}:{ln}: edges must satisfy i < j "
                f"({'self-loop' if i == j else 'unordered pair'} {i},{j})")
        edges.append((i, j, w))
    try:
        return EmpiricalGraph(n, edges)
    except ValueError as exc:
        raise GraphFormatError(f"{source}: {exc}") from None


def save_edge_list(path, g):
    with open(path, "w", encoding="utf-8") as f:
        f.write(edge_list_to_text(g))


def load_edge_list(path):
    with open(path, "r", encoding="utf-8") as f:
        return parse_edge_list(f.read(), source=str(path))


def save_labels_csv(path, nodes, values):
    nodes = np.asarray(nodes, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as f:
        f.write("node,value\n")
        for i, v in zip(nodes, values):
            f.write(f"{i},{v:.17g}\n")


def load_labels_csv(path):
    """Parse a node,value CSV; returns (nodes, values) arrays."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0].strip() != "node,value":
        raise GraphFormatError(f"{path}: missing 'node,value' header")
    nodes, values = [], []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise GraphFormatError(f"{path}:{ln}: expected 'node,value', got {line!r}")
        try:
            nodes.append(int(parts[0]))
            values.append(float(parts[1]))
        except ValueError:
            raise GraphFormatError(f"{path}:{ln}: could not parse {line!r}") from None
    return np.asarray(nodes, dtype=np.int64), np.asarray(values, dtype=np.float64)


def load_label_set(path):
    nodes, values = load_labels_csv(path)
    return LabelSet(nodes=nodes, values=values)


def save_signal_csv(path, x):
    """Write a full labeling (all nodes) in the node,value CSV format."""
    save_labels_csv(path, np.arange(1, len(x) + 1), x)


def load_signal_csv(path, node_count):
    """Read a full labeling; every node 1..node_count must be present once."""
    nodes, values = load_labels_csv(path)
    if len(nodes) != node_count or not np.array_equal(np.sort(nodes),
                                                      np.arange(1, node_count + 1)):
        raise GraphFormatError(f"{path}: expected exactly one value for each of "
                               f"the {node_count} nodes")
    out = np.empty(node_count, dtype=np.float64)
    out[nodes - 1] = values
    return out
