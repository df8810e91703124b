"""Graphs, arrival streams, generators, local cycle detection and stream I/O."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, TextIO

import networkx as nx
import numpy as np

from ._accel import kernel

GENERATOR_KINDS = (
    "random-regular",
    "random-tree",
    "complete-d-ary-tree",
    "path",
    "star",
    "erdos-renyi",
)
ORDER_MODES = ("as-generated", "uniformly-random")


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph on vertices ``0..n-1`` with a declared max degree.

    ``edges`` is an ``(m, 2)`` int64 array; row ``i`` is edge index ``i``.
    """

    n: int
    edges: np.ndarray
    delta: int
    allow_parallel: bool = False

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", edges)
        edges.setflags(write=False)
        if self.n < 0:
            raise ValueError("vertex count must be non-negative")
        if self.delta < 1:
            raise ValueError("declared max degree must be >= 1")
        if len(edges):
            if edges.min() < 0 or edges.max() >= self.n:
                raise ValueError("edge endpoint out of range 0..n-1")
            if np.any(edges[:, 0] == edges[:, 1]):
                bad = int(np.flatnonzero(edges[:, 0] == edges[:, 1])[0])
                raise ValueError(f"self-loop at edge {bad}")
            if not self.allow_parallel:
                lo = np.minimum(edges[:, 0], edges[:, 1])
                hi = np.maximum(edges[:, 0], edges[:, 1])
                keys = lo * self.n + hi
                if len(np.unique(keys)) != len(keys):
                    raise ValueError("parallel edges are not allowed")
        deg = self.degrees
        if len(deg) and deg.max() > self.delta:
            v = int(np.argmax(deg))
            raise ValueError(
                f"vertex {v} has degree {int(deg[v])} > declared delta {self.delta}"
            )

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n).astype(np.int64)

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR adjacency ``(indptr, neighbor, edge_id)``."""
        m = self.m
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        eid = np.concatenate([np.arange(m), np.arange(m)])
        order = np.argsort(src, kind="stable")
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.n), out=indptr[1:])
        return indptr, dst[order].astype(np.int64), eid[order].astype(np.int64)

    def edge_index(self, u: int, v: int) -> int:
        indptr, nbr, eid = self.adjacency
        for k in range(indptr[u], indptr[u + 1]):
            if nbr[k] == v:
                return int(eid[k])
        raise KeyError(f"edge ({u}, {v}) not in graph")

    def resolve_edge(self, e) -> int:
        """Accept an edge index or a ``(u, v)`` pair; return the edge index."""
        if isinstance(e, (tuple, list)):
            return self.edge_index(int(e[0]), int(e[1]))
        e = int(e)
        if not 0 <= e < self.m:
            raise KeyError(f"edge index {e} not in graph")
        return e

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(map(tuple, self.edges.tolist()))
        return g


@dataclass(frozen=True, eq=False)
class EdgeStream:
    """A graph plus an arrival order (a permutation of its edge indices)."""

    graph: Graph
    order: np.ndarray = field(default=None)

    def __post_init__(self):
        m = self.graph.m
        order = np.arange(m) if self.order is None else np.asarray(self.order)
        order = order.astype(np.int64)
        if order.shape != (m,) or not np.array_equal(np.sort(order), np.arange(m)):
            raise ValueError("arrival order must be a permutation of 0..m-1")
        order.setflags(write=False)
        object.__setattr__(self, "order", order)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def m(self) -> int:
        return self.graph.m

    @property
    def delta(self) -> int:
        return self.graph.delta

    @cached_property
    def rank(self) -> np.ndarray:
        """Arrival position of every edge index."""
        r = np.empty(self.m, dtype=np.int64)
        r[self.order] = np.arange(self.m)
        return r

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(us, vs, ids)`` in arrival order; ``ids`` address the randomness."""
        e = self.graph.edges[self.order]
        return (np.ascontiguousarray(e[:, 0]), np.ascontiguousarray(e[:, 1]),
                np.ascontiguousarray(self.order))

    def with_order(self, order) -> "EdgeStream":
        return EdgeStream(self.graph, order)


# --------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    n: int = 0
    d: int | None = None
    depth: int | None = None
    p: float | None = None
    max_degree: int | None = None
    order: str = "as-generated"

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}; expected one of {GENERATOR_KINDS}")
        if self.order not in ORDER_MODES:
            raise ValueError(f"unknown order mode {self.order!r}; expected one of {ORDER_MODES}")


def _random_regular(n, d, rng):
    if d is None:
        raise ValueError("random-regular needs d")
    if (n * d) % 2:
        raise ValueError(f"random-regular infeasible: n*d = {n}*{d} is odd")
    if not 0 < d < n:
        raise ValueError(f"random-regular infeasible: need 0 < d < n, got d={d}, n={n}")
    g = nx.random_regular_graph(d, n, seed=int(rng.integers(2**31)))
    return np.array(sorted(tuple(sorted(e)) for e in g.edges()), dtype=np.int64).reshape(-1, 2), d


def _random_tree(n, cap, rng):
    # random recursive tree; each new vertex attaches to a uniform earlier
    # vertex that still has spare degree
    if n < 2:
        raise ValueError("random-tree needs n >= 2")
    if cap is not None and cap < 2 and n > 2:
        raise ValueError("random-tree with max_degree < 2 is infeasible for n > 2")
    edges = np.empty((n - 1, 2), dtype=np.int64)
    deg = np.zeros(n, dtype=np.int64)
    avail = [0]
    for i in range(1, n):
        k = int(rng.integers(len(avail)))
        p = avail[k]
        edges[i - 1] = (p, i)
        deg[p] += 1
        deg[i] += 1
        if cap is not None and deg[p] >= cap:
            avail[k] = avail[-1]
            avail.pop()
        avail.append(i)
    delta = cap if cap is not None else int(deg.max())
    return edges, max(delta, 1)


def _dary_tree(d, depth):
    if d is None or depth is None or d < 1 or depth < 0:
        raise ValueError("complete-d-ary-tree needs d >= 1 and depth >= 0")
    edges = []
    frontier, nxt = [0], 1
    for _ in range(depth):
        new = []
        for p in frontier:
            for _ in range(d):
                edges.append((p, nxt))
                new.append(nxt)
                nxt += 1
        frontier = new
    edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
    delta = d + 1 if depth >= 2 else d
    return nxt, edges, max(delta, 1)


def _erdos_renyi(n, p, cap, rng):
    if p is None or not 0.0 <= p <= 1.0:
        raise ValueError("erdos-renyi needs 0 <= p <= 1")
    g = nx.fast_gnp_random_graph(n, p, seed=int(rng.integers(2**31)))
    edges = np.array(sorted(tuple(sorted(e)) for e in g.edges()), dtype=np.int64).reshape(-1, 2)
    if cap is not None:
        # drop edges (in a random order) that would push a vertex past cap
        perm = rng.permutation(len(edges))
        deg = np.zeros(n, dtype=np.int64)
        keep = []
        for k in perm:
            u, v = edges[k]
            if deg[u] < cap and deg[v] < cap:
                deg[u] += 1
                deg[v] += 1
                keep.append(k)
        edges = edges[np.sort(np.array(keep, dtype=np.int64))]
    deg = np.bincount(edges.ravel(), minlength=n)
    delta = cap if cap is not None else int(deg.max()) if len(edges) else 1
    return edges, max(delta, 1)


def generate(spec: GeneratorSpec, seed: int) -> EdgeStream:
    rng = np.random.default_rng([seed, 0x67656E])
    n = spec.n
    if spec.kind == "random-regular":
        edges, delta = _random_regular(n, spec.d, rng)
    elif spec.kind == "random-tree":
        edges, delta = _random_tree(n, spec.max_degree, rng)
    elif spec.kind == "complete-d-ary-tree":
        n, edges, delta = _dary_tree(spec.d, spec.depth)
    elif spec.kind == "path":
        if n < 2:
            raise ValueError("path needs n >= 2")
        edges = np.column_stack([np.arange(n - 1), np.arange(1, n)]).astype(np.int64)
        delta = 2 if n > 2 else 1
    elif spec.kind == "star":
        if n < 2:
            raise ValueError("star needs n >= 2")
        edges = np.column_stack([np.zeros(n - 1, dtype=np.int64), np.arange(1, n)])
        delta = n - 1
    else:
        edges, delta = _erdos_renyi(n, spec.p, spec.max_degree, rng)
    graph = Graph(n, edges, delta)
    order = None
    if spec.order == "uniformly-random":
        order = np.random.default_rng([seed, 0x6F7264]).permutation(graph.m)
    return EdgeStream(graph, order)


# --------------------------------------------------------------------------
# local cycle detection


@kernel
def _nbhd_has_cycle(indptr, nbr, u, v, radius, dist, queue):
    # multi-source BFS from both endpoints; dist must be all -1 on entry and
    # is restored before returning
    dist[u] = 0
    dist[v] = 0
    queue[0] = u
    queue[1] = v
    head = 0
    tail = 2
    while head < tail:
        x = queue[head]
        head += 1
        if dist[x] >= radius:
            continue
        for k in range(indptr[x], indptr[x + 1]):
            y = nbr[k]
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                queue[tail] = y
                tail += 1
    # the induced subgraph is connected (everything hangs off u-v), so it
    # contains a cycle iff it has at least as many edges as vertices
    ends = 0
    for j in range(tail):
        x = queue[j]
        for k in range(indptr[x], indptr[x + 1]):
            if dist[nbr[k]] >= 0:
                ends += 1
    for j in range(tail):
        dist[queue[j]] = -1
    return ends // 2 >= tail


@kernel
def _cycle_flags(indptr, nbr, us, vs, radius, n):
    dist = -np.ones(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    out = np.zeros(len(us), dtype=np.bool_)
    for i in range(len(us)):
        out[i] = _nbhd_has_cycle(indptr, nbr, us[i], vs[i], radius, dist, queue)
    return out


def neighborhood_has_cycle(g: Graph, e, radius: int) -> bool:
    """True iff the subgraph induced by vertices within ``radius`` hops of
    either endpoint of ``e`` contains a cycle."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    k = g.resolve_edge(e)
    u, v = g.edges[k]
    indptr, nbr, _ = g.adjacency
    dist = -np.ones(g.n, dtype=np.int64)
    queue = np.empty(g.n, dtype=np.int64)
    return bool(_nbhd_has_cycle(indptr, nbr, u, v, radius, dist, queue))


def cycle_flags(g: Graph, edge_ids, radius: int) -> np.ndarray:
    """Vectorized ``neighborhood_has_cycle`` over many edges of ``g``."""
    ids = np.asarray(edge_ids, dtype=np.int64)
    indptr, nbr, _ = g.adjacency
    e = g.edges[ids]
    return _cycle_flags(indptr, nbr, np.ascontiguousarray(e[:, 0]),
                        np.ascontiguousarray(e[:, 1]), radius, g.n)


# --------------------------------------------------------------------------
# stream text format: "n m delta" then one "u v" per line in arrival order


def write_stream(stream: EdgeStream, fh: TextIO, comment: str | None = None) -> None:
    if comment:
        for line in comment.splitlines():
            fh.write(f"# {line}\n")
    fh.write(f"{stream.n} {stream.m} {stream.delta}\n")
    us, vs, _ = stream.arrays()
    for u, v in zip(us.tolist(), vs.tolist()):
        fh.write(f"{u} {v}\n")


def format_stream(stream: EdgeStream, comment: str | None = None) -> str:
    buf = io.StringIO()
    write_stream(stream, buf, comment)
    return buf.getvalue()


def _content_lines(lines: Iterable[str]):
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def read_stream(fh: TextIO) -> EdgeStream:
    """Parse the edge-stream text format; arrival order is line order."""
    it = _content_lines(fh)
    try:
        lineno, header = next(it)
    except StopIteration:
        raise ValueError("empty stream: missing 'n m delta' header") from None
    parts = header.split()
    if len(parts) != 3:
        raise ValueError(f"line {lineno}: header must be 'n m delta'")
    n, m, delta = (int(x) for x in parts)
    edges = np.empty((m, 2), dtype=np.int64)
    count = 0
    for lineno, line in it:
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'u v'")
        if count >= m:
            raise ValueError(f"line {lineno}: more than m={m} edges")
        edges[count] = (int(parts[0]), int(parts[1]))
        count += 1
    if count != m:
        raise ValueError(f"header declares m={m} edges but {count} were given")
    return EdgeStream(Graph(n, edges, delta))


def parse_stream(text: str) -> EdgeStream:
    return read_stream(io.StringIO(text))
