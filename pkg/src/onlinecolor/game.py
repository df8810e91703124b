"""Witness trees and the edge matching game.

A witness tree is stored in parent-list form.  Node 0 and node 1 are the
endpoints ``u`` and ``v`` of the target edge, which is the edge of node 1.
Every other node ``k`` owns the edge ``(parent[k], k)`` with arrival rank
``arrival[k]``; ``boundary[k]`` marks edges ceded to the adversary.  A
boundary node is always a leaf standing for the (distinct) outside endpoint.

Three routes compute the probability that the target edge is matched:

* :func:`exact_match_probability` walks the arrival sequence, branching on
  every coin with its exact probability (memoized on the matched-set).
* :func:`dp_match_probability` evaluates the bottom-up tree recurrence.
* :func:`simulate_game` is a Monte Carlo run of the same game.

:func:`adaptive_min_probability` replaces fixed boundary decisions by an
adversary minimizing over its choices with full knowledge of the history.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._accel import kernel
from .graph import EdgeStream, neighborhood_has_cycle
from .matcher import accept_probability, run_matching
from .recurrence import q_step
from .rng import RandomSource, draw, stream_key

EXACT_EDGE_CAP = 25
ADAPTIVE_EDGE_CAP = 20

ALL_UNMATCHED = "all-unmatched"
ALL_MATCHED = "all-matched"


@dataclass(eq=False)
class WitnessTree:
    parent: np.ndarray
    arrival: np.ndarray
    boundary: np.ndarray
    depth: int | None = None
    vertex: np.ndarray | None = None    # graph vertex per node, -1 outside
    edge_id: np.ndarray | None = None   # graph edge per node, -1 for node 0

    def __post_init__(self):
        self.parent = np.asarray(self.parent, dtype=np.int64)
        self.arrival = np.asarray(self.arrival, dtype=np.float64)
        self.boundary = np.asarray(self.boundary, dtype=bool)
        self.validate()

    # structure ------------------------------------------------------------

    @property
    def size(self) -> int:
        """Number of nodes."""
        return len(self.parent)

    @property
    def n_edges(self) -> int:
        return self.size - 1

    @property
    def n_boundary(self) -> int:
        return int(self.boundary.sum())

    @cached_property
    def children(self) -> list[list[int]]:
        """Children of every node sorted by arrival; node 1 is not listed
        under node 0."""
        ch = [[] for _ in range(self.size)]
        for k in range(2, self.size):
            ch[self.parent[k]].append(k)
        for lst in ch:
            lst.sort(key=lambda k: self.arrival[k])
        return ch

    @cached_property
    def node_depth(self) -> np.ndarray:
        """Edge distance from the target edge (nodes 0 and 1 at 0)."""
        d = np.zeros(self.size, dtype=np.int64)
        for k in self.topological():
            if k >= 2:
                d[k] = d[self.parent[k]] + 1
        return d

    def topological(self) -> list[int]:
        out, dq = [], deque([0, 1])
        while dq:
            k = dq.popleft()
            out.append(k)
            dq.extend(self.children[k])
        return out

    def parent_edge(self, k: int) -> int:
        return 1 if self.parent[k] in (0, 1) else int(self.parent[k])

    @cached_property
    def edge_order(self) -> list[int]:
        """Edge-owning nodes in arrival order; the target edge (node 1) last."""
        return sorted(range(1, self.size), key=lambda k: self.arrival[k])

    @property
    def max_degree(self) -> int:
        deg = np.bincount(self.parent[1:], minlength=self.size)
        deg[1:] += 1
        return int(deg.max())

    def default_C(self) -> float:
        """``Δ + 2√Δ + 1`` for the tree's own maximum degree."""
        d = self.max_degree
        return d + 2.0 * np.sqrt(d) + 1.0

    @property
    def boundary_nodes(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.boundary)]

    def validate(self) -> None:
        n = self.size
        if n < 2:
            raise ValueError("witness tree needs at least the target edge")
        if len(self.arrival) != n or len(self.boundary) != n:
            raise ValueError("parent, arrival and boundary must have equal length")
        if self.parent[0] != -1 or self.parent[1] != 0:
            raise ValueError("node 0 must be the root (parent -1) and node 1 its child")
        if self.boundary[0] or self.boundary[1]:
            raise ValueError("the target edge cannot be a boundary edge")
        for k in range(2, n):
            p = self.parent[k]
            if not 0 <= p < n or p == k:
                raise ValueError(f"node {k} has invalid parent {p}")
        # acyclic / connected: every node reaches 0
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        for k in range(1, n):
            path, x = [], k
            while not seen[x]:
                path.append(x)
                x = self.parent[x]
                if len(path) > n:
                    raise ValueError("parent list contains a cycle")
            seen[path] = True
        has_child = np.zeros(n, dtype=bool)
        has_child[self.parent[2:]] = True
        if np.any(self.boundary & has_child):
            raise ValueError("boundary edges cannot have children")
        if len(np.unique(self.arrival[1:])) != n - 1:
            raise ValueError("arrival ranks must be distinct")
        for k in range(2, n):
            if not self.arrival[k] < self.arrival[self.parent_edge(k)]:
                raise ValueError(f"edge of node {k} arrives after its parent edge")

    # serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        arr = self.arrival.tolist()
        arr[0] = None
        return {"parent": self.parent.tolist(), "arrival": arr,
                "boundary": self.boundary.astype(int).tolist(), "depth": self.depth}

    @classmethod
    def from_dict(cls, d: dict) -> "WitnessTree":
        arr = [(-1.0 if a is None else a) for a in d["arrival"]]
        return cls(d["parent"], arr, d.get("boundary", [0] * len(arr)), d.get("depth"))


def load_instance(path) -> tuple[WitnessTree, dict]:
    """Read a game instance: a JSON object with the tree fields plus ``C`` and
    optionally ``decisions`` (list of 0/1 per boundary node, in node order)."""
    with open(path) as fh:
        d = json.load(fh)
    return WitnessTree.from_dict(d), d


def decisions_for(tree: WitnessTree, assignment) -> np.ndarray:
    """Expand a boundary assignment into a per-node bool array (True = matched).

    ``assignment`` is a strategy tag, a sequence of 0/1 per boundary node (in
    node order), a per-node bool array, or ``None`` (no boundary allowed).
    """
    dec = np.zeros(tree.size, dtype=bool)
    if assignment is None:
        if tree.n_boundary:
            raise ValueError("tree has boundary edges; a boundary assignment is required")
        return dec
    if isinstance(assignment, str):
        if assignment == ALL_UNMATCHED:
            return dec
        if assignment == ALL_MATCHED:
            return tree.boundary.copy()
        raise ValueError(f"unknown boundary strategy {assignment!r}")
    a = np.asarray(assignment, dtype=bool)
    if a.shape == (tree.size,):
        return a & tree.boundary
    if a.shape == (tree.n_boundary,):
        dec[tree.boundary_nodes] = a
        return dec
    raise ValueError("boundary assignment has the wrong length")


def assignment_from_mask(tree: WitnessTree, mask: int) -> np.ndarray:
    """Boundary assignment whose ``j``-th boundary node is matched iff bit ``j``."""
    bits = [(mask >> j) & 1 for j in range(tree.n_boundary)]
    return decisions_for(tree, bits)


# --------------------------------------------------------------------------
# enumeration and adaptive adversary


def _offsets(tree: WitnessTree, offsets) -> np.ndarray:
    if offsets is None:
        return np.zeros(tree.size, dtype=np.int64)
    off = np.asarray(offsets, dtype=np.int64)
    if off.shape != (tree.size,) or np.any(off < 0):
        raise ValueError("offsets must be one non-negative integer per node")
    return off


def _game_tables(tree: WitnessTree, C: float, offsets=None):
    order = tree.edge_order
    steps = []
    deg = _offsets(tree, offsets).copy()
    for k in order:
        a = 0 if k == 1 else int(tree.parent[k])
        b = k
        p = None if tree.boundary[k] else accept_probability(C, int(deg[a]), int(deg[b]))
        steps.append((a, b, k, p))
        deg[a] += 1
        deg[b] += 1
    # nodes whose matched flag can still matter at step s
    live = [0] * (len(steps) + 1)
    acc = 0
    for s in range(len(steps) - 1, -1, -1):
        a, b, _, _ = steps[s]
        acc |= (1 << a) | (1 << b)
        live[s] = acc
    return steps, live


def _solve(tree: WitnessTree, C: float, decisions, adaptive: bool, offsets=None) -> float:
    steps, live = _game_tables(tree, C, offsets)
    last = len(steps) - 1
    memo: dict = {}

    def value(s: int, mask: int) -> float:
        mask &= live[s]
        key = (s, mask)
        if key in memo:
            return memo[key]
        a, b, k, p = steps[s]
        busy = (mask >> a) & 1 or (mask >> b) & 1
        if s == last:
            res = 0.0 if busy else p
        elif p is None:
            # boundary: the adversary may match even next to a matched vertex
            on = value(s + 1, mask | (1 << a) | (1 << b))
            off = value(s + 1, mask)
            if adaptive:
                res = min(on, off)
            else:
                res = on if decisions[k] else off
        elif busy:
            res = value(s + 1, mask)
        else:
            res = p * value(s + 1, mask | (1 << a) | (1 << b)) + (1.0 - p) * value(s + 1, mask)
        memo[key] = res
        return res

    return value(0, 0)


def exact_match_probability(tree: WitnessTree, boundary, C: float, offsets=None) -> float:
    """Exact probability that the target edge is matched, by enumeration.

    ``offsets`` optionally adds exogenous degree to every node (sensitivity
    experiments); by default degrees are tree-local.
    """
    if tree.n_edges > EXACT_EDGE_CAP:
        raise ValueError(
            f"tree has {tree.n_edges} edges; enumeration is capped at "
            f"{EXACT_EDGE_CAP}, use dp_match_probability"
        )
    return _solve(tree, C, decisions_for(tree, boundary), adaptive=False, offsets=offsets)


def adaptive_min_probability(tree: WitnessTree, C: float, offsets=None) -> float:
    """Minimum target-match probability against an adaptive boundary adversary."""
    if tree.n_edges > ADAPTIVE_EDGE_CAP:
        raise ValueError(f"tree has {tree.n_edges} edges; adaptive search is capped at {ADAPTIVE_EDGE_CAP}")
    return _solve(tree, C, None, adaptive=True, offsets=offsets)


# --------------------------------------------------------------------------
# tree recurrence


def not_matched_below(tree: WitnessTree, boundary, C: float, offsets=None) -> np.ndarray:
    """``q`` for every node: probability it is free when its parent edge arrives."""
    dec = decisions_for(tree, boundary)
    off = _offsets(tree, offsets)
    q = np.ones(tree.size)
    ch = tree.children
    for k in reversed(tree.topological()):
        if tree.boundary[k]:
            continue
        entries = []
        blocked = False
        for j in ch[k]:
            if tree.boundary[j]:
                if dec[j]:
                    blocked = True
                    break
                entries.append((0.0, 0))
            else:
                entries.append((q[j], len(ch[j]) + int(off[j])))
        q[k] = 0.0 if blocked else q_step(C, int(off[k]), entries)
    return q


def dp_match_probability(tree: WitnessTree, boundary, C: float, offsets=None) -> float:
    """Target-match probability from the bottom-up tree recurrence."""
    q = not_matched_below(tree, boundary, C, offsets)
    off = _offsets(tree, offsets)
    cu = len(tree.children[0]) + int(off[0])
    cv = len(tree.children[1]) + int(off[1])
    return q[0] * q[1] * accept_probability(C, cu, cv)


def boundary_sensitivity(tree: WitnessTree, base, C: float, node: int) -> float:
    """Change in the dp value when boundary ``node`` flips Unmatched -> Matched."""
    dec = decisions_for(tree, base)
    hi, lo = dec.copy(), dec.copy()
    hi[node], lo[node] = True, False
    return dp_match_probability(tree, hi, C) - dp_match_probability(tree, lo, C)


# --------------------------------------------------------------------------
# Monte Carlo


@kernel
def _simulate(a_nodes, b_nodes, kind, probs, size, runs, seed, instance0):
    # kind: 0 internal, 1 boundary forced matched, 2 boundary forced unmatched
    matched = np.zeros(size, dtype=np.bool_)
    hits = 0
    m = len(a_nodes)
    for run in range(runs):
        key = stream_key(seed, instance0 + run)
        matched[:] = False
        for s in range(m):
            a = a_nodes[s]
            b = b_nodes[s]
            if kind[s] == 1:
                matched[a] = True
                matched[b] = True
            elif kind[s] == 0 and not (matched[a] or matched[b]):
                if draw(key, b) <= probs[s]:
                    matched[a] = True
                    matched[b] = True
                    if s == m - 1:
                        hits += 1
    return hits


def simulate_game(tree: WitnessTree, boundary, C: float, runs: int, seed: int,
                  instance0: int = 0) -> int:
    """Number of runs (out of ``runs``) in which the target edge is matched."""
    dec = decisions_for(tree, boundary)
    steps, _ = _game_tables(tree, C)
    a = np.array([s[0] for s in steps], dtype=np.int64)
    b = np.array([s[1] for s in steps], dtype=np.int64)
    kind = np.array([0 if s[3] is not None else (1 if dec[s[2]] else 2) for s in steps], dtype=np.int64)
    probs = np.array([s[3] if s[3] is not None else 0.0 for s in steps])
    return int(_simulate(a, b, kind, probs, tree.size, runs, np.uint64(seed), np.uint64(instance0)))


# --------------------------------------------------------------------------
# construction from streams


def build_witness_tree(stream: EdgeStream, e, g: int) -> WitnessTree | None:
    """Witness tree of edge ``e`` within radius ``g``, or None if the radius-g
    neighborhood contains a cycle."""
    graph = stream.graph
    eid = graph.resolve_edge(e)
    if neighborhood_has_cycle(graph, eid, g):
        return None
    indptr, nbr, nbr_eid = graph.adjacency
    rank = stream.rank
    u, v = (int(x) for x in graph.edges[eid])
    parent, arrival, boundary = [-1, 0], [-1.0, float(rank[eid])], [False, False]
    vertex, edge_id = [u, v], [-1, eid]
    dist = {u: 0, v: 0}
    dq = deque([(0, u), (1, v)])
    while dq:
        node, x = dq.popleft()
        pe_rank = arrival[1] if node in (0, 1) else arrival[node]
        came_by = edge_id[node] if node != 0 else eid
        for k in range(indptr[x], indptr[x + 1]):
            f = int(nbr_eid[k])
            if f == came_by or (node == 1 and f == eid):
                continue
            y = int(nbr[k])
            if dist[x] < g:
                # inside the neighborhood; acyclicity makes y new
                dist[y] = dist[x] + 1
                alive = rank[f] < pe_rank
                if alive:
                    parent.append(node)
                    arrival.append(float(rank[f]))
                    boundary.append(False)
                    vertex.append(y)
                    edge_id.append(f)
                    dq.append((len(parent) - 1, y))
                else:
                    # mark visited so its subtree is skipped
                    pass
            else:
                # radius-g vertex: every further edge crosses the boundary
                if rank[f] < pe_rank:
                    parent.append(node)
                    arrival.append(float(rank[f]))
                    boundary.append(True)
                    vertex.append(-1)
                    edge_id.append(f)
    return WitnessTree(parent, arrival, boundary, depth=g,
                       vertex=np.array(vertex), edge_id=np.array(edge_id))


def witness_set_random_order(stream: EdgeStream, e) -> set[int]:
    """Edges with an arrival-increasing chain of adjacent edges ending at ``e``."""
    graph = stream.graph
    eid = graph.resolve_edge(e)
    order, rank = stream.order, stream.rank
    touched = np.zeros(graph.n, dtype=bool)
    touched[graph.edges[eid]] = True
    out = {eid}
    for pos in range(int(rank[eid]) - 1, -1, -1):
        f = int(order[pos])
        x, y = graph.edges[f]
        if touched[x] or touched[y]:
            out.add(f)
            touched[x] = touched[y] = True
    return out


def witness_equivalence_check(stream: EdgeStream, e, seed: int, C: float | None = None,
                              strategy: str = "matcher") -> bool:
    """Does ``e`` fare identically on the full stream and on its witness set?

    ``strategy`` is ``"matcher"`` or ``"tree-coloring"``.
    """
    from .coloring import tree_coloring_arrays

    graph = stream.graph
    eid = graph.resolve_edge(e)
    wit = witness_set_random_order(stream, eid)
    us, vs, ids = stream.arrays()
    keep = np.array([int(i) in wit for i in ids])
    pos_full = int(stream.rank[eid])
    pos_sub = int(np.flatnonzero(ids[keep] == eid)[0])
    src = RandomSource(seed)
    if strategy == "matcher":
        if C is None:
            C = graph.delta + 2.0 * np.sqrt(graph.delta) + 1.0
        full = run_matching(us, vs, ids, graph.n, C, src.key(0))
        sub = run_matching(us[keep], vs[keep], ids[keep], graph.n, C, src.key(0))
        return bool(full.outcomes[pos_full] == sub.outcomes[pos_sub])
    if strategy == "tree-coloring":
        full = tree_coloring_arrays(us, vs, ids, graph.n, graph.delta, src)
        sub = tree_coloring_arrays(us[keep], vs[keep], ids[keep], graph.n, graph.delta, src)
        return bool(full.color[pos_full] == sub.color[pos_sub])
    raise ValueError(f"unknown strategy {strategy!r}")


# --------------------------------------------------------------------------
# random instances


def _random_arrivals(tree_parent: list[int], rng) -> list[float]:
    """Uniform-ish linear extension with every edge before its parent edge."""
    n = len(tree_parent)

    def pe(k):
        return 1 if tree_parent[k] in (0, 1) else tree_parent[k]

    pending = [0] * n
    for k in range(2, n):
        pending[pe(k)] += 1
    ready = [k for k in range(2, n) if pending[k] == 0]
    if n > 1 and pending[1] == 0 and 1 not in ready:
        ready.append(1)
    arrival = [-1.0] * n
    t = 0
    while ready:
        # the target edge goes last
        choices = [k for k in ready if k != 1] or ready
        k = choices[int(rng.integers(len(choices)))]
        ready.remove(k)
        arrival[k] = float(t)
        t += 1
        if k != 1:
            p = pe(k)
            pending[p] -= 1
            if pending[p] == 0:
                ready.append(p)
    return arrival


def random_witness_tree(rng, max_edges: int = 12, g: int = 3, max_boundary: int = 10,
                        boundary_prob: float = 0.5) -> WitnessTree:
    """Random witness tree of depth ``g`` with boundary edges only at the
    radius-``g`` frontier and a random valid arrival order."""
    if max_edges < 1:
        raise ValueError("max_edges must be >= 1")
    parent = [-1, 0]
    depth = [0, 0]
    budget = max_edges - 1
    # one spine down to depth g so the frontier is reachable
    side = int(rng.integers(2))
    x = side
    for dpt in range(1, g + 1):
        if budget <= 0:
            break
        parent.append(x)
        depth.append(dpt)
        x = len(parent) - 1
        budget -= 1
    n_boundary = 0
    while budget > 0:
        frontier = [k for k in range(len(parent)) if depth[k] == g]
        inner = [k for k in range(len(parent)) if depth[k] < g]
        if frontier and n_boundary < max_boundary and rng.random() < boundary_prob:
            p = frontier[int(rng.integers(len(frontier)))]
            parent.append(p)
            depth.append(g + 1)
            n_boundary += 1
        elif inner:
            p = inner[int(rng.integers(len(inner)))]
            parent.append(p)
            depth.append(depth[p] + 1)
        else:
            break
        budget -= 1
    # boundary nodes are those beyond the frontier
    bnd = [d == g + 1 for d in depth]
    arrival = _random_arrivals(parent, rng)
    return WitnessTree(parent, arrival, bnd, depth=g)
