"""Online sparsification.

``Subsample`` keeps each edge with probability just under ``Δ'/Δ`` and caps
degrees at ``Δ'`` (adversarial order).  ``Split`` marks each edge with a
uniform color in ``1..T`` and routes it to part ``G_color`` unless an
endpoint already carries too many marks of that color (random order).

All logarithms are natural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from ._accel import kernel
from .graph import EdgeStream, Graph
from .rng import RandomSource, draw, stream_key

REJECTED = -1


class SubsampleOutcome(IntEnum):
    KEPT = 0
    DROPPED_BY_COIN = 1
    DROPPED_BY_DEGREE_CAP = 2


def subsample_eta(delta_prime: float) -> float:
    return 3.0 * math.sqrt(math.log(delta_prime) / delta_prime)


def subsample_threshold(delta: int, delta_prime: int) -> float:
    return (1.0 - subsample_eta(delta_prime)) * delta_prime / delta


def min_subsample_degree() -> int:
    """Smallest integer ``Δ'`` with ``η < 1``."""
    k = 2
    while subsample_eta(k) >= 1.0:
        k += 1
    return k


@dataclass
class SubsampleState:
    n: int
    delta: int
    delta_prime: int
    eta: float = field(init=False)
    threshold: float = field(init=False)
    d: np.ndarray = field(init=False)
    kept: list = field(init=False, default_factory=list)

    def __post_init__(self):
        if self.delta_prime > self.delta:
            raise ValueError(f"target degree {self.delta_prime} exceeds delta {self.delta}")
        if self.delta_prime < 2:
            raise ValueError("target degree must be >= 2")
        self.eta = subsample_eta(self.delta_prime)
        if not 0.0 < self.eta < 1.0:
            raise ValueError(
                f"eta = 3*sqrt(ln D'/D') = {self.eta:.4f} is not in (0, 1) for "
                f"D'={self.delta_prime}; need D' >= {min_subsample_degree()}"
            )
        self.threshold = (1.0 - self.eta) * self.delta_prime / self.delta
        self.d = np.zeros(self.n, dtype=np.int64)

    def subsample_edge(self, u: int, v: int, r: float, edge_id: int | None = None) -> SubsampleOutcome:
        if r > self.threshold:
            return SubsampleOutcome.DROPPED_BY_COIN
        # counters track coin successes, whether or not the edge is kept
        ok = self.d[u] < self.delta_prime and self.d[v] < self.delta_prime
        self.d[u] += 1
        self.d[v] += 1
        if ok:
            self.kept.append(edge_id)
            return SubsampleOutcome.KEPT
        return SubsampleOutcome.DROPPED_BY_DEGREE_CAP


def subsample_edge(state: SubsampleState, u: int, v: int, r: float, edge_id: int | None = None):
    return state.subsample_edge(u, v, r, edge_id)


@kernel
def _subsample(us, vs, ids, n, threshold, dprime, key):
    d = np.zeros(n, dtype=np.int64)
    out = np.empty(len(us), dtype=np.int8)
    for i in range(len(us)):
        if draw(key, ids[i]) > threshold:
            out[i] = 1
            continue
        u = us[i]
        v = vs[i]
        out[i] = 0 if (d[u] < dprime and d[v] < dprime) else 2
        d[u] += 1
        d[v] += 1
    return out


@kernel
def _keep_counts(us, vs, ids, n, threshold, dprime, seed, instance0, runs):
    d = np.zeros(n, dtype=np.int64)
    counts = np.zeros(len(us), dtype=np.int64)
    for run in range(runs):
        key = stream_key(seed, instance0 + run)
        for i in range(len(us)):
            if draw(key, ids[i]) <= threshold:
                u = us[i]
                v = vs[i]
                if d[u] < dprime and d[v] < dprime:
                    counts[i] += 1
                d[u] += 1
                d[v] += 1
        for i in range(len(us)):
            d[us[i]] = 0
            d[vs[i]] = 0
    return counts


@dataclass
class SubsampleResult:
    outcomes: np.ndarray   # per arrival position
    ids: np.ndarray

    @property
    def kept_ids(self) -> np.ndarray:
        """Kept edge indices, in arrival order."""
        return self.ids[self.outcomes == SubsampleOutcome.KEPT]


def subsample_arrays(us, vs, ids, n, delta, delta_prime, key) -> SubsampleResult:
    st = SubsampleState(0, delta, delta_prime)   # validates parameters
    out = _subsample(np.ascontiguousarray(us), np.ascontiguousarray(vs),
                     np.ascontiguousarray(ids), n, st.threshold, delta_prime, np.uint64(key))
    return SubsampleResult(out, np.asarray(ids))


def subsample_stream(stream: EdgeStream, delta_prime: int, src: RandomSource,
                     instance: int = 0) -> SubsampleResult:
    us, vs, ids = stream.arrays()
    return subsample_arrays(us, vs, ids, stream.n, stream.delta, delta_prime, src.key(instance))


def keep_counts(stream: EdgeStream, delta_prime: int, seed: int, runs: int,
                positions=None, instance0: int = 0) -> np.ndarray:
    """Keep counts per arrival position over independent runs.

    ``positions`` restricts simulation to a sub-list of arrival positions;
    counts for an edge are exact as long as every earlier arrival sharing an
    endpoint with it is included (the degree counters of an edge's endpoints
    only see edges at those endpoints).
    """
    us, vs, ids = stream.arrays()
    if positions is not None:
        positions = np.sort(np.asarray(positions, dtype=np.int64))
        us, vs, ids = us[positions], vs[positions], ids[positions]
    thr = subsample_threshold(stream.delta, delta_prime)
    SubsampleState(0, stream.delta, delta_prime)
    return _keep_counts(np.ascontiguousarray(us), np.ascontiguousarray(vs),
                        np.ascontiguousarray(ids), stream.n, thr, delta_prime,
                        np.uint64(seed), np.uint64(instance0), runs)


def substream(stream: EdgeStream, ids_in_order, delta: int | None = None) -> EdgeStream:
    """Sub-stream on the given edge indices, keeping their arrival order.

    Edges are renumbered ``0..k-1`` in arrival order.
    """
    ids_in_order = np.asarray(ids_in_order, dtype=np.int64)
    edges = stream.graph.edges[ids_in_order]
    if delta is None:
        deg = np.bincount(edges.ravel(), minlength=stream.n)
        delta = max(int(deg.max()) if len(edges) else 1, 1)
    return EdgeStream(Graph(stream.n, edges, delta))


def uniform_keep_mask(stream: EdgeStream, p: float, src: RandomSource, instance: int = 0) -> np.ndarray:
    """Independent keep-with-probability-``p`` mask over edge indices."""
    return src.draws(instance, np.arange(stream.m)) < p


# --------------------------------------------------------------------------
# Split


def split_slack(delta_prime: float) -> float:
    return 3.0 * math.sqrt(delta_prime * math.log(delta_prime))


@dataclass
class SplitState:
    n: int
    delta: int
    delta_prime: int
    T: int = field(init=False)
    slack: float = field(init=False)
    marks: np.ndarray = field(init=False)
    parts: list = field(init=False)
    reject: list = field(init=False, default_factory=list)

    def __post_init__(self):
        if self.delta_prime < 2:
            raise ValueError("split needs target degree >= 2")
        self.T = math.ceil(self.delta / self.delta_prime)
        self.slack = split_slack(self.delta_prime)
        self.marks = np.zeros((self.n, self.T), dtype=np.int64)
        self.parts = [[] for _ in range(self.T)]

    @property
    def cap(self) -> float:
        return self.delta_prime + self.slack

    def color_of(self, r: float) -> int:
        return min(int(r * self.T), self.T - 1)

    def split_edge(self, u: int, v: int, r: float, edge_id: int | None = None) -> int:
        """Part index in ``0..T-1`` (0-based color), or ``REJECTED``."""
        c = self.color_of(r)
        self.marks[u, c] += 1
        self.marks[v, c] += 1
        if self.marks[u, c] <= self.cap and self.marks[v, c] <= self.cap:
            self.parts[c].append(edge_id)
            return c
        self.reject.append(edge_id)
        return REJECTED


def split_edge(state: SplitState, u: int, v: int, r: float, edge_id: int | None = None) -> int:
    return state.split_edge(u, v, r, edge_id)


@kernel
def _split(us, vs, ids, n, T, cap, key):
    marks = np.zeros((n, T), dtype=np.int64)
    color = np.empty(len(us), dtype=np.int64)
    part = np.empty(len(us), dtype=np.int64)
    for i in range(len(us)):
        c = np.int64(draw(key, ids[i]) * T)
        if c >= T:
            c = T - 1
        u = us[i]
        v = vs[i]
        marks[u, c] += 1
        marks[v, c] += 1
        color[i] = c
        part[i] = c if (marks[u, c] <= cap and marks[v, c] <= cap) else -1
    return color, part


@dataclass
class SplitResult:
    T: int
    cap: float
    color: np.ndarray   # marked color per arrival position (0-based)
    part: np.ndarray    # part per arrival position, REJECTED if capped
    ids: np.ndarray

    def part_ids(self, k: int) -> np.ndarray:
        return self.ids[self.part == k]

    @property
    def reject_ids(self) -> np.ndarray:
        return self.ids[self.part == REJECTED]


def split_arrays(us, vs, ids, n, delta, delta_prime, key) -> SplitResult:
    st = SplitState(0, delta, delta_prime)
    color, part = _split(np.ascontiguousarray(us), np.ascontiguousarray(vs),
                         np.ascontiguousarray(ids), n, st.T, st.cap, np.uint64(key))
    return SplitResult(st.T, st.cap, color, part, np.asarray(ids))


def split_stream(stream: EdgeStream, delta_prime: int, src: RandomSource, instance: int = 0) -> SplitResult:
    us, vs, ids = stream.arrays()
    return split_arrays(us, vs, ids, stream.n, stream.delta, delta_prime, src.key(instance))


def part_degree_max(stream: EdgeStream, res: SplitResult) -> int:
    """Largest degree of any vertex inside any single part."""
    us, vs, _ = stream.arrays()
    best = 0
    for k in range(res.T):
        sel = res.part == k
        if sel.any():
            deg = np.bincount(np.concatenate([us[sel], vs[sel]]), minlength=stream.n)
            best = max(best, int(deg.max()))
    return best
