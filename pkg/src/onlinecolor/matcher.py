"""Online matching with degree-corrected acceptance.

An arriving edge ``(u, v)`` whose endpoints are both free is accepted with
probability ``C / ((C - d_u)(C - d_v))`` where ``d_x`` counts every earlier
arrival at ``x`` (matched or not).  On a tree this matches every edge with
probability exactly ``1/C``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from ._accel import kernel
from .rng import RandomSource, draw, stream_key


class Outcome(IntEnum):
    MATCHED = 0
    SKIPPED_NEIGHBOR_MATCHED = 1
    REJECTED_BY_COIN = 2


def accept_probability(C: float, d_u: int, d_v: int) -> float:
    if C <= max(d_u, d_v):
        raise ValueError(f"C={C} must exceed both degrees ({d_u}, {d_v})")
    return min(C / ((C - d_u) * (C - d_v)), 1.0)


def min_sampling_parameter(delta: int) -> float:
    """Lower limit ``Δ + 2√Δ`` below which acceptance could exceed one."""
    return delta + 2.0 * math.sqrt(delta)


def check_sampling_parameter(C: float, delta: int) -> None:
    if not C > min_sampling_parameter(delta):
        raise ValueError(
            f"sampling parameter C={C} must exceed delta + 2*sqrt(delta) = "
            f"{min_sampling_parameter(delta):.6g} for delta={delta}"
        )


@dataclass
class MatcherState:
    """Step-by-step matcher; the compiled kernels below are its fast path."""

    n: int
    C: float
    delta: int | None = None
    d: np.ndarray = field(init=False)
    m: np.ndarray = field(init=False)
    matching: list = field(init=False, default_factory=list)
    thresholds: list = field(init=False, default_factory=list)

    def __post_init__(self):
        if self.delta is not None:
            check_sampling_parameter(self.C, self.delta)
        self.d = np.zeros(self.n, dtype=np.int64)
        self.m = np.zeros(self.n, dtype=bool)

    @property
    def arrivals(self) -> int:
        return int(self.d.sum()) // 2

    def process_edge(self, u: int, v: int, r: float, edge_id: int | None = None) -> Outcome:
        p = accept_probability(self.C, int(self.d[u]), int(self.d[v]))
        self.thresholds.append(p)
        if self.m[u] or self.m[v]:
            out = Outcome.SKIPPED_NEIGHBOR_MATCHED
        elif r <= p:
            out = Outcome.MATCHED
            self.m[u] = self.m[v] = True
            self.matching.append(self.arrivals if edge_id is None else edge_id)
        else:
            out = Outcome.REJECTED_BY_COIN
        self.d[u] += 1
        self.d[v] += 1
        return out


def process_edge(state: MatcherState, u: int, v: int, r: float, edge_id: int | None = None) -> Outcome:
    return state.process_edge(u, v, r, edge_id)


# --------------------------------------------------------------------------
# kernels


@kernel
def _run(us, vs, ids, n, C, key):
    m = len(us)
    d = np.zeros(n, dtype=np.int64)
    matched = np.zeros(n, dtype=np.bool_)
    outcome = np.empty(m, dtype=np.int8)
    thresh = np.empty(m, dtype=np.float64)
    bad = -1
    for i in range(m):
        u = us[i]
        v = vs[i]
        du = d[u]
        dv = d[v]
        if C <= du or C <= dv:
            bad = i
            break
        p = C / ((C - du) * (C - dv))
        if p > 1.0:
            p = 1.0
        thresh[i] = p
        if matched[u] or matched[v]:
            outcome[i] = 1
        elif draw(key, ids[i]) <= p:
            outcome[i] = 0
            matched[u] = True
            matched[v] = True
        else:
            outcome[i] = 2
        d[u] = du + 1
        d[v] = dv + 1
    return outcome, thresh, bad


@kernel
def _match_counts(us, vs, ids, n, C, seed, instance0, runs):
    m = len(us)
    d = np.zeros(n, dtype=np.int64)
    matched = np.zeros(n, dtype=np.bool_)
    counts = np.zeros(m, dtype=np.int64)
    # thresholds depend only on the arrival order, not on the draws
    thresh = np.empty(m, dtype=np.float64)
    for i in range(m):
        p = C / ((C - d[us[i]]) * (C - d[vs[i]]))
        thresh[i] = p if p < 1.0 else 1.0
        d[us[i]] += 1
        d[vs[i]] += 1
    for run in range(runs):
        key = stream_key(seed, instance0 + run)
        for i in range(m):
            u = us[i]
            v = vs[i]
            if not (matched[u] or matched[v]):
                if draw(key, ids[i]) <= thresh[i]:
                    matched[u] = True
                    matched[v] = True
                    counts[i] += 1
        for i in range(m):
            matched[us[i]] = False
            matched[vs[i]] = False
    return counts


@dataclass
class MatchResult:
    outcomes: np.ndarray      # per arrival position, Outcome codes
    thresholds: np.ndarray    # acceptance probability offered at each arrival
    ids: np.ndarray           # edge index of each arrival position

    @property
    def matched_mask(self) -> np.ndarray:
        return self.outcomes == Outcome.MATCHED

    @property
    def matching(self) -> np.ndarray:
        return self.ids[self.matched_mask]


def run_matching(us, vs, ids, n: int, C: float, key: int, delta: int | None = None) -> MatchResult:
    """Run the matcher over arrival arrays with a precomputed stream key."""
    if delta is not None:
        check_sampling_parameter(C, delta)
    us = np.ascontiguousarray(us, dtype=np.int64)
    vs = np.ascontiguousarray(vs, dtype=np.int64)
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    out, thr, bad = _run(us, vs, ids, n, float(C), np.uint64(key))
    if bad >= 0:
        raise ValueError(
            f"C={C} does not exceed the degree of an endpoint of arrival {bad} "
            f"(edge {int(ids[bad])})"
        )
    return MatchResult(out, thr, ids)


def match_stream(stream, C: float, src: RandomSource, instance: int = 0,
                 check_delta: bool = True) -> MatchResult:
    us, vs, ids = stream.arrays()
    return run_matching(us, vs, ids, stream.n, C, src.key(instance),
                        stream.delta if check_delta else None)


def match_counts(us, vs, ids, n: int, C: float, seed: int, runs: int,
                 instance0: int = 0) -> np.ndarray:
    """Times each arrival was matched over ``runs`` independent runs.

    Run ``k`` uses instance label ``instance0 + k``.
    """
    us = np.ascontiguousarray(us, dtype=np.int64)
    vs = np.ascontiguousarray(vs, dtype=np.int64)
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    deg = np.bincount(np.concatenate([us, vs]), minlength=n) if len(us) else np.zeros(1)
    if C <= deg.max() - 1:
        raise ValueError(f"C={C} does not exceed the maximum arrival degree")
    return _match_counts(us, vs, ids, n, float(C), np.uint64(seed), np.uint64(instance0), runs)


def is_matching(edges: np.ndarray) -> bool:
    e = np.asarray(edges).ravel()
    return len(np.unique(e)) == len(e)
