"""Online edge-coloring strategies.

* ``greedy``: smallest color free at both endpoints (at most ``2Δ-1`` colors).
* ``cascade``: rounds of subsample + matcher; round ``i`` owns color ``i`` and
  a greedy reserve palette catches edges no round matched.
* ``tree-coloring``: ``Δ`` rounds of the matcher with shrinking parameters
  ``C_i``; edges left over are returned uncolored.
* ``random-order``: split into parts, tree-color every part on its own
  palette, then greedily color the leftovers from a shared reserve palette.
* ``blank-eps``: exactly ``Δ`` colors, random free color or blank.

Colors are global integer ids; ``-1`` marks an uncolored (or blank) edge.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import kernel
from .graph import EdgeStream
from .rng import RandomSource, draw
from .sparsify import min_subsample_degree, split_arrays, split_slack, subsample_threshold

UNCOLORED = -1
E_RATIO = math.e / (math.e - 1.0)

# stage codes per arrival
ST_NONE, ST_MAIN, ST_RESERVE, ST_BLANK = 0, 1, 2, 3

STRATEGIES = ("greedy", "cascade", "tree-coloring", "random-order", "blank-eps")


class ProperViolation(RuntimeError):
    """A color clash or a recolored edge."""

    def __init__(self, msg: str, position: int = -1, edge: int = -1):
        super().__init__(msg)
        self.position = position
        self.edge = edge


# --------------------------------------------------------------------------
# step-by-step state


@dataclass
class ColoringState:
    """Per-edge colors with properness checked at every assignment."""

    n: int
    colors: dict = field(default_factory=dict)
    used: list = field(init=False)
    palette: set = field(default_factory=set)

    def __post_init__(self):
        self.used = [set() for _ in range(self.n)]

    def free_colors(self, u: int, v: int, limit: int) -> list[int]:
        return [c for c in range(limit) if c not in self.used[u] and c not in self.used[v]]

    def assign(self, edge: int, u: int, v: int, color: int) -> None:
        if edge in self.colors:
            raise ProperViolation(f"edge {edge} is already colored", edge=edge)
        if color == UNCOLORED:
            self.colors[edge] = UNCOLORED
            return
        if color in self.used[u] or color in self.used[v]:
            raise ProperViolation(f"color {color} already present at an endpoint of edge {edge}", edge=edge)
        self.colors[edge] = color
        self.used[u].add(color)
        self.used[v].add(color)
        self.palette.add(color)

    @property
    def palette_size(self) -> int:
        return len(self.palette)


def greedy_color(state: ColoringState, edge: int, u: int, v: int) -> int:
    c = 0
    while c in state.used[u] or c in state.used[v]:
        c += 1
    state.assign(edge, u, v, c)
    return c


def blank_eps_choice(free: list[int], eps: float, r: float) -> int:
    """Color picked from the sorted free list with one uniform draw ``r``."""
    if r < eps or not free:
        return UNCOLORED
    k = len(free)
    idx = min(int((r - eps) / (1.0 - eps) * k), k - 1)
    return free[idx]


def blank_eps_color(state: ColoringState, edge: int, u: int, v: int, delta: int,
                    eps: float, r: float) -> int:
    c = blank_eps_choice(state.free_colors(u, v, delta), eps, r)
    state.assign(edge, u, v, c)
    return c


# --------------------------------------------------------------------------
# schedules


def dhat_schedule(delta: float, alpha: float, beta: float, n: int) -> list[int]:
    """Per-round residual degree bounds of the cascade."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    slack = beta * math.sqrt(delta * math.log(n))
    floor = math.ceil(slack - 1e-9)
    out = []
    i = 1
    while True:
        v = math.ceil(delta - (i - 1) / alpha + slack - 1e-9)
        if v <= floor:
            break
        out.append(max(v, floor))
        i += 1
    return out


def tree_c_schedule(delta: int) -> np.ndarray:
    """``C_1 = Δ + Δ^{3/4}``, ``C_{i+1} = C_i - 1 + Δ^{-1/12}``, ``Δ`` entries."""
    step = delta ** (-1.0 / 12.0)
    return delta + delta ** 0.75 + np.arange(delta) * (step - 1.0)


# --------------------------------------------------------------------------
# kernels


@kernel
def _greedy(us, vs, n, offset, width):
    used = np.zeros((n, width), dtype=np.bool_)
    out = np.full(len(us), -1, dtype=np.int64)
    for i in range(len(us)):
        u = us[i]
        v = vs[i]
        for c in range(width):
            if not used[u, c] and not used[v, c]:
                used[u, c] = True
                used[v, c] = True
                out[i] = offset + c
                break
    return out


@kernel
def _tree_coloring(us, vs, ids, n, Cs, caps, keys):
    R = len(Cs)
    cnt = np.zeros((n, R), dtype=np.int32)
    matched = np.zeros((n, R), dtype=np.bool_)
    color = np.full(len(us), -1, dtype=np.int64)
    diverted = np.zeros(len(us), dtype=np.int64)
    for i in range(len(us)):
        u = us[i]
        v = vs[i]
        for r in range(R):
            du = cnt[u, r]
            dv = cnt[v, r]
            if du >= caps[r] or dv >= caps[r]:
                # an endpoint retired from this round
                diverted[i] += 1
                continue
            C = Cs[r]
            p = C / ((C - du) * (C - dv))
            if p > 1.0:
                p = 1.0
            cnt[u, r] = du + 1
            cnt[v, r] = dv + 1
            if matched[u, r] or matched[v, r]:
                continue
            if draw(keys[r], ids[i]) <= p:
                matched[u, r] = True
                matched[v, r] = True
                color[i] = r
                break
    return color, diverted


@kernel
def _cascade(us, vs, ids, n, dhat, dprime, thr, Cs, sub_keys, match_keys, width):
    L = len(dhat)
    res = np.zeros((n, L), dtype=np.int32)
    sub = np.zeros((n, L), dtype=np.int32)
    deg = np.zeros((n, L), dtype=np.int32)
    matched = np.zeros((n, L), dtype=np.bool_)
    used = np.zeros((n, width), dtype=np.bool_)
    color = np.full(len(us), -1, dtype=np.int64)
    stage = np.zeros(len(us), dtype=np.int8)
    for i in range(len(us)):
        u = us[i]
        v = vs[i]
        e = ids[i]
        for r in range(L):
            res[u, r] += 1
            res[v, r] += 1
            if res[u, r] > dhat[r] or res[v, r] > dhat[r]:
                continue
            if thr[r] <= 1.0:
                if draw(sub_keys[r], e) > thr[r]:
                    continue
                ok = sub[u, r] < dprime[r] and sub[v, r] < dprime[r]
                sub[u, r] += 1
                sub[v, r] += 1
                if not ok:
                    continue
            C = Cs[r]
            du = deg[u, r]
            dv = deg[v, r]
            p = C / ((C - du) * (C - dv))
            if p > 1.0:
                p = 1.0
            deg[u, r] = du + 1
            deg[v, r] = dv + 1
            if matched[u, r] or matched[v, r]:
                continue
            if draw(match_keys[r], e) <= p:
                matched[u, r] = True
                matched[v, r] = True
                color[i] = r
                stage[i] = 1
                break
        if stage[i] == 0:
            for c in range(width):
                if not used[u, c] and not used[v, c]:
                    used[u, c] = True
                    used[v, c] = True
                    color[i] = L + c
                    stage[i] = 2
                    break
    return color, stage


@kernel
def _blank_eps(us, vs, ids, n, delta, eps, key):
    used = np.zeros((n, delta), dtype=np.bool_)
    out = np.full(len(us), -1, dtype=np.int64)
    for i in range(len(us)):
        u = us[i]
        v = vs[i]
        r = draw(key, ids[i])
        if r < eps:
            continue
        k = 0
        for c in range(delta):
            if not used[u, c] and not used[v, c]:
                k += 1
        if k == 0:
            continue
        idx = np.int64((r - eps) / (1.0 - eps) * k)
        if idx >= k:
            idx = k - 1
        for c in range(delta):
            if not used[u, c] and not used[v, c]:
                if idx == 0:
                    used[u, c] = True
                    used[v, c] = True
                    out[i] = c
                    break
                idx -= 1
    return out


# --------------------------------------------------------------------------
# results


def first_violation(us, vs, colors) -> int:
    """Earliest arrival position whose color clashes with an earlier edge at a
    shared endpoint, or -1.  Equivalent to checking after every arrival."""
    us = np.asarray(us)
    vs = np.asarray(vs)
    colors = np.asarray(colors)
    pos = np.flatnonzero(colors != UNCOLORED)
    if len(pos) == 0:
        return -1
    verts = np.concatenate([us[pos], vs[pos]])
    cols = np.concatenate([colors[pos], colors[pos]])
    where = np.concatenate([pos, pos])
    order = np.lexsort((where, cols, verts))
    v, c, w = verts[order], cols[order], where[order]
    dup = (v[1:] == v[:-1]) & (c[1:] == c[:-1])
    if not dup.any():
        return -1
    return int(w[1:][dup].min())


@dataclass
class ColoringResult:
    strategy: str
    us: np.ndarray
    vs: np.ndarray
    ids: np.ndarray          # edge index per arrival position
    color: np.ndarray        # color per arrival position
    stage: np.ndarray        # ST_* per arrival position
    round: np.ndarray        # 0-based round within the stage's strategy, -1 if none
    part: np.ndarray         # part index (random-order pipeline), -1 otherwise
    delta: int
    palette_bound: int       # total palette the strategy may ever use
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.check()

    def check(self) -> None:
        """Raise ProperViolation at the first arrival that broke properness."""
        bad = first_violation(self.us, self.vs, self.color)
        if bad >= 0:
            raise ProperViolation(
                f"{self.strategy}: improper color at arrival {bad} (edge {int(self.ids[bad])})",
                position=bad, edge=int(self.ids[bad]),
            )
        if np.any(self.color >= self.palette_bound):
            raise ProperViolation(f"{self.strategy}: color outside the declared palette")

    @property
    def m(self) -> int:
        return len(self.ids)

    @property
    def colors_by_edge(self) -> np.ndarray:
        out = np.full(self.m, UNCOLORED, dtype=np.int64)
        out[self.ids] = self.color
        return out

    @property
    def colors_used(self) -> int:
        c = self.color[self.color != UNCOLORED]
        return int(len(np.unique(c)))

    @property
    def max_color(self) -> int:
        return int(self.color.max()) if self.m else -1

    @property
    def uncolored_fraction(self) -> float:
        return float(np.mean(self.color == UNCOLORED)) if self.m else 0.0

    @property
    def reserve_fraction(self) -> float:
        return float(np.mean(self.stage == ST_RESERVE)) if self.m else 0.0

    def leftover_max_degree(self) -> int:
        """Max degree of the edges not colored by the main stage."""
        sel = self.stage != ST_MAIN
        if not sel.any():
            return 0
        return int(np.bincount(np.concatenate([self.us[sel], self.vs[sel]])).max())

    def breakdown(self) -> dict:
        """Distinct colors used per stage."""
        out = {}
        for code, name in ((ST_MAIN, "main"), (ST_RESERVE, "reserve")):
            c = self.color[self.stage == code]
            out[name] = int(len(np.unique(c)))
        return out

    def label(self, pos: int) -> str:
        st, r, k = int(self.stage[pos]), int(self.round[pos]), int(self.part[pos])
        if st == ST_RESERVE:
            return "reserve"
        if st == ST_BLANK:
            return "blank"
        if st == ST_NONE:
            return "uncolored"
        if self.strategy == "greedy":
            return "greedy"
        if self.strategy == "blank-eps":
            return "blank-eps"
        if self.strategy == "cascade":
            return f"cascade:{r + 1}"
        if self.strategy == "tree-coloring":
            return f"tree:{r + 1}"
        return f"part{k + 1}:round{r + 1}"

    def write_csv(self, fh) -> None:
        fh.write("# schema=1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge_index", "u", "v", "color", "strategy_round"])
        for pos in np.argsort(self.ids, kind="stable"):
            w.writerow([int(self.ids[pos]), int(self.us[pos]), int(self.vs[pos]),
                        int(self.color[pos]), self.label(pos)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _result(strategy, us, vs, ids, color, stage, rnd, part, delta, bound, **meta):
    m = len(ids)
    part = np.full(m, -1, dtype=np.int64) if part is None else part
    rnd = np.full(m, -1, dtype=np.int64) if rnd is None else rnd
    return ColoringResult(strategy, np.asarray(us), np.asarray(vs), np.asarray(ids),
                          color, stage.astype(np.int8), rnd, part, int(delta), int(bound), meta)


def _arrays(stream: EdgeStream):
    us, vs, ids = stream.arrays()
    return (np.ascontiguousarray(us, dtype=np.int64), np.ascontiguousarray(vs, dtype=np.int64),
            np.ascontiguousarray(ids, dtype=np.int64))


def _max_degree(us, vs, n) -> int:
    if len(us) == 0:
        return 0
    return int(np.bincount(np.concatenate([us, vs]), minlength=n).max())


# --------------------------------------------------------------------------
# strategies


def greedy_arrays(us, vs, n, offset: int = 0) -> np.ndarray:
    d = max(_max_degree(us, vs, n), 1)
    return _greedy(us, vs, n, offset, 2 * d - 1)


def greedy(stream: EdgeStream) -> ColoringResult:
    us, vs, ids = _arrays(stream)
    color = greedy_arrays(us, vs, stream.n)
    stage = np.where(color >= 0, ST_MAIN, ST_NONE)
    return _result("greedy", us, vs, ids, color, stage, None, None, stream.delta,
                   2 * stream.delta - 1)


@dataclass
class TreeColoringResult:
    color: np.ndarray        # round per arrival position, -1 if uncolored
    diverted: np.ndarray     # rounds skipped because an endpoint retired


def tree_coloring_arrays(us, vs, ids, n, delta: int, src: RandomSource) -> TreeColoringResult:
    """Round-parallel tree coloring; round ``r`` uses instance label ``r``."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    Cs = tree_c_schedule(delta)
    caps = np.ceil(Cs).astype(np.int64)
    keys = np.array([src.key(r) for r in range(delta)], dtype=np.uint64)
    color, diverted = _tree_coloring(np.ascontiguousarray(us, dtype=np.int64),
                                     np.ascontiguousarray(vs, dtype=np.int64),
                                     np.ascontiguousarray(ids, dtype=np.int64),
                                     n, Cs, caps, keys)
    return TreeColoringResult(color, diverted)


def tree_coloring(stream: EdgeStream, src: RandomSource) -> ColoringResult:
    us, vs, ids = _arrays(stream)
    tc = tree_coloring_arrays(us, vs, ids, stream.n, stream.delta, src)
    stage = np.where(tc.color >= 0, ST_MAIN, ST_NONE)
    return _result("tree-coloring", us, vs, ids, tc.color, stage, tc.color.copy(), None,
                   stream.delta, stream.delta, diverted_rounds=int(tc.diverted.sum()))


@dataclass(frozen=True)
class CascadeConfig:
    delta: int
    n: int
    delta_prime: int | None = None   # subsampling target; default: no subsampling
    small_delta: float = 0.05        # C = (e/(e-1) + small_delta) Δ'_i
    alpha: float | None = None       # default e/(e-1) + 3 small_delta
    beta: float = 4.0

    @property
    def alpha_value(self) -> float:
        return E_RATIO + 3.0 * self.small_delta if self.alpha is None else self.alpha


    @property
    def fallback_threshold(self) -> int:
        return math.ceil(self.beta * math.sqrt(self.delta * math.log(self.n)) - 1e-9)

    def schedule(self) -> list[int]:
        return dhat_schedule(self.delta, self.alpha_value, self.beta, self.n)

    def rounds(self) -> list[dict]:
        """Per-round subsample target, keep threshold (>1 means bypass) and C."""
        out = []
        for h in self.schedule():
            eff = h if self.delta_prime is None else min(self.delta_prime, h)
            thr = 2.0 if eff >= h else subsample_threshold(h, eff)
            out.append({"dhat": h, "delta_prime": eff, "threshold": thr,
                        "C": (E_RATIO + self.small_delta) * eff})
        return out

    def validate(self) -> None:
        if self.delta < 1 or self.n < 1:
            raise ValueError("delta and n must be >= 1")
        if self.small_delta <= 0:
            raise ValueError("small_delta must be > 0")
        if self.alpha_value < 1:
            raise ValueError("alpha must be >= 1")
        dp = self.delta_prime
        if dp is None:
            return
        if dp < 1:
            raise ValueError("delta_prime must be >= 1")
        if dp < min_subsample_degree() and any(h > dp for h in self.schedule()):
            raise ValueError(
                f"delta_prime={dp} would subsample but needs >= {min_subsample_degree()} "
                f"(or >= every round bound, the largest being {max(self.schedule())})"
            )


def cascade(stream: EdgeStream, src: RandomSource, config: CascadeConfig | None = None,
            labels=None) -> ColoringResult:
    """Matching cascade; round ``r`` uses instance labels ``2*labels[r]`` and
    ``2*labels[r]+1`` (default ``labels[r] = r``)."""
    cfg = config or CascadeConfig(stream.delta, stream.n)
    cfg.validate()
    rounds = cfg.rounds()
    L = len(rounds)
    labels = np.arange(L) if labels is None else np.asarray(labels)
    us, vs, ids = _arrays(stream)
    width = max(2 * stream.delta - 1, 1)
    color, stage = _cascade(
        us, vs, ids, stream.n,
        np.array([r["dhat"] for r in rounds], dtype=np.int64),
        np.array([r["delta_prime"] for r in rounds], dtype=np.int64),
        np.array([r["threshold"] for r in rounds], dtype=np.float64),
        np.array([r["C"] for r in rounds], dtype=np.float64),
        np.array([src.key(2 * int(k)) for k in labels], dtype=np.uint64),
        np.array([src.key(2 * int(k) + 1) for k in labels], dtype=np.uint64),
        width,
    )
    rnd = np.where(stage == ST_MAIN, color, -1)
    return _result("cascade", us, vs, ids, color, stage, rnd, None, stream.delta, L + width,
                   rounds=L)


def default_part_degree(delta: int, n: int, c: float = 1.0) -> int:
    """``max(2, round(c * min(ln Δ / ln ln Δ, sqrt(Δ / ln n))))``."""
    ld = math.log(delta) if delta > 1 else 0.0
    a = ld / math.log(ld) if ld > 1 else ld
    b = math.sqrt(delta / math.log(n)) if n > 1 else float(delta)
    return max(2, round(c * min(a, b)))


def part_palette(delta_prime: int) -> int:
    return delta_prime + math.ceil(split_slack(delta_prime))


def random_order_pipeline(stream: EdgeStream, src: RandomSource, delta_prime: int | None = None,
                          c: float = 1.0) -> ColoringResult:
    """Split, tree-color every part on its own palette, greedy reserve for the rest."""
    dp = default_part_degree(stream.delta, stream.n, c) if delta_prime is None else delta_prime
    us, vs, ids = _arrays(stream)
    sp = split_arrays(us, vs, ids, stream.n, stream.delta, dp, src.child(1).key(0))
    size = part_palette(dp)
    color = np.full(len(ids), UNCOLORED, dtype=np.int64)
    stage = np.zeros(len(ids), dtype=np.int8)
    rnd = np.full(len(ids), -1, dtype=np.int64)
    part = np.where(sp.part >= 0, sp.part, -1)
    for k in range(sp.T):
        sel = np.flatnonzero(sp.part == k)
        if len(sel) == 0:
            continue
        tc = tree_coloring_arrays(us[sel], vs[sel], ids[sel], stream.n, size, src.child(2, k))
        hit = tc.color >= 0
        color[sel[hit]] = k * size + tc.color[hit]
        stage[sel[hit]] = ST_MAIN
        rnd[sel[hit]] = tc.color[hit]
    left = np.flatnonzero(stage == 0)
    offset = sp.T * size
    if len(left):
        color[left] = greedy_arrays(us[left], vs[left], stream.n, offset)
        stage[left] = ST_RESERVE
    return _result("random-order", us, vs, ids, color, stage, rnd, part, stream.delta,
                   offset + max(2 * stream.delta - 1, 1), T=sp.T, part_palette=size,
                   delta_prime=dp, rejected=int(np.sum(sp.part < 0)))


def blank_eps(stream: EdgeStream, src: RandomSource, eps: float) -> ColoringResult:
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    us, vs, ids = _arrays(stream)
    color = _blank_eps(us, vs, ids, stream.n, stream.delta, float(eps), np.uint64(src.key(0)))
    stage = np.where(color >= 0, ST_MAIN, ST_BLANK)
    return _result("blank-eps", us, vs, ids, color, stage, None, None, stream.delta, stream.delta)


def run_strategy(name: str, stream: EdgeStream, src: RandomSource, **params) -> ColoringResult:
    if name == "greedy":
        return greedy(stream)
    if name == "cascade":
        return cascade(stream, src, CascadeConfig(stream.delta, stream.n, **params))
    if name == "tree-coloring":
        return tree_coloring(stream, src)
    if name == "random-order":
        return random_order_pipeline(stream, src, **params)
    if name == "blank-eps":
        return blank_eps(stream, src, params.get("eps", 0.1))
    raise ValueError(f"unknown strategy {name!r}; expected one of {STRATEGIES}")
