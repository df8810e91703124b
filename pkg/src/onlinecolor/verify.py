"""Named self-check suites run with fixed seeds (``onlinecolor verify <name>``)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import game, recurrence as rec
from .graph import GeneratorSpec, generate
from .harness import within_sigmas
from .matcher import match_counts
from .rng import RandomSource
from .sparsify import keep_counts, split_stream, subsample_stream


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}" + (f": {self.detail}" if self.detail else "")


def recurrence_suite() -> list[Check]:
    out = []
    worst = -np.inf
    eps = np.round(np.arange(0, 1001) * 1e-3, 12)
    for d in np.round(np.arange(0, 10) * 0.05, 12):
        lhs = rec.f_delta(d, rec.f_delta(d, eps))
        worst = max(worst, float(np.max(lhs - (1 - d) * eps)))
    out.append(Check("two-step contraction grid", worst <= 1e-12, f"max excess {worst:.3e}"))

    ok = True
    for lm in np.round(np.arange(0.05, 3.0001, 0.05), 12):
        x = rec.period2_fixed_point(lm)
        if lm <= 1.0:
            ok &= x is None
        elif lm >= 1.05:
            ok &= x is not None and rec.period2_residual(lm, x) <= 1e-10
    out.append(Check("period-2 phase boundary", bool(ok)))
    cc = rec.critical_C(100)
    out.append(Check("critical C at 100", abs(cc - 158.19767) <= 1e-5, f"{cc:.8f}"))

    gaps = [rec.riemann_gap(k * D, D) * k * D for D in (25, 100, 1000) for k in (1.6, 2, 10)]
    out.append(Check("riemann gap <= 5/C", max(gaps) <= 5.0, f"max C*gap {max(gaps):.4f}"))

    p = rec.RecurrenceParams.from_C(1.64 * 25, 25)
    prof = rec.envelope_iterate(p, 41)
    two = rec.two_step_bound(p, prof)
    ind = rec.induction_bound(p, 41)
    even = range(2, 42, 2)
    ok = all(prof.eps_max[l] <= two[l] + 1e-9 and prof.eps_max[l] <= ind[l] + 1e-9 for l in even)
    out.append(Check("envelope under two-step and closed-form bounds", ok))
    return out


def game_suite(trees: int = 100) -> list[Check]:
    rng = np.random.default_rng(20240611)
    diff = 0.0
    mc_ok = True
    for i in range(trees):
        t = game.random_witness_tree(rng, int(rng.integers(1, 13)), int(rng.integers(0, 4)))
        C = t.default_C()
        a = rng.integers(0, 2, t.n_boundary)
        ex = game.exact_match_probability(t, a, C)
        dp = game.dp_match_probability(t, a, C)
        diff = max(diff, abs(ex - dp))
        if i < 20:
            runs = 20000
            hits = game.simulate_game(t, a, C, runs, seed=i)
            mc_ok &= abs(hits / runs - dp) <= 4 * math.sqrt(max(dp * (1 - dp), 1e-12) / runs) + 1e-12
    out = [Check("enumeration = dp", diff <= 1e-12, f"max diff {diff:.2e}"),
           Check("Monte Carlo within 4 sigma", bool(mc_ok))]
    mono = True
    sign = True
    for _ in range(trees // 2):
        g = int(rng.choice([1, 3, 5]))
        t = game.random_witness_tree(rng, 16, g, max_boundary=8)
        C = t.default_C()
        vals = [game.dp_match_probability(t, game.assignment_from_mask(t, m), C)
                for m in range(2 ** t.n_boundary)]
        am = game.adaptive_min_probability(t, C)
        mono &= min(vals) >= vals[0] - 1e-12 and abs(am - vals[0]) <= 1e-12
        for k in t.boundary_nodes:
            s = game.boundary_sensitivity(t, game.ALL_UNMATCHED, C, k)
            sign &= s * (-1) ** int(t.node_depth[k]) >= -1e-15
    out.append(Check("all-unmatched minimizes and equals adaptive minimum", bool(mono)))
    out.append(Check("boundary sensitivity sign alternates with depth", bool(sign)))
    return out


def sparsifier_suite(trials: int = 20000) -> list[Check]:
    st = generate(GeneratorSpec("random-regular", n=400, d=200), 11)
    dp = 50
    target = int(st.order[st.m // 2])
    u, v = st.graph.edges[target]
    us, vs, _ = st.arrays()
    pos = np.flatnonzero((us == u) | (us == v) | (vs == u) | (vs == v))
    pos = pos[pos <= st.rank[target]]
    counts = keep_counts(st, dp, seed=5, runs=trials, positions=pos)
    k = int(counts[np.searchsorted(pos, st.rank[target])])
    hi = dp / st.delta
    lo = max((1 - 5 * math.sqrt(math.log(dp) / dp)) * hi, 0.0)
    sd = math.sqrt(hi * (1 - hi) / trials)
    freq = k / trials
    out = [Check("keep frequency inside band", lo - 4 * sd <= freq <= hi + 4 * sd,
                 f"{freq:.4f} in [{lo:.4f}, {hi:.4f}]")]
    src = RandomSource(9)
    cap_ok = True
    for i in range(5):
        res = subsample_stream(st, dp, src, i)
        kept = st.graph.edges[res.kept_ids]
        cap_ok &= int(np.bincount(kept.ravel(), minlength=st.n).max()) <= dp
    out.append(Check("subsample degree cap", bool(cap_ok)))
    T = split_stream(st, dp, src, 0).T
    colors = np.zeros(T, dtype=np.int64)
    runs = 2000
    e_pos = int(st.rank[target])
    cap_hit = True
    for i in range(runs):
        res = split_stream(st, dp, src, i)
        colors[res.color[e_pos]] += 1
        if i < 10:
            for c in range(T):
                sel = res.part == c
                deg = np.bincount(np.concatenate([us[sel], vs[sel]]), minlength=st.n)
                cap_hit &= deg.max() <= res.cap
    uni = all(within_sigmas(int(c), runs, 1.0 / T) for c in colors)
    out.append(Check("split color uniform", uni, str(colors.tolist())))
    out.append(Check("split per-color cap", bool(cap_hit)))
    return out


def tree_exact_suite(trees: int = 50, runs: int = 400) -> list[Check]:
    diff = 0.0
    hits = total = 0
    p_sum = 0.0
    for s in range(trees):
        st = generate(GeneratorSpec("random-tree", n=200, max_degree=8, order="uniformly-random"), s)
        C = st.delta + 2 * math.sqrt(st.delta) + 1
        e = int(st.order[-1])
        t = game.build_witness_tree(st, e, st.n)
        diff = max(diff, abs(game.dp_match_probability(t, None, C) - 1 / C))
        us, vs, ids = st.arrays()
        cnt = match_counts(us, vs, ids, st.n, C, seed=1000 + s, runs=runs)
        hits += int(cnt.sum())
        total += st.m * runs
        p_sum += st.m * runs / C
    p0 = p_sum / total
    return [Check("dp = 1/C on trees", diff <= 1e-12, f"max diff {diff:.2e}"),
            Check("pooled match frequency within 4 sigma of 1/C", within_sigmas(hits, total, p0),
                  f"{hits / total:.5f} vs {p0:.5f}")]


def witness_equivalence_suite(instances: int = 200) -> list[Check]:
    rng = np.random.default_rng(77)
    ok = True
    for i in range(instances):
        st = generate(GeneratorSpec("erdos-renyi", n=50, p=0.08, max_degree=6,
                                    order="uniformly-random"), int(rng.integers(2**31)))
        if st.m == 0:
            continue
        e = int(rng.integers(st.m))
        for strat in ("matcher", "tree-coloring"):
            ok &= game.witness_equivalence_check(st, e, int(rng.integers(2**31)), strategy=strat)
    return [Check("witness-set coupling", bool(ok))]


SUITES = {
    "recurrence": recurrence_suite,
    "game": game_suite,
    "sparsifier": sparsifier_suite,
    "tree-exact": tree_exact_suite,
    "witness-equivalence": witness_equivalence_suite,
}


def verify_suite(name: str) -> list[Check]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    return SUITES[name]()
