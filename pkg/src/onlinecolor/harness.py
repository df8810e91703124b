"""Experiment runner: trials, inline invariant checks, aggregation, reports."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .coloring import STRATEGIES, ProperViolation, run_strategy
from .graph import EdgeStream, GeneratorSpec, cycle_flags, generate
from .matcher import match_counts, min_sampling_parameter, run_matching
from .rng import RandomSource
from .sparsify import substream, uniform_keep_mask

SIGMAS = 4.0
EXPERIMENT_STRATEGIES = STRATEGIES + ("matcher",)


class InvariantViolation(RuntimeError):
    def __init__(self, msg: str, trial: int, seed: int, edge: int):
        super().__init__(f"{msg} (trial {trial}, seed {seed}, edge {edge})")
        self.trial = trial
        self.seed = seed
        self.edge = edge


@dataclass
class ExperimentConfig:
    generator: GeneratorSpec
    strategy: str = "greedy"
    params: dict = field(default_factory=dict)
    trials: int = 1
    seed: int = 0
    runs: int = 1                 # matcher repetitions per generated graph
    cycle_radius: int | None = None
    cycle_keep: float = 1.0       # independent keep probability before the cycle scan
    threads: int = 1
    timing: bool = False

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.strategy not in EXPERIMENT_STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {EXPERIMENT_STRATEGIES}")
        if not 0.0 < self.cycle_keep <= 1.0:
            raise ValueError("cycle_keep must lie in (0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("threads")
        d.pop("timing")
        return d


def binomial_ci(successes: int, total: int, sigmas: float = SIGMAS) -> tuple[float, float, float]:
    """Point estimate and ``±sigmas`` normal band, clipped to [0, 1]."""
    if total <= 0:
        return float("nan"), float("nan"), float("nan")
    p = successes / total
    half = sigmas * math.sqrt(max(p * (1.0 - p), 0.0) / total)
    return p, max(p - half, 0.0), min(p + half, 1.0)


def within_sigmas(successes: int, total: int, p0: float, sigmas: float = SIGMAS) -> bool:
    """Is the observed frequency within ``sigmas`` standard errors of ``p0``?"""
    sd = math.sqrt(p0 * (1.0 - p0) / total)
    return abs(successes / total - p0) <= sigmas * sd


@dataclass
class Report:
    config: dict
    trials: list
    aggregate: dict
    intervals: dict

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "trials": self.trials,
                           "aggregate": self.aggregate, "intervals": self.intervals},
                          indent=2, sort_keys=True, default=_jsonable)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# schema=1\n")
        keys = sorted({k for t in self.trials for k in t})
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row"] + keys)
        for t in self.trials:
            w.writerow([f"trial{t['trial']}"] + [_fmt(t.get(k)) for k in keys])
        for stat in ("mean", "min", "max"):
            w.writerow([stat] + [_fmt(self.aggregate.get(k, {}).get(stat)) for k in keys])
        for name, (p, lo, hi) in sorted(self.intervals.items()):
            buf.write(f"# ci {name} {p!r} {lo!r} {hi!r}\n")
        return buf.getvalue()


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(type(x))


def _fmt(x):
    if x is None:
        return ""
    return repr(float(x)) if isinstance(x, float) else str(x)


def trial_seeds(seed: int, trial: int) -> tuple[int, RandomSource]:
    """Graph seed and algorithm random source of one trial."""
    root = RandomSource(seed)
    return root.child(trial, 0).seed, root.child(trial, 1)


def _cycle_frequency(stream: EdgeStream, radius: int, keep: float, src: RandomSource) -> tuple[int, int]:
    if keep < 1.0:
        mask = uniform_keep_mask(stream, keep, src.child(7))
        ids = stream.order[mask[stream.order]]
        sub = substream(stream, ids)
    else:
        sub = stream
    if sub.m == 0:
        return 0, 0
    flags = cycle_flags(sub.graph, np.arange(sub.m), radius)
    return int(flags.sum()), int(sub.m)


def _run_trial(cfg: ExperimentConfig, trial: int) -> dict:
    gseed, src = trial_seeds(cfg.seed, trial)
    t0 = time.perf_counter()
    stream = generate(cfg.generator, gseed)
    out = {"trial": trial, "n": stream.n, "m": stream.m, "delta": stream.delta}
    if cfg.strategy == "matcher":
        C = cfg.params.get("C")
        if C is None:
            C = min_sampling_parameter(stream.delta) + 1.0
        us, vs, ids = stream.arrays()
        counts = match_counts(us, vs, ids, stream.n, C, src.seed, cfg.runs)
        if np.any(counts > cfg.runs):
            raise InvariantViolation("matcher count exceeds runs", trial, gseed, int(ids[np.argmax(counts)]))
        out.update(C=float(C), runs=cfg.runs, matched=int(counts.sum()),
                   edge_trials=int(stream.m * cfg.runs),
                   match_frequency=float(counts.sum() / max(stream.m * cfg.runs, 1)))
        # validity of the matching is checked on the first run explicitly
        res = run_matching(us, vs, ids, stream.n, C, src.key(0))
        sel = stream.graph.edges[res.matching]
        if len(np.unique(sel)) != sel.size:
            raise InvariantViolation("matcher produced a non-matching", trial, gseed, -1)
    else:
        try:
            res = run_strategy(cfg.strategy, stream, src, **cfg.params)
        except ProperViolation as exc:
            raise InvariantViolation(str(exc), trial, gseed, exc.edge) from exc
        if cfg.strategy == "greedy" and res.max_color > 2 * stream.delta - 2:
            raise InvariantViolation("greedy exceeded 2Δ-1 colors", trial, gseed,
                                     int(res.ids[np.argmax(res.color)]))
        out.update(colors_used=res.colors_used,
                   colors_over_delta=res.colors_used / stream.delta,
                   palette_bound=res.palette_bound,
                   uncolored=int(np.sum(res.color < 0)),
                   uncolored_fraction=res.uncolored_fraction,
                   reserve_fraction=res.reserve_fraction,
                   leftover_max_degree=res.leftover_max_degree())
        for k, v in res.meta.items():
            out[f"meta_{k}"] = v
    if cfg.cycle_radius is not None:
        bad, tot = _cycle_frequency(stream, cfg.cycle_radius, cfg.cycle_keep, src)
        out.update(cycle_edges=bad, cycle_scanned=tot,
                   cycle_frequency=bad / tot if tot else 0.0)
    if cfg.timing:
        out["wall_clock"] = time.perf_counter() - t0
    return out


def run_experiment(cfg: ExperimentConfig) -> Report:
    cfg.validate()
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            trials = list(ex.map(lambda t: _run_trial(cfg, t), range(cfg.trials)))
    else:
        trials = [_run_trial(cfg, t) for t in range(cfg.trials)]
    agg = {}
    keys = sorted({k for t in trials for k, v in t.items() if isinstance(v, (int, float)) and k != "trial"})
    for k in keys:
        vals = np.array([t[k] for t in trials if k in t], dtype=float)
        agg[k] = {"mean": float(vals.mean()), "min": float(vals.min()), "max": float(vals.max()),
                  "std": float(vals.std())}
    ci = {}
    if cfg.strategy == "matcher":
        ci["match_frequency"] = binomial_ci(sum(t["matched"] for t in trials),
                                            sum(t["edge_trials"] for t in trials))
    elif cfg.strategy in ("tree-coloring", "blank-eps"):
        ci["uncolored_fraction"] = binomial_ci(sum(t["uncolored"] for t in trials),
                                               sum(t["m"] for t in trials))
    if cfg.cycle_radius is not None:
        ci["cycle_frequency"] = binomial_ci(sum(t["cycle_edges"] for t in trials),
                                            sum(t["cycle_scanned"] for t in trials))
    return Report(cfg.to_dict(), trials, agg, ci)
