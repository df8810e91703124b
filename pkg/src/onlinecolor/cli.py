"""Command-line interface.  Exit codes: 0 pass, 1 invariant violation, 2 usage."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys

import numpy as np

from . import game, recurrence as rec
from .coloring import STRATEGIES, ProperViolation, run_strategy
from .graph import GENERATOR_KINDS, ORDER_MODES, GeneratorSpec, format_stream, generate, read_stream
from .harness import EXPERIMENT_STRATEGIES, ExperimentConfig, InvariantViolation, run_experiment
from .matcher import Outcome, match_stream, min_sampling_parameter
from .rng import RandomSource
from .sparsify import SubsampleOutcome, split_stream, subsample_stream
from .verify import SUITES, verify_suite

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _global_args(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="root seed (u64)")
    p.add_argument("--format", choices=("csv", "json"), default=d("csv"))
    p.add_argument("--out", default=d(None), help="output path (default stdout)")
    p.add_argument("--threads", type=int, default=d(1))


def _source_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="stream file ('n m delta' header, one 'u v' per line)")
    p.add_argument("--kind", choices=GENERATOR_KINDS, help="generate instead of reading --input")
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--d", type=int, default=0, help="degree / branching")
    p.add_argument("--depth", type=int, default=0)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--max-degree", type=int, default=0)
    p.add_argument("--order", choices=ORDER_MODES, default="as-generated")


def _spec(a) -> GeneratorSpec:
    return GeneratorSpec(a.kind, n=a.n, d=a.d, depth=a.depth, p=a.p,
                         max_degree=a.max_degree, order=a.order)


def _stream(a):
    if a.input:
        with open(a.input) as fh:
            return read_stream(fh)
    if a.kind:
        return generate(_spec(a), a.seed)
    raise UsageError("give --input or --kind")


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write("# schema=1\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# subcommands


def cmd_gen(a) -> str:
    if not a.kind:
        raise UsageError("gen needs --kind")
    st = generate(_spec(a), a.seed)
    return format_stream(st, comment=f"kind={a.kind} seed={a.seed}")


def cmd_match(a) -> str:
    st = _stream(a)
    C = a.C if a.C is not None else min_sampling_parameter(st.delta) + 1.0
    res = match_stream(st, C, RandomSource(a.seed))
    us, vs, ids = st.arrays()
    if a.format == "json":
        return _dump({"C": C, "m": st.m, "matched": int(res.matched_mask.sum()),
                      "matching": sorted(int(x) for x in res.matching)})
    rows = [(int(ids[i]), int(us[i]), int(vs[i]), Outcome(int(res.outcomes[i])).name.lower(),
             repr(float(res.thresholds[i]))) for i in range(st.m)]
    return _rows_csv(["edge_index", "u", "v", "outcome", "accept_probability"], rows)


def cmd_subsample(a) -> str:
    st = _stream(a)
    res = subsample_stream(st, a.delta_prime, RandomSource(a.seed))
    us, vs, ids = st.arrays()
    if a.format == "json":
        return _dump({"delta": st.delta, "delta_prime": a.delta_prime, "m": st.m,
                      "kept": sorted(int(x) for x in res.kept_ids)})
    rows = [(int(ids[i]), int(us[i]), int(vs[i]), SubsampleOutcome(int(res.outcomes[i])).name.lower())
            for i in range(st.m)]
    return _rows_csv(["edge_index", "u", "v", "outcome"], rows)


def cmd_split(a) -> str:
    st = _stream(a)
    res = split_stream(st, a.delta_prime, RandomSource(a.seed))
    us, vs, ids = st.arrays()
    if a.format == "json":
        return _dump({"T": res.T, "cap": res.cap, "rejected": int(np.sum(res.part < 0)),
                      "part_sizes": [int(np.sum(res.part == k)) for k in range(res.T)]})
    rows = [(int(ids[i]), int(us[i]), int(vs[i]), int(res.color[i]), int(res.part[i])) for i in range(st.m)]
    return _rows_csv(["edge_index", "u", "v", "color", "part"], rows)


def _strategy_params(a) -> dict:
    p = {}
    if a.strategy == "cascade":
        for k in ("alpha", "beta", "delta_prime", "small_delta"):
            if getattr(a, k) is not None:
                p[k] = getattr(a, k)
    elif a.strategy == "random-order":
        if a.delta_prime is not None:
            p["delta_prime"] = a.delta_prime
        if a.c is not None:
            p["c"] = a.c
    elif a.strategy == "blank-eps":
        p["eps"] = a.eps
    elif a.strategy == "matcher" and a.C is not None:
        p["C"] = a.C
    return p


def cmd_color(a) -> str:
    st = _stream(a)
    res = run_strategy(a.strategy, st, RandomSource(a.seed), **_strategy_params(a))
    if a.format == "json":
        return _dump({"strategy": a.strategy, "delta": st.delta, "m": st.m,
                      "colors_used": res.colors_used, "palette_bound": res.palette_bound,
                      "uncolored_fraction": res.uncolored_fraction, "breakdown": res.breakdown(),
                      "meta": res.meta})
    return res.to_csv()


def cmd_recurrence(a) -> str:
    if a.mode == "plan":
        if a.delta_big is None and a.log_delta is None:
            raise UsageError("recurrence plan needs --delta-big or --log-delta")
        out = rec.plan_parameters(a.delta_big, a.n, log_delta=a.log_delta)
        return _dump(dataclasses.asdict(out))
    if a.mode == "crossover":
        return _dump({"log_delta": rec.feasibility_crossover()})
    if a.C is None or a.delta_cap is None:
        raise UsageError(f"recurrence {a.mode} needs --C and --delta-cap")
    if a.mode == "riemann":
        return _dump({"C": a.C, "delta_cap": a.delta_cap, "gap": rec.riemann_gap(a.C, a.delta_cap)})
    if a.mode == "complete":
        e = rec.complete_tree_errors(a.C, a.delta_cap, a.g)
        rows = [(lvl, repr(float(x))) for lvl, x in enumerate(e)]
        if a.format == "json":
            return _dump({"eps": [float(x) for x in e]})
        return _rows_csv(["level", "eps"], rows)
    if a.mode == "sharp":
        prof = rec.sharp_envelope(a.C, a.delta_cap, a.g)
        two = ind = np.full(prof.levels + 1, np.nan)
    else:
        params = rec.RecurrenceParams.from_C(a.C, a.delta_cap)
        prof = rec.envelope_iterate(params, a.g)
        two = rec.two_step_bound(params, prof)
        ind = rec.induction_bound(params, a.g)
    if a.format == "json":
        clean = lambda xs: [None if math.isnan(x) else float(x) for x in xs]
        return _dump({"eps_min": clean(prof.eps_min), "eps_max": clean(prof.eps_max),
                      "two_step": clean(two), "closed_form": clean(ind)})
    rows = [(l, repr(float(prof.eps_min[l])), repr(float(prof.eps_max[l])),
             "" if math.isnan(two[l]) else repr(float(two[l])),
             "" if math.isnan(ind[l]) else repr(float(ind[l]))) for l in range(prof.levels + 1)]
    return _rows_csv(["level", "eps_min", "eps_max", "two_step", "closed_form"], rows)


def cmd_threshold(a) -> str:
    out = {}
    if a.delta_prime is not None:
        out["critical_C"] = rec.critical_C(a.delta_prime)
    if a.lam is not None:
        x = rec.period2_fixed_point(a.lam)
        out["lambda"] = a.lam
        out["period2_root"] = x
        out["residual"] = None if x is None else rec.period2_residual(a.lam, x)
    if not out:
        raise UsageError("threshold needs --delta-prime and/or --lambda")
    return _dump(out)


def cmd_game(a) -> str:
    tree, raw = game.load_instance(a.instance)
    C = a.C if a.C is not None else raw.get("C")
    if C is None:
        raise UsageError("game instance needs a C field or --C")
    fixed = raw.get("decisions", game.ALL_UNMATCHED)
    out = {
        "dp": game.dp_match_probability(tree, fixed, C),
        "all_unmatched": game.dp_match_probability(tree, game.ALL_UNMATCHED, C),
        "all_matched": game.dp_match_probability(tree, game.ALL_MATCHED, C),
        "enumeration": (game.exact_match_probability(tree, fixed, C)
                        if tree.n_edges <= game.EXACT_EDGE_CAP else None),
        "adaptive_min": (game.adaptive_min_probability(tree, C)
                         if tree.n_edges <= game.ADAPTIVE_EDGE_CAP else None),
    }
    return _dump(out)


def cmd_experiment(a) -> str:
    if not a.kind:
        raise UsageError("experiment needs --kind")
    cfg = ExperimentConfig(_spec(a), a.strategy, _strategy_params(a), trials=a.trials, seed=a.seed,
                           runs=a.runs, cycle_radius=a.cycle_radius, cycle_keep=a.cycle_keep,
                           threads=a.threads, timing=a.timing)
    rep = run_experiment(cfg)
    return rep.to_json() + "\n" if a.format == "json" else rep.to_csv()


def cmd_verify(a) -> str:
    checks = verify_suite(a.suite)
    a._failed = not all(c.passed for c in checks)
    if a.format == "json":
        return _dump({"suite": a.suite, "passed": not a._failed,
                      "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks]})
    return "".join(c.line() + "\n" for c in checks)


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="onlinecolor", description=__doc__)
    _global_args(p, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_args(common, suppress=True)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen", parents=[common], help="generate an edge stream")
    _source_args(s)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("match", parents=[common], help="run the online matcher")
    _source_args(s)
    s.add_argument("--C", type=float)
    s.set_defaults(func=cmd_match)

    for name, func in (("subsample", cmd_subsample), ("split", cmd_split)):
        s = sub.add_parser(name, parents=[common], help=f"run {name} on a stream")
        _source_args(s)
        s.add_argument("--delta-prime", type=int, required=True)
        s.set_defaults(func=func)

    for name, func, choices, hlp in (
            ("color", cmd_color, STRATEGIES, "edge-color a stream with one strategy"),
            ("experiment", cmd_experiment, EXPERIMENT_STRATEGIES, "repeated trials with aggregate report")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        _source_args(s)
        s.add_argument("--strategy", choices=choices, default="greedy")
        s.add_argument("--alpha", type=float)
        s.add_argument("--beta", type=float)
        s.add_argument("--small-delta", type=float)
        s.add_argument("--delta-prime", type=int)
        s.add_argument("--c", type=float)
        s.add_argument("--eps", type=float, default=0.1)
        s.add_argument("--C", type=float)
        if name == "experiment":
            s.add_argument("--trials", type=int, default=1)
            s.add_argument("--runs", type=int, default=1)
            s.add_argument("--cycle-radius", type=int)
            s.add_argument("--cycle-keep", type=float, default=1.0)
            s.add_argument("--timing", action="store_true", help="include wall-clock (breaks byte-identity)")
        s.set_defaults(func=func)

    s = sub.add_parser("recurrence", parents=[common], help="error envelopes and parameter planning")
    s.add_argument("mode", choices=("envelope", "sharp", "complete", "riemann", "plan", "crossover"))
    s.add_argument("--C", type=float)
    s.add_argument("--delta-cap", type=int)
    s.add_argument("--g", type=int, default=41)
    s.add_argument("--delta-big", type=float)
    s.add_argument("--log-delta", type=float, help="ln Δ, for degrees too large to write")
    s.add_argument("--n", type=int, default=10**6)
    s.set_defaults(func=cmd_recurrence)

    s = sub.add_parser("threshold", parents=[common], help="critical C and period-2 roots")
    s.add_argument("--delta-prime", type=float)
    s.add_argument("--lambda", dest="lam", type=float)
    s.set_defaults(func=cmd_threshold)

    s = sub.add_parser("game", parents=[common], help="match probabilities of a witness-tree instance")
    s.add_argument("instance")
    s.add_argument("--C", type=float)
    s.set_defaults(func=cmd_game)

    s = sub.add_parser("verify", parents=[common], help="run a named self-check suite")
    s.add_argument("suite", choices=sorted(SUITES))
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        text = a.func(a)
    except (UsageError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvariantViolation, ProperViolation) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(text)
    else:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            # reader went away (e.g. piped into head); not an error
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    return EXIT_VIOLATION if getattr(a, "_failed", False) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
