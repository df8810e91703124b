import json
import math

import numpy as np
import pytest

from onlinecolor import harness
from onlinecolor.coloring import ProperViolation
from onlinecolor.graph import GeneratorSpec
from onlinecolor.harness import (ExperimentConfig, InvariantViolation, binomial_ci, run_experiment,
                                 trial_seeds, within_sigmas)

REG16 = GeneratorSpec("random-regular", n=2000, d=16, order="uniformly-random")


def test_greedy_stays_under_two_delta():
    rep = run_experiment(ExperimentConfig(REG16, "greedy", trials=5, seed=1))
    assert rep.aggregate["colors_used"]["max"] <= 31
    assert len(rep.trials) == 5


def test_reports_identical_across_thread_counts():
    cfg1 = ExperimentConfig(REG16, "cascade", trials=4, seed=7, threads=1)
    cfg4 = ExperimentConfig(REG16, "cascade", trials=4, seed=7, threads=4)
    a, b = run_experiment(cfg1), run_experiment(cfg4)
    assert a.to_json() == b.to_json()
    assert a.to_csv() == b.to_csv()


def test_timing_is_opt_in():
    rep = run_experiment(ExperimentConfig(GeneratorSpec("path", n=10), "greedy", timing=True))
    assert "wall_clock" in rep.trials[0]
    rep = run_experiment(ExperimentConfig(GeneratorSpec("path", n=10), "greedy"))
    assert "wall_clock" not in rep.trials[0]


def test_trial_seeds_are_independent_of_trial_count():
    assert trial_seeds(5, 3)[0] == trial_seeds(5, 3)[0]
    assert trial_seeds(5, 3)[0] != trial_seeds(5, 4)[0]
    r1 = run_experiment(ExperimentConfig(REG16, "greedy", trials=2, seed=3))
    r2 = run_experiment(ExperimentConfig(REG16, "greedy", trials=3, seed=3))
    assert r1.trials == r2.trials[:2]


def test_violation_is_reported_with_context(monkeypatch):
    def broken(name, stream, src, **kw):
        raise ProperViolation("clash", 4, 17)
    monkeypatch.setattr(harness, "run_strategy", broken)
    with pytest.raises(InvariantViolation) as info:
        run_experiment(ExperimentConfig(REG16, "greedy", seed=9))
    assert info.value.edge == 17 and info.value.trial == 0
    assert info.value.seed == trial_seeds(9, 0)[0]


def test_matcher_experiment_on_trees():
    spec = GeneratorSpec("random-tree", n=300, max_degree=6, order="uniformly-random")
    cfg = ExperimentConfig(spec, "matcher", params={"C": 12.0}, trials=4, runs=500, seed=2)
    rep = run_experiment(cfg)
    matched = sum(t["matched"] for t in rep.trials)
    total = sum(t["edge_trials"] for t in rep.trials)
    assert within_sigmas(matched, total, 1 / 12)
    p, lo, hi = rep.intervals["match_frequency"]
    assert lo <= p <= hi


def test_tree_coloring_uncolored_fraction_recorded():
    rep = run_experiment(ExperimentConfig(REG16, "tree-coloring", trials=2, seed=4))
    frac = rep.aggregate["uncolored_fraction"]["mean"]
    assert 0.0 < frac < 1.0
    assert "uncolored_fraction" in rep.intervals


def test_cycle_frequency_scan():
    spec = GeneratorSpec("random-regular", n=500, d=4)
    rep = run_experiment(ExperimentConfig(spec, "greedy", cycle_radius=2, cycle_keep=0.5, seed=1))
    t = rep.trials[0]
    assert 0 <= t["cycle_edges"] <= t["cycle_scanned"] < t["m"]


def test_config_validation():
    with pytest.raises(ValueError):
        run_experiment(ExperimentConfig(REG16, "nope"))
    with pytest.raises(ValueError):
        run_experiment(ExperimentConfig(REG16, trials=0))
    with pytest.raises(ValueError):
        run_experiment(ExperimentConfig(REG16, cycle_keep=0.0))


def test_binomial_ci():
    p, lo, hi = binomial_ci(50, 100)
    assert p == 0.5 and lo == pytest.approx(0.3) and hi == pytest.approx(0.7)
    assert binomial_ci(0, 10) == (0.0, 0.0, 0.0)
    assert all(math.isnan(x) for x in binomial_ci(0, 0))


def test_report_serialization():
    rep = run_experiment(ExperimentConfig(GeneratorSpec("path", n=6), "greedy", trials=2))
    d = json.loads(rep.to_json())
    assert set(d) == {"aggregate", "config", "intervals", "trials"}
    assert "threads" not in d["config"]
    lines = rep.to_csv().splitlines()
    assert lines[0] == "# schema=1" and lines[1].startswith("row,")
    assert [l.split(",")[0] for l in lines[2:]] == ["trial0", "trial1", "mean", "min", "max"]
