"""Metrics and the benchmark harness."""

import json

import numpy as np
import pytest

from netinf.errors import ParameterError
from netinf.evaluate import (
    BenchmarkConfig,
    Condition,
    fitness,
    run_benchmark,
    run_trial,
    score_topology,
    summarize,
    trial_seed,
)
from netinf.netsim import NO_NOISE, DsfStructure
from netinf.vi import ViConfig


def _structure(q, p):
    return DsfStructure(q_adj=np.array(q, dtype=bool),
                        p_adj=np.array(p, dtype=bool))


def _truth_10():
    q = np.zeros((4, 4), dtype=bool)
    q[0, 1] = q[0, 2] = q[1, 2] = q[1, 3] = q[2, 3] = q[3, 0] = True
    p = np.zeros((4, 4), dtype=bool)
    p[0, 0] = p[1, 1] = p[2, 2] = p[3, 3] = True
    return _structure(q, p)


def test_score_topology_examples():
    truth = _truth_10()
    assert truth.n_links == 10
    # 10 inferred, 8 correct
    inferred = _structure(truth.q_adj.copy(), truth.p_adj.copy())
    inferred.q_adj[0, 1] = False
    inferred.q_adj[1, 0] = True          # one wrong link
    inferred.p_adj[0, 0] = False
    inferred.p_adj[0, 1] = True          # another wrong link
    tpr, prec = score_topology(truth, inferred)
    assert tpr == pytest.approx(0.8)
    assert prec == pytest.approx(0.8)


def test_score_topology_subset():
    truth = _truth_10()
    inferred = _structure(truth.q_adj.copy(), truth.p_adj.copy())
    inferred.q_adj[0, 1] = inferred.q_adj[0, 2] = False
    inferred.q_adj[1, 2] = inferred.q_adj[1, 3] = False
    tpr, prec = score_topology(truth, inferred)
    assert tpr == pytest.approx(0.6)
    assert prec == pytest.approx(1.0)


def test_score_topology_empty_inferred():
    truth = _truth_10()
    empty = _structure(np.zeros((4, 4)), np.zeros((4, 4)))
    tpr, prec = score_topology(truth, empty)
    assert tpr == 0.0
    assert prec == 1.0


def test_score_topology_dimension_mismatch():
    truth = _truth_10()
    bad = _structure(np.zeros((3, 3)), np.zeros((3, 4)))
    with pytest.raises(ParameterError):
        score_topology(truth, bad)


def test_score_topology_relabeling_invariance():
    rng = np.random.default_rng(0)
    truth = _structure(rng.random((5, 5)) < 0.3, rng.random((5, 2)) < 0.4)
    inferred = _structure(rng.random((5, 5)) < 0.3, rng.random((5, 2)) < 0.4)
    base = score_topology(truth, inferred)
    perm = rng.permutation(5)
    truth_p = _structure(truth.q_adj[np.ix_(perm, perm)], truth.p_adj[perm])
    inf_p = _structure(inferred.q_adj[np.ix_(perm, perm)], inferred.p_adj[perm])
    assert score_topology(truth_p, inf_p) == base


def test_fitness_examples():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    assert fitness([y], [y])[0] == pytest.approx(100.0)
    ybar = np.full(4, y.mean())
    assert fitness([y], [ybar])[0] == pytest.approx(0.0)
    # ||y - yhat|| = 1, ||y - ybar|| = 4 -> 75
    base = np.zeros(16)
    target = base.copy()
    target[0] = 4.0                      # ||y - ybar|| with mean removed...
    y2 = np.array([2.0, -2.0, 2.0, -2.0])            # mean 0, norm 4
    yhat = y2 - np.array([1.0, 0.0, 0.0, 0.0])       # residual norm 1
    assert fitness([y2], [yhat])[0] == pytest.approx(75.0)


def test_fitness_constant_series_excluded():
    with pytest.warns(RuntimeWarning):
        scores = fitness([np.ones(5)], [np.zeros(5)])
    assert scores == [None]


def test_trial_seed_deterministic_and_distinct():
    assert trial_seed(7, 0, 1) == trial_seed(7, 0, 1)
    seeds = {trial_seed(7, c, t) for c in range(3) for t in range(5)}
    assert len(seeds) == 15


def test_run_trial_reproducible():
    config = BenchmarkConfig(
        cells=(Condition("random", NO_NOISE, 40),),
        trials=1, seed=3, trunc=8, n_nodes=4, n_observed=3, density=0.3,
        vi=ViConfig(max_iter=15))
    a = run_trial(config, 0, 0)
    b = run_trial(config, 0, 0)
    assert a[0].tpr == b[0].tpr
    assert a[0].prec == b[0].prec
    assert a[0].seed == b[0].seed
    assert a[0].mean_fitness == b[0].mean_fitness


def test_run_benchmark_zero_trials():
    config = BenchmarkConfig(cells=(Condition("random", NO_NOISE, 40),),
                             trials=0, seed=1)
    results, summary = run_benchmark(config)
    assert results == []
    cell = summary["grid"]["random/no-noise/40"]["vi"]
    assert cell["n_trials"] == 0


def test_benchmark_small_grid_aggregates():
    config = BenchmarkConfig(
        cells=(Condition("random", NO_NOISE, 40),),
        trials=2, seed=5, trunc=6, n_nodes=4, n_observed=3, density=0.3,
        vi=ViConfig(max_iter=10))
    results, summary = run_benchmark(config)
    assert len(results) == 2
    cell = summary["grid"]["random/no-noise/40"]["vi"]
    assert cell["n_trials"] == 2
    assert cell["n_failed"] == 0
    # aggregate equals the arithmetic mean of per-trial values
    assert cell["mean_tpr"] == pytest.approx(np.mean([r.tpr for r in results]))
    assert cell["mean_prec"] == pytest.approx(np.mean([r.prec for r in results]))
    assert summary["conventions"]["precision_empty_network"] == 1.0
    assert summary["conventions"]["prediction"] == "one-step-ahead"


def _strip_timing(row):
    return {k: v for k, v in row.items() if k != "runtime"}


def _strip_summary_timing(summary):
    out = json.loads(json.dumps(summary))
    for cell in out["grid"].values():
        for method in cell.values():
            method.pop("mean_runtime", None)
    return out


def test_benchmark_rerun_identical():
    # wall-clock runtime is the one legitimately non-reproducible field
    config = BenchmarkConfig(
        cells=(Condition("random", NO_NOISE, 40),),
        trials=2, seed=5, trunc=6, n_nodes=4, n_observed=3, density=0.3,
        vi=ViConfig(max_iter=10))
    r1, s1 = run_benchmark(config)
    r2, s2 = run_benchmark(config)
    for a, b in zip(r1, r2):
        assert _strip_timing(a.to_row()) == _strip_timing(b.to_row())
    assert _strip_summary_timing(s1) == _strip_summary_timing(s2)


def test_condition_validation():
    with pytest.raises(ParameterError):
        BenchmarkConfig(cells=(), trials=-1)
    with pytest.raises(ParameterError):
        BenchmarkConfig(cells=(), methods=("magic",))
