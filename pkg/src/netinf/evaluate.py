"""Topology metrics, held-out prediction fitness, and the benchmark harness.

A trial generates a network, simulates one training series and one
held-out validation series, infers the topology with each requested method
and scores it against the generator's own ground truth.  True positive
rate and precision are counted over node-to-node and input-to-node links
jointly.  Prediction fitness on the validation series uses the one-step
predictor of each node's chosen structure (declared in the output
metadata; free-running the inferred predictor is not well posed).
"""

from __future__ import annotations

import dataclasses
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ParameterError
from .keb import KebConfig, fit_keb
from .netsim import (
    NO_INPUT,
    NO_NOISE,
    DsfStructure,
    derive_dsf_structure,
    generate_random_network,
    generate_ring_network,
    simulate,
)
from .problem import assemble, predict_one_step
from .topology import InferredNetwork, infer_network
from .vi import ViConfig

#: conventions echoed into every serialized result
CONVENTIONS = {
    "precision_empty_network": 1.0,
    "prediction": "one-step-ahead",
    "links_counted": "q_adj and p_adj jointly",
}


def score_topology(truth: DsfStructure, inferred) -> tuple:
    """(tpr, prec) of an inferred network against the ground truth.

    Precision of an empty inferred network is 1.0 by convention (it
    contains no incorrect link).
    """
    q_inf = inferred.q_adj if not isinstance(inferred, DsfStructure) else inferred.q_adj
    p_inf = inferred.p_adj
    if q_inf.shape != truth.q_adj.shape or p_inf.shape != truth.p_adj.shape:
        raise ParameterError(
            f"shape mismatch: truth {truth.q_adj.shape}/{truth.p_adj.shape} vs "
            f"inferred {q_inf.shape}/{p_inf.shape}")
    n_true = int(truth.q_adj.sum() + truth.p_adj.sum())
    n_inferred = int(q_inf.sum() + p_inf.sum())
    n_correct = int((q_inf & truth.q_adj).sum() + (p_inf & truth.p_adj).sum())
    tpr = n_correct / n_true if n_true else 1.0
    prec = n_correct / n_inferred if n_inferred else 1.0
    return tpr, prec


def fitness(validation_targets, predictions) -> list:
    """100 (1 - ||y - yhat|| / ||y - ybar||) per node.

    Nodes whose validation series is constant have an undefined score and
    are excluded with a warning.
    """
    scores = []
    for node, (y, yhat) in enumerate(zip(validation_targets, predictions)):
        y = np.asarray(y, dtype=float)
        yhat = np.asarray(yhat, dtype=float)
        if y.shape != yhat.shape:
            raise ParameterError(f"node {node}: prediction length mismatch")
        denom = float(np.linalg.norm(y - np.mean(y)))
        if denom == 0.0:
            warnings.warn(f"node {node}: constant validation series, "
                          "fitness undefined; excluded", RuntimeWarning)
            scores.append(None)
            continue
        scores.append(100.0 * (1.0 - float(np.linalg.norm(y - yhat)) / denom))
    return scores


def network_fitness(network: InferredNetwork, validation, trunc: int) -> list:
    """One-step-ahead fitness of every resolved node on a held-out series."""
    targets, preds = [], []
    for node, trace in sorted(network.traces.items()):
        result, _ = trace.chosen_fit
        if result is None:
            continue
        prob_val = assemble([validation], trace.chosen_structure, trunc)
        w = result.w_hat[0] if result.w_hat else np.zeros(prob_val.n_coeffs)
        preds.append(predict_one_step(prob_val, w)[0])
        targets.append(prob_val.y_vecs[0])
    return fitness(targets, preds)


@dataclasses.dataclass(frozen=True)
class Condition:
    """One cell of the benchmark grid."""

    topology: str                # "random" or "ring"
    snr_db: float | str
    n_points: int
    label: str = ""

    def tag(self) -> str:
        return self.label or f"{self.topology}/{self.snr_db}/{self.n_points}"


@dataclasses.dataclass(frozen=True)
class BenchmarkConfig:
    cells: tuple
    trials: int = 20
    methods: tuple = ("vi",)
    seed: int = 0
    trunc: int = 20
    n_nodes: int = 15
    n_observed: int = 10
    density: float = 0.15
    ring_nodes: int = 10
    validation_points: int = 200
    vi: ViConfig = ViConfig()
    keb: KebConfig = KebConfig()

    def __post_init__(self):
        if self.trials < 0:
            raise ParameterError("trial count must be nonnegative")
        for m in self.methods:
            if m not in ("vi", "keb"):
                raise ParameterError(f"unknown method {m!r}")


@dataclasses.dataclass
class TrialResult:
    condition: str
    method: str
    trial: int
    seed: int
    tpr: float
    prec: float
    fitness_per_node: list
    mean_fitness: float | None
    n_links_true: int
    n_links_inferred: int
    runtime: float
    error: str | None = None

    def to_row(self) -> dict:
        return {
            "condition": self.condition,
            "method": self.method,
            "trial": self.trial,
            "seed": self.seed,
            "tpr": self.tpr,
            "prec": self.prec,
            "mean_fitness": "" if self.mean_fitness is None else self.mean_fitness,
            "n_links_true": self.n_links_true,
            "n_links_inferred": self.n_links_inferred,
            "runtime": self.runtime,
        }


def trial_seed(master_seed: int, cell_index: int, trial_index: int) -> int:
    """Deterministic per-trial seed: first word of
    SeedSequence([master, cell, trial])."""
    return int(np.random.SeedSequence(
        [master_seed, cell_index, trial_index]).generate_state(1)[0])


def run_trial(config: BenchmarkConfig, cell_index: int, trial_index: int,
              methods=None) -> list:
    """Generate, simulate, infer and score one trial under one condition."""
    cond = config.cells[cell_index]
    seed = trial_seed(config.seed, cell_index, trial_index)
    ss = np.random.SeedSequence(seed)
    net_seed, sim_seed, val_seed, inf_seed = (int(s) for s in
                                              ss.generate_state(4))
    if cond.topology == "random":
        model = generate_random_network(config.n_nodes, config.n_observed,
                                        config.density, net_seed)
    elif cond.topology == "ring":
        model = generate_ring_network(config.ring_nodes, seed=net_seed)
    else:
        raise ParameterError(f"unknown topology {cond.topology!r}")
    truth = derive_dsf_structure(model)
    train = simulate(model, cond.n_points, cond.snr_db, sim_seed)
    validation = simulate(model, config.validation_points, cond.snr_db, val_seed)

    results = []
    for method in (methods or config.methods):
        start = time.perf_counter()
        error = None
        try:
            if method == "vi":
                vi_cfg = dataclasses.replace(config.vi, seed=inf_seed)
                network = infer_network([train], vi_cfg, trunc=config.trunc)
            else:
                keb_cfg = dataclasses.replace(config.keb, seed=inf_seed)
                network = infer_network([train], keb_cfg, trunc=config.trunc,
                                        fit=fit_keb, method="keb-tc")
            tpr, prec = score_topology(truth, network)
            fits = [f for f in network_fitness(network, validation, config.trunc)
                    if f is not None]
            mean_fit = float(np.mean(fits)) if fits else None
            results.append(TrialResult(
                condition=cond.tag(), method=method, trial=trial_index,
                seed=seed, tpr=tpr, prec=prec, fitness_per_node=fits,
                mean_fitness=mean_fit, n_links_true=truth.n_links,
                n_links_inferred=network.n_links,
                runtime=time.perf_counter() - start))
        except Exception as exc:  # recorded, excluded from aggregation
            error = f"{type(exc).__name__}: {exc}"
            results.append(TrialResult(
                condition=cond.tag(), method=method, trial=trial_index,
                seed=seed, tpr=float("nan"), prec=float("nan"),
                fitness_per_node=[], mean_fitness=None,
                n_links_true=truth.n_links, n_links_inferred=0,
                runtime=time.perf_counter() - start, error=error))
    return results


def _n_workers() -> int:
    env = os.environ.get("NETINF_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def run_benchmark(config: BenchmarkConfig, progress=None):
    """All trials of all grid cells; returns (trial results, summary dict).

    Trials are independent with per-trial seeds derived from the master
    seed, so execution order cannot affect any result; an optional thread
    pool (NETINF_THREADS) exploits that.
    """
    jobs = [(ci, ti) for ci in range(len(config.cells))
            for ti in range(config.trials)]
    results = []
    workers = _n_workers()
    if workers > 1 and jobs:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(lambda job: run_trial(config, *job), jobs):
                results.extend(res)
                if progress:
                    progress(res)
    else:
        for job in jobs:
            res = run_trial(config, *job)
            results.extend(res)
            if progress:
                progress(res)
    results.sort(key=lambda r: (r.condition, r.method, r.trial))
    return results, summarize(config, results)


def summarize(config: BenchmarkConfig, results) -> dict:
    """Aggregate per (condition, method): means with Monte Carlo errors."""
    grid = {}
    for cond in config.cells:
        for method in config.methods:
            rows = [r for r in results
                    if r.condition == cond.tag() and r.method == method]
            ok = [r for r in rows if r.error is None]
            cell = {
                "n_trials": len(rows),
                "n_failed": len(rows) - len(ok),
            }
            if ok:
                tprs = np.array([r.tpr for r in ok])
                precs = np.array([r.prec for r in ok])
                cell["mean_tpr"] = float(np.mean(tprs))
                cell["mean_prec"] = float(np.mean(precs))
                cell["se_tpr"] = float(np.std(tprs, ddof=1) / np.sqrt(len(ok))) \
                    if len(ok) > 1 else 0.0
                cell["se_prec"] = float(np.std(precs, ddof=1) / np.sqrt(len(ok))) \
                    if len(ok) > 1 else 0.0
                fits = [r.mean_fitness for r in ok if r.mean_fitness is not None]
                cell["mean_fitness"] = float(np.mean(fits)) if fits else None
                cell["median_fitness"] = float(np.median(fits)) if fits else None
                cell["mean_runtime"] = float(np.mean([r.runtime for r in ok]))
            grid.setdefault(cond.tag(), {})[method] = cell
    return {
        "seed": config.seed,
        "trials": config.trials,
        "methods": list(config.methods),
        "conventions": dict(CONVENTIONS),
        "grid": grid,
    }


# The published evaluation grids, at their original data lengths.
SUITES = {
    "table1": tuple(Condition("random", NO_NOISE, n) for n in (45, 65, 85)),
    "table2": tuple(Condition("random", 10.0, n) for n in (100, 200, 300)),
    "table3": tuple(Condition("random", NO_INPUT, n) for n in (300, 500, 1000)),
    "table4": tuple(Condition("ring", 10.0, n) for n in (100, 200, 300, 400)),
}
