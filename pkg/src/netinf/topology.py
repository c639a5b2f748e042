"""Backward structure selection and network assembly.

Per target node, the full candidate structure is fitted first; link groups
are then removed in ascending order of their impulse-response norms (the
confidence measure), refitting after each threshold and keeping the
structure with the highest evidence score.  The removal set at step k is
everything at or below the k-th ascending confidence value, so candidates
form a nested chain down to the link-free model, which is also evaluated.

The self-lag group carries noise dynamics rather than a link; it is exempt
from ranking and removal and is present in every candidate.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from .errors import NumericalError
from .problem import ModelStructure, assemble, full_structure, group_label
from .vi import ViConfig, run_vi

#: relative evidence difference treated as a tie (broken toward sparsity)
TIE_REL_TOL = 1e-9


@dataclasses.dataclass
class SelectionEntry:
    structure: ModelStructure
    lower_bound: float
    removed_groups: tuple
    confidences: dict = dataclasses.field(default_factory=dict)


@dataclasses.dataclass
class SelectionTrace:
    """Scored nested candidate structures for one target node.

    ``chosen_fit`` keeps the (result, problem) pair of the winning
    candidate so its impulse responses can be exported without refitting.
    """

    target: int
    entries: list
    chosen: int
    chosen_fit: tuple = (None, None)

    @property
    def chosen_entry(self) -> SelectionEntry:
        return self.entries[self.chosen]

    @property
    def chosen_structure(self) -> ModelStructure:
        return self.chosen_entry.structure


@dataclasses.dataclass
class InferredNetwork:
    """Union of the per-node selections plus their estimation byproducts."""

    q_adj: np.ndarray
    p_adj: np.ndarray
    w_hat: dict                  # (kind, target, source) -> impulse response
    traces: dict                 # target -> SelectionTrace
    unresolved: dict = dataclasses.field(default_factory=dict)
    method: str = "vi"

    @property
    def n_links(self) -> int:
        return int(self.q_adj.sum() + self.p_adj.sum())


def _fit_vi(experiments, structure, trunc, config):
    """Default scoring engine: the variational lower bound."""
    problem = assemble(experiments, structure, trunc)
    result = run_vi(problem, config)
    return result.lower_bound, result, problem


def _with_seed(config, seed_parts):
    if getattr(config, "seed", None) is None:
        return config
    sub = np.random.SeedSequence([config.seed, *seed_parts])
    return dataclasses.replace(config, seed=int(sub.generate_state(1)[0]))


def _score(fit, experiments, structure, trunc, config):
    try:
        return fit(experiments, structure, trunc, config)
    except NumericalError as exc:
        warnings.warn(f"candidate {structure.active_groups} failed: {exc}",
                      RuntimeWarning)
        return -np.inf, None, None


def _argmax_sparse(entries) -> int:
    """Index of the highest score; near-ties go to the sparser structure."""
    best = max(e.lower_bound for e in entries)
    tol = TIE_REL_TOL * max(1.0, abs(best))
    tied = [k for k, e in enumerate(entries) if e.lower_bound >= best - tol]
    return min(tied, key=lambda k: (entries[k].structure.n_active, -k))


def backward_select(experiments, target: int, config: ViConfig,
                    trunc: int = 20, fit=None) -> SelectionTrace:
    """Greedy evidence-guided search over nested structures for one node.

    ``fit`` may swap the scoring engine (the empirical-Bayes baseline uses
    its marginal likelihood); it must return (score, result, problem).  A
    failure on a candidate scores it -inf and the search continues.
    """
    if fit is None:
        fit = _fit_vi
    structure = full_structure(experiments[0].p, experiments[0].m, target)

    full_score, full_result, full_problem = _score(
        fit, experiments, structure, trunc, _with_seed(config, (target, 0)))
    if full_result is None:
        raise NumericalError(f"full-structure fit failed for node {target}")
    confidences = {g: c for g, c in
                   full_result.group_confidences(full_problem).items()
                   if g != ("y", target)}
    entries = [SelectionEntry(structure=structure, lower_bound=full_score,
                              removed_groups=(), confidences=confidences)]
    fits = [(full_result, full_problem)]

    # ascending thresholds from the full fit; cumulative removal produces a
    # nested chain, deduplicated when tied confidences collapse steps
    order = sorted(confidences, key=lambda g: (confidences[g],
                                               structure.active_groups.index(g)))
    thresholds = [confidences[g] for g in order]
    seen = {structure.active_groups}
    candidates = []
    for k in range(len(order) - 1):
        removed = tuple(g for g in structure.active_groups
                        if confidences[g] <= thresholds[k])
        cand = structure.without(removed)
        if cand.active_groups not in seen:
            seen.add(cand.active_groups)
            candidates.append((cand, removed))
    empty = structure.without(structure.active_groups)
    if empty.active_groups not in seen:
        candidates.append((empty, structure.active_groups))

    for k, (cand, removed) in enumerate(candidates, start=1):
        score, result, prob = _score(fit, experiments, cand, trunc,
                                     _with_seed(config, (target, k)))
        conf = (result.group_confidences(prob) if result is not None else {})
        conf.pop(("y", target), None)
        entries.append(SelectionEntry(structure=cand, lower_bound=score,
                                      removed_groups=removed,
                                      confidences=conf))
        fits.append((result, prob))

    chosen = _argmax_sparse(entries)
    return SelectionTrace(target=target, entries=entries, chosen=chosen,
                          chosen_fit=fits[chosen])


def exhaustive_select(experiments, target: int, config: ViConfig,
                      trunc: int = 20, fit=None) -> SelectionTrace:
    """Score every subset of candidate groups (oracle; test scale only)."""
    if fit is None:
        fit = _fit_vi
    full = full_structure(experiments[0].p, experiments[0].m, target)
    groups = full.active_groups
    entries = []
    fits = []
    for mask in range(2 ** len(groups)):
        active = tuple(g for k, g in enumerate(groups) if mask & (1 << k))
        cand = ModelStructure(target=target, active_groups=active)
        score, result, prob = _score(fit, experiments, cand, trunc,
                                     _with_seed(config, (target, mask)))
        entries.append(SelectionEntry(structure=cand, lower_bound=score,
                                      removed_groups=tuple(
                                          g for g in groups if g not in active)))
        fits.append((result, prob))
    chosen = _argmax_sparse(entries)
    return SelectionTrace(target=target, entries=entries, chosen=chosen,
                          chosen_fit=fits[chosen])


def infer_network(experiments, config: ViConfig, trunc: int = 20,
                  fit=None, method: str = "vi") -> InferredNetwork:
    """Run the per-node search for every observed node and take the union."""
    p = experiments[0].p
    m = experiments[0].m
    q_adj = np.zeros((p, p), dtype=bool)
    p_adj = np.zeros((p, m), dtype=bool)
    w_hat = {}
    traces = {}
    unresolved = {}
    for target in range(p):
        try:
            trace = backward_select(experiments, target, config, trunc, fit)
        except NumericalError as exc:
            unresolved[target] = str(exc)
            continue
        traces[target] = trace
        result, prob = trace.chosen_fit
        for g in trace.chosen_structure.active_groups:
            kind, j = g
            if kind == "y":
                q_adj[target, j] = True
            else:
                p_adj[target, j] = True
            if result is not None:
                s = prob.block_slice(g)
                w_hat[(kind, target, j)] = np.mean(
                    [mu[s] for mu in result.w_hat], axis=0)
    return InferredNetwork(q_adj=q_adj, p_adj=p_adj, w_hat=w_hat,
                           traces=traces, unresolved=unresolved, method=method)


def trace_to_dict(trace: SelectionTrace) -> dict:
    return {
        "target": trace.target,
        "chosen": trace.chosen,
        "entries": [
            {
                "active_groups": [group_label(g) for g in e.structure.active_groups],
                "lower_bound": e.lower_bound,
                "removed_groups": [group_label(g) for g in e.removed_groups],
                "confidences": {group_label(g): c for g, c in e.confidences.items()},
            }
            for e in trace.entries
        ],
    }
