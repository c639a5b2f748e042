"""Per-target-node regression data under a candidate model structure.

For target node i the one-step predictor is a sum of truncated impulse
responses convolved with the other nodes' outputs and the inputs.  Stacking
the predictor over time t = N..T+1 (descending, so vector index 0 is the
latest sample) gives a linear regression Y = Phi w with one T-column block
per predictor group.

Groups are identified by ("y", j) for source node j and ("u", j) for input
j.  The target's own lagged outputs form a special, always-eligible "self"
group: it carries the node's noise-filter dynamics rather than a network
link, so candidate structures list only the link groups and the self block
is prepended at assembly time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, ParameterError
from .netsim import Experiment

GroupId = tuple[str, int]


def group_label(group: GroupId) -> str:
    return f"{group[0]}{group[1]}"


def parse_group_label(label: str) -> GroupId:
    kind, idx = label[0], label[1:]
    if kind not in ("y", "u") or not idx.isdigit():
        raise ParameterError(f"bad group label {label!r}")
    return (kind, int(idx))


@dataclass(frozen=True)
class ModelStructure:
    """Candidate predictor set for one target node.

    ``active_groups`` holds the link groups only; the self group is implied
    by ``include_self`` and never appears in the list.
    """

    target: int
    active_groups: tuple
    include_self: bool = True

    def __post_init__(self):
        object.__setattr__(self, "active_groups", tuple(self.active_groups))
        seen = set()
        for g in self.active_groups:
            if g in seen:
                raise ParameterError(f"duplicate predictor group {g}")
            seen.add(g)
            if g == ("y", self.target):
                raise ParameterError("target cannot be its own link group")

    @property
    def n_active(self) -> int:
        return len(self.active_groups)

    def all_groups(self) -> tuple:
        """Block order of the assembled regression: self first, then links."""
        self_group = (("y", self.target),) if self.include_self else ()
        return self_group + self.active_groups

    def without(self, groups) -> "ModelStructure":
        drop = set(groups)
        return ModelStructure(
            target=self.target,
            active_groups=tuple(g for g in self.active_groups if g not in drop),
            include_self=self.include_self,
        )


def full_structure(p: int, m: int, target: int, include_self: bool = True) -> ModelStructure:
    """All candidate links of a p-node, m-input network for one target."""
    groups = [("y", j) for j in range(p) if j != target]
    groups += [("u", j) for j in range(m)]
    return ModelStructure(target=target, active_groups=tuple(groups),
                          include_self=include_self)


@dataclass
class RegressionProblem:
    """Stacked data (Y_q, Phi_q) across experiments for one structure."""

    structure: ModelStructure
    trunc: int
    y_vecs: list  # one (N_q - T,) vector per experiment, descending time
    phis: list    # one (N_q - T, T * n_groups) matrix per experiment
    groups: tuple = ()
    group_offsets: dict = field(default_factory=dict)
    _gram: list = field(default=None, repr=False, compare=False)

    @property
    def n_experiments(self) -> int:
        return len(self.y_vecs)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def n_coeffs(self) -> int:
        return self.trunc * self.n_groups

    @property
    def n_rows(self) -> list:
        return [y.shape[0] for y in self.y_vecs]

    def block_slice(self, group: GroupId) -> slice:
        start = self.group_offsets[group]
        return slice(start, start + self.trunc)

    def gram(self) -> list:
        """Cached (Phi'Phi, Phi'Y, Y'Y) per experiment; these never change
        over a fit, only the regularizer does."""
        if self._gram is None:
            self._gram = [(phi.T @ phi, phi.T @ y, float(y @ y))
                          for y, phi in zip(self.y_vecs, self.phis)]
        return self._gram

    def group_block(self, mat: np.ndarray, group: GroupId) -> np.ndarray:
        """Diagonal T x T block of a coefficient-space matrix for one group."""
        s = self.block_slice(group)
        return mat[s, s]


def _lag_block(series: np.ndarray, n_points: int, trunc: int) -> np.ndarray:
    """Rows t = N..T+1 (descending), columns are lags 1..T of ``series``."""
    rows = n_points - trunc
    t_idx = np.arange(n_points, trunc, -1)           # N, N-1, ..., T+1
    lag_idx = t_idx[:, None] - np.arange(1, trunc + 1)[None, :]
    # series index k holds sample time k+1
    return series[lag_idx - 1].reshape(rows, trunc)


def assemble(experiments, structure: ModelStructure, trunc: int) -> RegressionProblem:
    """Build (Y_q, Phi_q) for every experiment under one structure.

    Row r of Phi_q holds y_j(t-1)..y_j(t-T) / u_j(t-1)..u_j(t-T) for the
    row's time index t = N_q - r; removing a group deletes exactly its
    T-column block and leaves everything else untouched.
    """
    if trunc < 1:
        raise ParameterError(f"truncation length must be >= 1, got {trunc}")
    groups = structure.all_groups()
    offsets = {g: k * trunc for k, g in enumerate(groups)}
    y_vecs, phis = [], []
    for q, exp in enumerate(experiments):
        n_q = exp.n_points
        if n_q <= trunc:
            raise InsufficientDataError(
                f"experiment {q} has {n_q} points, needs more than T={trunc}")
        if structure.target >= exp.p:
            raise ParameterError(f"target {structure.target} not observed (p={exp.p})")
        rows = n_q - trunc
        target_series = exp.y[structure.target]
        t_idx = np.arange(n_q, trunc, -1)
        y_vecs.append(target_series[t_idx - 1].copy())
        phi = np.empty((rows, trunc * len(groups)))
        for g in groups:
            kind, j = g
            series = exp.y[j] if kind == "y" else exp.u[j]
            phi[:, offsets[g] : offsets[g] + trunc] = _lag_block(series, n_q, trunc)
        phis.append(phi)
    return RegressionProblem(structure=structure, trunc=trunc, y_vecs=y_vecs,
                             phis=phis, groups=groups, group_offsets=offsets)


def predict_one_step(problem: RegressionProblem, w_hat) -> list:
    """Phi_q @ w_hat per experiment (aligned with each Y_q).

    ``w_hat`` may be a single stacked vector shared by all experiments or a
    list with one vector per experiment.
    """
    if isinstance(w_hat, (list, tuple)):
        w_list = [np.asarray(w, dtype=float) for w in w_hat]
        if len(w_list) != problem.n_experiments:
            raise ParameterError("need one coefficient vector per experiment")
    else:
        w_list = [np.asarray(w_hat, dtype=float)] * problem.n_experiments
    preds = []
    for phi, w in zip(problem.phis, w_list):
        if w.shape != (phi.shape[1],):
            raise ParameterError(
                f"coefficient length {w.shape} does not match {phi.shape[1]} columns")
        preds.append(phi @ w)
    return preds
