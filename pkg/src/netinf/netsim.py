"""Random sparse stable networks, ring networks, and their simulation.

Ground truth lives in a linear state-space model whose first p states are
observed; the remaining states are hidden.  The observable network topology
is the zero structure of the transfer matrices relating observed nodes to
each other (Q) and inputs to observed nodes (P), where a link i <- j exists
iff the direct entry A11[i, j] is nonzero or a directed path j -> hidden ->
... -> hidden -> i exists.  Structure is derived by boolean reachability,
never numerically, so accidental floating cancellations cannot flip links.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import GenerationError, ParameterError

#: Marker values accepted by :func:`simulate` besides a numeric SNR in dB.
NO_NOISE = "no-noise"
NO_INPUT = "no-input"

MAX_GENERATION_ATTEMPTS = 1000


@dataclass
class StateSpaceModel:
    """Ground-truth linear system x(t+1) = A x(t) + B_u u(t) + B_e e(t).

    The first ``p`` states are observed (C = [I, 0]); the rest are hidden.
    """

    a: np.ndarray
    b_u: np.ndarray
    b_e: np.ndarray
    p: int
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b_u.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.n - self.p

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.a))))

    def validate(self):
        if self.a.shape[0] != self.a.shape[1]:
            raise ParameterError("state matrix must be square")
        if not 1 <= self.p <= self.n:
            raise ParameterError(f"observed count p={self.p} outside 1..{self.n}")
        if self.b_u.shape[0] != self.n or self.b_e.shape[0] != self.n:
            raise ParameterError("input/noise matrices must have n rows")
        if self.spectral_radius() >= 1.0:
            raise ParameterError("state matrix must have spectral radius < 1")


@dataclass
class DsfStructure:
    """Boolean adjacency of the observable network.

    ``q_adj[i, j]`` is True when node j drives node i; the diagonal is
    always False.  ``p_adj[i, j]`` is True when input j drives node i.
    """

    q_adj: np.ndarray
    p_adj: np.ndarray

    def __post_init__(self):
        self.q_adj = np.asarray(self.q_adj, dtype=bool)
        self.p_adj = np.asarray(self.p_adj, dtype=bool)
        np.fill_diagonal(self.q_adj, False)

    @property
    def n_links(self) -> int:
        return int(self.q_adj.sum() + self.p_adj.sum())

    def link_set(self) -> set:
        links = {("y", i, j) for i, j in zip(*np.nonzero(self.q_adj))}
        links |= {("u", i, j) for i, j in zip(*np.nonzero(self.p_adj))}
        return links


@dataclass
class Experiment:
    """One recorded time series: observed nodes ``y`` (p x N), inputs ``u`` (m x N)."""

    y: np.ndarray
    u: np.ndarray
    snr_db: float | str
    seed: int | None = None

    @property
    def n_points(self) -> int:
        return self.y.shape[1]

    @property
    def p(self) -> int:
        return self.y.shape[0]

    @property
    def m(self) -> int:
        return self.u.shape[0]

    def __post_init__(self):
        if self.y.shape[1] != self.u.shape[1]:
            raise ParameterError("y and u must share the same time length")


def _reachability(adj: np.ndarray) -> np.ndarray:
    """Transitive closure (including length-0 paths) of a boolean adjacency."""
    k = adj.shape[0]
    reach = np.eye(k, dtype=bool)
    if k == 0:
        return reach
    step = adj.copy()
    for _ in range(k):
        new = reach | (step @ reach)
        if np.array_equal(new, reach):
            break
        reach = new
    return reach


def derive_dsf_structure(model: StateSpaceModel) -> DsfStructure:
    """Boolean topology of the observed network implied by the state space.

    Entry (i, j) of the node-to-node structure is set iff A11[i, j] != 0 or
    a directed path j -> hidden* -> i exists; input structure likewise via
    direct feedthrough rows of B_u plus hidden paths.
    """
    p = model.p
    a = model.a != 0
    a11 = a[:p, :p]
    a12 = a[:p, p:]
    a21 = a[p:, :p]
    a22 = a[p:, p:]
    bu = model.b_u != 0
    bu1, bu2 = bu[:p, :], bu[p:, :]

    reach = _reachability(a22)
    hidden_path = a12 @ reach @ a21
    q_adj = a11 | hidden_path
    np.fill_diagonal(q_adj, False)
    p_adj = bu1 | (a12 @ reach @ bu2)
    return DsfStructure(q_adj=q_adj, p_adj=p_adj)


def _sparse_random_matrix(rng: np.random.Generator, n: int, density: float) -> np.ndarray:
    """Standard-normal entries on a Bernoulli(density) support, like sprandn."""
    mask = rng.random((n, n)) < density
    a = np.zeros((n, n))
    a[mask] = rng.standard_normal(int(mask.sum()))
    return a


def generate_random_network(
    n: int,
    p: int,
    density: float,
    seed,
    max_attempts: int = MAX_GENERATION_ATTEMPTS,
    stability_margin: float = 0.95,
) -> StateSpaceModel:
    """Draw a sparse stable network with no isolated observed node.

    Candidate state matrices are resampled (brute force) until the spectral
    radius is below one and every observed node takes part in at least one
    node-to-node link of the derived structure.  If a candidate passes the
    isolation check but is unstable after ``max_attempts`` draws, the last
    candidate is rescaled by ``stability_margin / rho(A)``, which preserves
    the sign pattern.  Each observed node is driven by its own input
    (B_u = [I; 0]) and every state by its own process noise (B_e = I).
    """
    if not 1 <= p <= n:
        raise ParameterError(f"observed count p={p} outside 1..{n}")
    if not 0.0 < density < 1.0:
        raise ParameterError(f"density must lie in (0, 1), got {density}")
    rng = np.random.default_rng(seed)
    b_u = np.zeros((n, p))
    b_u[:p, :] = np.eye(p)
    b_e = np.eye(n)

    last_pattern_ok = None
    for _ in range(max_attempts):
        a = _sparse_random_matrix(rng, n, density)
        model = StateSpaceModel(a=a, b_u=b_u, b_e=b_e, p=p,
                                meta={"kind": "random", "seed": seed, "density": density})
        structure = derive_dsf_structure(model)
        participates = structure.q_adj.any(axis=0) | structure.q_adj.any(axis=1)
        if not participates.all():
            continue
        last_pattern_ok = a
        if np.max(np.abs(np.linalg.eigvals(a))) < 1.0:
            return model
    if last_pattern_ok is not None:
        a = last_pattern_ok
        rho = float(np.max(np.abs(np.linalg.eigvals(a))))
        a = a * (stability_margin / rho)
        return StateSpaceModel(a=a, b_u=b_u, b_e=b_e, p=p,
                               meta={"kind": "random", "seed": seed, "density": density,
                                     "rescaled": True})
    raise GenerationError(
        f"no draw without an isolated observed node in {max_attempts} attempts "
        f"(n={n}, p={p}, density={density})")


def generate_ring_network(
    p: int,
    hidden_per_edge: int = 0,
    seed=None,
    spectral_radius: float = 0.7,
    input_node: int = 0,
) -> StateSpaceModel:
    """Directed cycle over ``p`` observed nodes, one input, noise everywhere.

    Each cycle edge may be routed through a chain of ``hidden_per_edge``
    hidden states; the derived structure is the p-cycle either way.  A
    single input enters at ``input_node``.  Edge weights are drawn with
    random sign and magnitude, then scaled so the state matrix has the
    requested spectral radius.
    """
    if p < 3:
        raise ParameterError(f"ring needs at least 3 observed nodes, got {p}")
    if hidden_per_edge < 0:
        raise ParameterError("hidden_per_edge must be >= 0")
    if not 0 <= input_node < p:
        raise ParameterError(f"input node {input_node} outside 0..{p - 1}")
    if not 0.0 < spectral_radius < 1.0:
        raise ParameterError("spectral radius target must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    h = hidden_per_edge
    n = p + p * h
    a = np.zeros((n, n))

    def weight():
        return rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.0)

    # Cycle edge j -> (j+1) mod p, optionally through a hidden chain.
    for j in range(p):
        tgt = (j + 1) % p
        if h == 0:
            a[tgt, j] = weight()
        else:
            chain = [p + j * h + k for k in range(h)]
            a[chain[0], j] = weight()
            for k in range(h - 1):
                a[chain[k + 1], chain[k]] = weight()
            a[tgt, chain[-1]] = weight()

    rho = float(np.max(np.abs(np.linalg.eigvals(a))))
    a *= spectral_radius / rho

    b_u = np.zeros((n, 1))
    b_u[input_node, 0] = 1.0
    b_e = np.eye(n)
    model = StateSpaceModel(a=a, b_u=b_u, b_e=b_e, p=p,
                            meta={"kind": "ring", "seed": seed,
                                  "hidden_per_edge": h, "input_node": input_node})
    structure = derive_dsf_structure(model)
    model.meta["n_q_links"] = int(structure.q_adj.sum())
    model.meta["n_p_links"] = int(structure.p_adj.sum())
    return model


def noise_variance(snr_db: float | str, input_variance: float = 1.0) -> float:
    """Process-noise variance for a given SNR = 10 log10(var_u / var_e).

    Pure-noise experiments keep unit noise variance (the input is absent so
    only the noise scale matters, and it cancels out of the inference).
    """
    if snr_db == NO_NOISE:
        return 0.0
    if snr_db == NO_INPUT:
        return 1.0
    return float(input_variance * 10.0 ** (-float(snr_db) / 10.0))


def simulate(model: StateSpaceModel, n_points: int, snr_db: float | str, seed) -> Experiment:
    """Run the state-space recursion from x(0) = 0 and record observed states.

    Inputs are i.i.d. unit-variance white Gaussian; process noise is white
    Gaussian with variance set by the SNR.  ``"no-noise"`` zeroes the noise,
    ``"no-input"`` zeroes the input.  Sample t of ``u`` is the input that
    drives the transition into sample t+1 of ``y``.
    """
    if n_points < 1:
        raise ParameterError(f"n_points must be >= 1, got {n_points}")
    rng = np.random.default_rng(seed)
    n, m, p = model.n, model.m, model.p
    q = model.b_e.shape[1]
    var_e = noise_variance(snr_db)

    u = rng.standard_normal((m, n_points + 1))
    e = rng.standard_normal((q, n_points + 1)) * np.sqrt(var_e)
    if snr_db == NO_INPUT:
        u = np.zeros_like(u)

    x = np.zeros(n)
    y = np.empty((p, n_points))
    for t in range(n_points):
        x = model.a @ x + model.b_u @ u[:, t] + model.b_e @ e[:, t]
        y[:, t] = x[:p]
    return Experiment(y=y, u=u[:, 1 : n_points + 1], snr_db=snr_db, seed=seed)
