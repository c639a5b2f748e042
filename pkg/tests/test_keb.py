"""Empirical-Bayes baseline: EM updates, monotonicity, and the update
equivalence with the variational scale factor."""

import numpy as np
import pytest

from netinf.errors import ParameterError
from netinf.keb import KebConfig, KebState, em_gamma_update, fit_keb, run_keb
from netinf.kernel import tc_w_diag, tridiagonal_from_w, u_sandwich_diag
from netinf.netsim import Experiment, NO_NOISE, StateSpaceModel, simulate
from netinf.problem import ModelStructure, assemble
from netinf.vi import update_lambda


def _single_link_problem(n=120, seed=0, trunc=6, noise=0.0):
    rng = np.random.default_rng(seed)
    src = rng.standard_normal(n)
    other = rng.standard_normal(n)
    y = np.zeros((3, n))
    y[0] = src
    y[2] = other
    y[1, 1:] = 0.7 * src[:-1]
    if noise:
        y[1] += noise * rng.standard_normal(n)
    exp = Experiment(y=y, u=np.zeros((1, n)), snr_db="no-noise")
    structure = ModelStructure(target=1, active_groups=(("y", 0), ("y", 2)),
                               include_self=False)
    return assemble([exp], structure, trunc)


def test_state_validation():
    with pytest.raises(ParameterError):
        KebState(gamma=np.zeros(2), beta=np.array([0.5, 0.5]), sigma=1.0)
    with pytest.raises(ParameterError):
        KebState(gamma=np.array([1.0]), beta=np.array([1.5]), sigma=1.0)
    with pytest.raises(ParameterError):
        KebState(gamma=np.array([1.0]), beta=np.array([0.5]), sigma=0.0)
    with pytest.raises(ParameterError):
        KebConfig(init_gamma=0.0)


def test_gamma_update_equals_inverse_scale_update():
    """The EM scale step and the flat-hyperprior inverse of the variational
    scale update are the same formula on identical inputs."""
    rng = np.random.default_rng(1)
    for _ in range(100):
        trunc = int(rng.integers(1, 9))
        n_exp = int(rng.integers(1, 3))
        w_diag = tc_w_diag(trunc, float(rng.uniform(0.05, 0.95)))
        a = rng.standard_normal((trunc, trunc))
        moment = a @ a.T
        sandwich = n_exp * u_sandwich_diag(moment)
        gamma = em_gamma_update(w_diag, sandwich, n_exp * trunc)
        # variational side with a0 = b0 = 0 on the same inputs
        b_lam = 0.0 + 0.5 * float(np.dot(w_diag, sandwich))
        a_lam = 0.5 * n_exp * trunc
        assert gamma == pytest.approx(b_lam / a_lam, rel=1e-10, abs=1e-12)


def test_gamma_update_matches_dense_trace():
    rng = np.random.default_rng(2)
    trunc = 5
    w_diag = tc_w_diag(trunc, 0.4)
    a = rng.standard_normal((trunc, trunc))
    moment = a @ a.T
    oracle = np.trace(tridiagonal_from_w(w_diag) @ moment) / trunc
    got = em_gamma_update(w_diag, u_sandwich_diag(moment), trunc)
    assert got == pytest.approx(oracle, rel=1e-12)


def test_objective_nonincreasing():
    prob = _single_link_problem(seed=3, noise=0.05)
    state, _, _ = run_keb(prob, KebConfig(max_iter=40))
    trace = np.array(state.objective_trace)
    diffs = np.diff(trace)
    assert np.all(diffs <= 1e-8 * np.maximum(1.0, np.abs(trace[:-1])))


def test_noiseless_single_link_recovery_and_pruning():
    prob = _single_link_problem(seed=4)
    config = KebConfig(max_iter=300)
    state, w_hat, result = run_keb(prob, config)
    active = prob.groups.index(("y", 0))
    inactive = prob.groups.index(("y", 2))
    assert state.gamma[inactive] < 1e-6 * state.gamma[active]
    assert ("y", 0) in result.selected_groups
    assert ("y", 2) in result.pruned_groups
    # estimated response close to the least-squares oracle on the kept group
    sl = prob.block_slice(("y", 0))
    ls = np.linalg.lstsq(prob.phis[0], prob.y_vecs[0], rcond=None)[0]
    assert abs(w_hat[0][sl][0] - ls[sl][0]) < 0.05
    assert abs(w_hat[0][sl][0] - 0.7) < 0.05
    # pruned group's coefficients are zeroed in the reported estimate
    assert np.all(w_hat[0][prob.block_slice(("y", 2))] == 0.0)


def test_keb_selection_engine_two_node_network():
    a = np.array([[0.3, 0.0], [0.6, 0.2]])
    model = StateSpaceModel(a=a, b_u=np.eye(2), b_e=np.zeros((2, 2)), p=2)
    exp = simulate(model, 80, NO_NOISE, seed=5)
    from netinf.topology import infer_network
    net = infer_network([exp], KebConfig(max_iter=40), trunc=8, fit=fit_keb,
                        method="keb-tc")
    assert net.method == "keb-tc"
    np.testing.assert_array_equal(net.q_adj, [[False, False], [True, False]])


def test_run_keb_empty_problem():
    rng = np.random.default_rng(6)
    exp = Experiment(y=rng.standard_normal((1, 30)), u=np.zeros((1, 30)),
                     snr_db="no-noise")
    structure = ModelStructure(target=0, active_groups=(), include_self=False)
    prob = assemble([exp], structure, trunc=4)
    state, w_hat, result = run_keb(prob, KebConfig(max_iter=5))
    assert state.objective_trace
    assert w_hat[0].shape == (0,)
